// Copyright 2026 The SAST Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sast/events.hpp"
#include "sast/grad.hpp"
#include "sast/optimizer.hpp"
#include "sast/snn.hpp"
#include "sast/stats.hpp"

namespace sast {

enum class Method { kBaseline, kSast };
std::string to_string(Method m);
Method method_from_string(const std::string& name);

enum class EvalMode { kSurrogate, kHard };
std::string to_string(EvalMode m);
EvalMode eval_mode_from_string(const std::string& name);

struct DataSource {
  std::string kind = "synth";  // "synth" or "files"
  SynthConfig synth;
  std::string train_path, val_path, test_path;
};

struct RobustnessConfig {
  std::vector<CorruptionFamily> families{CorruptionFamily::kEventDrop,
                                         CorruptionFamily::kTimeJitter,
                                         CorruptionFamily::kBinDrop};
  std::vector<double> severities{kSeverityGrid.begin(), kSeverityGrid.end()};
  std::uint64_t seed = 2024;
};

// Configuration schema (JSON, every key optional):
//
//   name, method ("baseline" | "sast"), epochs, batch_size, seeds [..],
//   eval_modes ["surrogate", "hard"], diagnostics_every, checkpoint_every,
//   theorem_aligned, output_dir, max_passes
//   model:      { hidden [..], alpha, surrogate {family, k},
//                 init {weight_gain, readout_gain, bias_scale, theta_init,
//                       theta_jitter},
//                 train_thresholds, train_leak }
//   optimizer:  { eta, rho, delta, policy ("independent" | "reused"),
//                 base ("sgd" | "momentum"), momentum }
//   data:       { kind ("synth" | "files"), train, val, test,
//                 synth { classes, steps, spatial, group_size, shared,
//                         on_rate, off_rate, window, train_per_class,
//                         val_per_class, test_per_class, c_sat, seed } }
//   robustness: { families [..], severities [..], seed }
struct RunConfig {
  std::string name = "run";
  Method method = Method::kBaseline;
  std::vector<int> hidden{32};
  double alpha = 0.9;
  SurrogateSpec surrogate;
  InitOptions init;
  TrainableGroups groups;
  OptimizerConfig optimizer;
  DataSource data;
  int epochs = 30;
  std::size_t batch_size = 32;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<EvalMode> eval_modes{EvalMode::kSurrogate, EvalMode::kHard};
  RobustnessConfig robustness;
  int diagnostics_every = 0;  // epochs between smoothness diagnostics, 0 = off
  int checkpoint_every = 1;   // epochs between checkpoints, 0 = best only
  bool theorem_aligned = false;
  std::string output_dir;     // empty: nothing written
  std::size_t max_passes = 0;  // 0: no pass budget, train for all epochs

  void validate() const;
  std::vector<int> dims(int input_dim) const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string to_json(const RunConfig& cfg);
// Dotted key override, e.g. ("optimizer.rho", "0.3"). The value is read as
// JSON when it parses, as a string otherwise.
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);

DatasetSplits load_data(const DataSource& source);

struct MetricsRow {
  std::string run_id;
  std::string method;
  std::uint64_t seed = 0;
  int epoch = 0;
  double train_loss = 0.0;  // mean descent-pass loss over the epoch
  double val_loss = 0.0;
  double val_acc_sur = 0.0;
  double val_acc_hard = 0.0;
  double test_acc_sur = 0.0;
  double test_acc_hard = 0.0;
  double val_gap = 0.0;
  double test_gap = 0.0;
  double hat_m_theta = 0.0;
  double hat_gamma = 0.0;
  bool contractive = false;
  double beta_sec = -1.0;  // -1 when not computed this epoch
  double beta = -1.0;
  double wall_clock = 0.0;  // seconds spent in the epoch's training steps
  std::size_t steps = 0;    // cumulative
  std::size_t passes = 0;   // cumulative forward+backward evaluations
  std::size_t peak_bytes = 0;
  std::size_t calibration_ops = 0;  // calibration evaluations during this row
  std::string status = "ok";
};

std::string metrics_csv_header();
std::string to_csv(const MetricsRow& row);
// Parses a metrics CSV produced by to_csv (header line included).
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);
// Drops the wall-clock column so logs can be compared across runs.
std::string strip_wall_clock(const std::string& csv);

struct SeedRun {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  std::vector<MetricsRow> rows;
  NetworkParams best;
  NetworkParams final_params;
  int best_epoch = 0;
  MetricsRow selected;  // row of the best checkpoint
  std::size_t steps = 0;
  std::size_t passes = 0;
  std::size_t passes_per_step = 1;
  // Parameters at every checkpoint epoch (epoch, params), epoch 0 included.
  std::vector<std::pair<int, NetworkParams>> checkpoints;
};

struct TrainResult {
  RunConfig config;
  std::vector<SeedRun> runs;
};

int steps_per_epoch(std::size_t train_size, std::size_t batch_size);
int passes_per_step(const RunConfig& cfg);

SeedRun train_seed(const RunConfig& cfg, const DatasetSplits& data,
                   std::uint64_t seed);
// Trains every seed. With an output directory, writes config.json,
// metrics.csv, summary.json and checkpoints under ckpt/.
TrainResult train(const RunConfig& cfg);
TrainResult train(const RunConfig& cfg, const DatasetSplits& data);

// Argmax accuracy. Hard mode swaps sigma for the Heaviside step and changes
// nothing else.
double evaluate(const NetworkParams& params, const SurrogateSpec& spec,
                const Dataset& data, EvalMode mode);

// Number of calibrated evaluations performed in this process.
std::size_t calibration_operations();

struct CurvePoint {
  double severity = 0.0;
  double accuracy = 0.0;
};

struct RobustnessCurve {
  std::size_t model = 0;
  EvalMode mode = EvalMode::kSurrogate;
  CorruptionFamily family = CorruptionFamily::kEventDrop;
  std::vector<CurvePoint> points;
  double mean = 0.0;
  double auc = 0.0;
};

// Evaluates each model on the same corrupted copies of data.
std::vector<RobustnessCurve> robustness_sweep(
    const std::vector<NetworkParams>& models, const SurrogateSpec& spec,
    const Dataset& data, const RobustnessConfig& cfg,
    const std::vector<EvalMode>& modes = {EvalMode::kSurrogate, EvalMode::kHard});

enum class CalibrationMode { kGlobal, kPerLayer };

// 0.5, 0.6, ..., 1.5
std::vector<double> calibration_grid();

struct CalibrationResult {
  CalibrationMode mode = CalibrationMode::kGlobal;
  std::vector<double> lambdas;  // one per layer (all equal for global)
  double val_hard_uncalibrated = 0.0;
  double val_hard_calibrated = 0.0;
  double test_hard_calibrated = 0.0;
  std::size_t evaluations = 0;
};

CalibrationResult calibrate_thresholds(const NetworkParams& params,
                                       const SurrogateSpec& spec,
                                       const Dataset& val, const Dataset& test,
                                       CalibrationMode mode);

struct MatchedPair {
  std::uint64_t seed = 0;
  MetricsRow sast;
  MetricsRow matched;
  std::size_t sast_passes = 0;
  std::size_t matched_passes = 0;
};

// Runs the baseline with the pass budget of each SAST seed run.
std::vector<MatchedPair> compute_matched_control(const RunConfig& sast_cfg,
                                                 const TrainResult& sast_run,
                                                 const DatasetSplits& data);

struct OverheadResult {
  Summary baseline_epoch_seconds;
  Summary sast_epoch_seconds;
  double time_factor = 0.0;
  std::size_t baseline_peak_bytes = 0;
  std::size_t sast_peak_bytes = 0;
  double memory_factor = 0.0;
};

// Parameter-sized buffers live at the peak of one step (see optimizer).
int step_param_buffers(Method method);

// One warm-up epoch then timed_epochs per method, same seed and data.
OverheadResult measure_overhead(const RunConfig& cfg, const DatasetSplits& data,
                                int timed_epochs = 3);

struct ExternalRow {
  std::string method;
  double acc_sur = 0.0;
  double acc_hard = 0.0;
};

struct ReportOutput {
  std::string json;
  std::string text;
  std::vector<std::string> gaps;  // missing pieces, flagged
};

// Consolidates run directories (each holding metrics.csv and summary.json).
ReportOutput report(const std::vector<std::string>& run_dirs,
                    const std::vector<ExternalRow>& external = {});

}  // namespace sast
