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

#include "sast/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "sast/binary_io.hpp"
#include "sast/checkpoint.hpp"
#include "sast/diagnostics.hpp"
#include "sast/theory.hpp"

namespace sast {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string to_string(Method m) {
  return m == Method::kBaseline ? "baseline" : "sast";
}

Method method_from_string(const std::string& name) {
  if (name == "baseline") return Method::kBaseline;
  if (name == "sast") return Method::kSast;
  throw FormatError("unknown method '" + name + "'");
}

std::string to_string(EvalMode m) {
  return m == EvalMode::kSurrogate ? "surrogate" : "hard";
}

EvalMode eval_mode_from_string(const std::string& name) {
  if (name == "surrogate") return EvalMode::kSurrogate;
  if (name == "hard") return EvalMode::kHard;
  throw FormatError("unknown evaluation mode '" + name + "'");
}

namespace {

std::string policy_name(MinibatchPolicy p) {
  return p == MinibatchPolicy::kIndependentSecond ? "independent" : "reused";
}

MinibatchPolicy policy_from_string(const std::string& s) {
  if (s == "independent") return MinibatchPolicy::kIndependentSecond;
  if (s == "reused") return MinibatchPolicy::kReused;
  throw FormatError("unknown minibatch policy '" + s + "'");
}

std::string base_name(BaseOptimizer b) {
  return b == BaseOptimizer::kPlainSgd ? "sgd" : "momentum";
}

BaseOptimizer base_from_string(const std::string& s) {
  if (s == "sgd") return BaseOptimizer::kPlainSgd;
  if (s == "momentum") return BaseOptimizer::kMomentum;
  throw FormatError("unknown base optimizer '" + s + "'");
}

void check_keys(const ordered_json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw FormatError("config: section '" + section + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k))
      throw FormatError("config: unknown key '" + k + "' in section '" +
                        section + "'");
}

template <typename T>
void read(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  j["method"] = to_string(c.method);
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seeds"] = c.seeds;
  std::vector<std::string> modes;
  for (EvalMode m : c.eval_modes) modes.push_back(to_string(m));
  j["eval_modes"] = modes;
  j["diagnostics_every"] = c.diagnostics_every;
  j["checkpoint_every"] = c.checkpoint_every;
  j["theorem_aligned"] = c.theorem_aligned;
  j["output_dir"] = c.output_dir;
  j["max_passes"] = c.max_passes;
  ordered_json& m = j["model"];
  m["hidden"] = c.hidden;
  m["alpha"] = c.alpha;
  m["surrogate"] = {{"family", to_string(c.surrogate.family)},
                    {"k", c.surrogate.slope_k}};
  m["init"] = {{"weight_gain", c.init.weight_gain},
               {"readout_gain", c.init.readout_gain},
               {"bias_scale", c.init.bias_scale},
               {"theta_init", c.init.theta_init},
               {"theta_jitter", c.init.theta_jitter}};
  m["train_thresholds"] = c.groups.thresholds;
  m["train_leak"] = c.groups.leak;
  j["optimizer"] = {{"eta", c.optimizer.eta},
                    {"rho", c.optimizer.rho},
                    {"delta", c.optimizer.delta},
                    {"policy", policy_name(c.optimizer.policy)},
                    {"base", base_name(c.optimizer.base)},
                    {"momentum", c.optimizer.momentum}};
  const SynthConfig& s = c.data.synth;
  j["data"] = {{"kind", c.data.kind},
               {"train", c.data.train_path},
               {"val", c.data.val_path},
               {"test", c.data.test_path},
               {"synth",
                {{"classes", s.classes},
                 {"steps", s.steps},
                 {"spatial", s.spatial},
                 {"group_size", s.group_size},
                 {"shared", s.shared},
                 {"on_rate", s.on_rate},
                 {"off_rate", s.off_rate},
                 {"window", s.window},
                 {"train_per_class", s.train_per_class},
                 {"val_per_class", s.val_per_class},
                 {"test_per_class", s.test_per_class},
                 {"c_sat", s.c_sat},
                 {"seed", s.seed}}}};
  std::vector<std::string> fams;
  for (CorruptionFamily f : c.robustness.families) fams.push_back(to_string(f));
  j["robustness"] = {{"families", fams},
                     {"severities", c.robustness.severities},
                     {"seed", c.robustness.seed}};
  return j;
}

RunConfig config_from_json(const ordered_json& j) {
  RunConfig c;
  check_keys(j, "root",
             {"name", "method", "epochs", "batch_size", "seeds", "eval_modes",
              "diagnostics_every", "checkpoint_every", "theorem_aligned",
              "output_dir", "max_passes", "model", "optimizer", "data",
              "robustness"});
  read(j, "name", c.name);
  if (j.contains("method")) c.method = method_from_string(j["method"].get<std::string>());
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "seeds", c.seeds);
  if (j.contains("eval_modes")) {
    c.eval_modes.clear();
    for (const auto& m : j["eval_modes"])
      c.eval_modes.push_back(eval_mode_from_string(m.get<std::string>()));
  }
  read(j, "diagnostics_every", c.diagnostics_every);
  read(j, "checkpoint_every", c.checkpoint_every);
  read(j, "theorem_aligned", c.theorem_aligned);
  read(j, "output_dir", c.output_dir);
  read(j, "max_passes", c.max_passes);
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, "model", {"hidden", "alpha", "surrogate", "init",
                            "train_thresholds", "train_leak"});
    read(m, "hidden", c.hidden);
    read(m, "alpha", c.alpha);
    if (m.contains("surrogate")) {
      const auto& s = m["surrogate"];
      check_keys(s, "model.surrogate", {"family", "k"});
      if (s.contains("family"))
        c.surrogate.family = surrogate_family_from_string(s["family"].get<std::string>());
      read(s, "k", c.surrogate.slope_k);
    }
    if (m.contains("init")) {
      const auto& i = m["init"];
      check_keys(i, "model.init", {"weight_gain", "readout_gain", "bias_scale",
                                   "theta_init", "theta_jitter"});
      read(i, "weight_gain", c.init.weight_gain);
      read(i, "readout_gain", c.init.readout_gain);
      read(i, "bias_scale", c.init.bias_scale);
      read(i, "theta_init", c.init.theta_init);
      read(i, "theta_jitter", c.init.theta_jitter);
    }
    read(m, "train_thresholds", c.groups.thresholds);
    read(m, "train_leak", c.groups.leak);
  }
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    check_keys(o, "optimizer", {"eta", "rho", "delta", "policy", "base", "momentum"});
    read(o, "eta", c.optimizer.eta);
    read(o, "rho", c.optimizer.rho);
    read(o, "delta", c.optimizer.delta);
    if (o.contains("policy")) c.optimizer.policy = policy_from_string(o["policy"].get<std::string>());
    if (o.contains("base")) c.optimizer.base = base_from_string(o["base"].get<std::string>());
    read(o, "momentum", c.optimizer.momentum);
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    check_keys(d, "data", {"kind", "train", "val", "test", "synth"});
    read(d, "kind", c.data.kind);
    read(d, "train", c.data.train_path);
    read(d, "val", c.data.val_path);
    read(d, "test", c.data.test_path);
    if (d.contains("synth")) {
      const auto& s = d["synth"];
      check_keys(s, "data.synth",
                 {"classes", "steps", "spatial", "group_size", "shared",
                  "on_rate", "off_rate", "window", "train_per_class",
                  "val_per_class", "test_per_class", "c_sat", "seed"});
      SynthConfig& sc = c.data.synth;
      read(s, "classes", sc.classes);
      read(s, "steps", sc.steps);
      read(s, "spatial", sc.spatial);
      read(s, "group_size", sc.group_size);
      read(s, "shared", sc.shared);
      read(s, "on_rate", sc.on_rate);
      read(s, "off_rate", sc.off_rate);
      read(s, "window", sc.window);
      read(s, "train_per_class", sc.train_per_class);
      read(s, "val_per_class", sc.val_per_class);
      read(s, "test_per_class", sc.test_per_class);
      read(s, "c_sat", sc.c_sat);
      read(s, "seed", sc.seed);
    }
  }
  if (j.contains("robustness")) {
    const auto& r = j["robustness"];
    check_keys(r, "robustness", {"families", "severities", "seed"});
    if (r.contains("families")) {
      c.robustness.families.clear();
      for (const auto& f : r["families"])
        c.robustness.families.push_back(
            corruption_family_from_string(f.get<std::string>()));
    }
    read(r, "severities", c.robustness.severities);
    read(r, "seed", c.robustness.seed);
  }
  c.validate();
  return c;
}

}  // namespace

void RunConfig::validate() const {
  if (name.empty() || name.find(',') != std::string::npos)
    throw Error("config: name must be nonempty and comma-free");
  if (hidden.empty()) throw Error("config: at least one hidden layer required");
  for (int d : hidden)
    if (d < 1) throw Error("config: hidden widths must be positive");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error("config: alpha must lie in [0,1)");
  if (!surrogate.smooth()) throw Error("config: training surrogate must be smooth");
  surrogate.validate();
  optimizer.validate();
  if (epochs < 0) throw Error("config: epochs must be nonnegative");
  if (batch_size < 1) throw Error("config: batch_size must be positive");
  if (seeds.empty()) throw Error("config: seed list must be nonempty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw Error("config: duplicate seeds");
  if (diagnostics_every < 0 || checkpoint_every < 0)
    throw Error("config: cadences must be nonnegative");
  if (data.kind != "synth" && data.kind != "files")
    throw Error("config: data.kind must be 'synth' or 'files'");
  if (data.kind == "synth") data.synth.validate();
  for (double p : robustness.severities)
    if (!(p >= 0.0 && p <= 1.0)) throw Error("config: severities must lie in [0,1]");
  if (theorem_aligned) {
    if (surrogate.family != SurrogateFamily::kArctan)
      throw Error("config: theorem-aligned runs require the arctan surrogate");
    if (method == Method::kSast && !optimizer.theorem_aligned())
      throw Error(
          "config: theorem-aligned runs require plain SGD with an independent "
          "second minibatch");
  }
}

std::vector<int> RunConfig::dims(int input_dim) const {
  std::vector<int> d{input_dim};
  d.insert(d.end(), hidden.begin(), hidden.end());
  return d;
}

RunConfig parse_run_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(io::read_file(path));
}

std::string to_json(const RunConfig& cfg) { return config_to_json(cfg).dump(2); }

void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  ordered_json j = config_to_json(cfg);
  ordered_json parsed;
  try {
    parsed = ordered_json::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = value;
  }
  ordered_json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw FormatError("override: empty key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]))
      throw FormatError("override: unknown key '" + key + "'");
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() || !node->contains(parts.back()))
    throw FormatError("override: unknown key '" + key + "'");
  (*node)[parts.back()] = parsed;
  try {
    cfg = config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("override '" + key + "': " + e.what());
  }
}

DatasetSplits load_data(const DataSource& source) {
  if (source.kind == "synth") return synth_task(source.synth);
  if (source.kind != "files") throw Error("data: unknown source kind");
  DatasetSplits s;
  s.train = load_frames(source.train_path);
  s.val = load_frames(source.val_path);
  s.test = load_frames(source.test_path);
  return s;
}

// --- metrics log ----------------------------------------------------------

std::string metrics_csv_header() {
  return "run_id,method,seed,epoch,train_loss,val_loss,val_acc_sur,"
         "val_acc_hard,test_acc_sur,test_acc_hard,val_gap,test_gap,"
         "hat_m_theta,hat_gamma,contractive,beta_sec,beta,wall_clock,steps,"
         "passes,peak_bytes,calibration_ops,status";
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

constexpr int kWallClockColumn = 17;

}  // namespace

std::string to_csv(const MetricsRow& r) {
  std::ostringstream os;
  os << r.run_id << ',' << r.method << ',' << r.seed << ',' << r.epoch << ','
     << fmt(r.train_loss) << ',' << fmt(r.val_loss) << ',' << fmt(r.val_acc_sur)
     << ',' << fmt(r.val_acc_hard) << ',' << fmt(r.test_acc_sur) << ','
     << fmt(r.test_acc_hard) << ',' << fmt(r.val_gap) << ',' << fmt(r.test_gap)
     << ',' << fmt(r.hat_m_theta) << ',' << fmt(r.hat_gamma) << ','
     << (r.contractive ? 1 : 0) << ',' << fmt(r.beta_sec) << ',' << fmt(r.beta)
     << ',' << fmt(r.wall_clock) << ',' << r.steps << ',' << r.passes << ','
     << r.peak_bytes << ',' << r.calibration_ops << ',' << r.status;
  return os.str();
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::vector<MetricsRow> rows;
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line) || line != metrics_csv_header())
    throw FormatError("metrics: missing or unexpected header");
  int lineno = 1;
  while (std::getline(ss, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 23)
      throw FormatError("metrics: line " + std::to_string(lineno) +
                        " has " + std::to_string(f.size()) + " fields");
    try {
      MetricsRow r;
      r.run_id = f[0];
      r.method = f[1];
      r.seed = std::stoull(f[2]);
      r.epoch = std::stoi(f[3]);
      r.train_loss = std::stod(f[4]);
      r.val_loss = std::stod(f[5]);
      r.val_acc_sur = std::stod(f[6]);
      r.val_acc_hard = std::stod(f[7]);
      r.test_acc_sur = std::stod(f[8]);
      r.test_acc_hard = std::stod(f[9]);
      r.val_gap = std::stod(f[10]);
      r.test_gap = std::stod(f[11]);
      r.hat_m_theta = std::stod(f[12]);
      r.hat_gamma = std::stod(f[13]);
      r.contractive = f[14] == "1";
      r.beta_sec = std::stod(f[15]);
      r.beta = std::stod(f[16]);
      r.wall_clock = std::stod(f[17]);
      r.steps = std::stoull(f[18]);
      r.passes = std::stoull(f[19]);
      r.peak_bytes = std::stoull(f[20]);
      r.calibration_ops = std::stoull(f[21]);
      r.status = f[22];
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("metrics: malformed value on line " + std::to_string(lineno));
    }
  }
  return rows;
}

std::string strip_wall_clock(const std::string& csv) {
  std::stringstream ss(csv);
  std::string line, out;
  while (std::getline(ss, line)) {
    auto f = split(line, ',');
    if (static_cast<int>(f.size()) > kWallClockColumn)
      f.erase(f.begin() + kWallClockColumn);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) out += ',';
      out += f[i];
    }
    out += '\n';
  }
  return out;
}

// --- evaluation -------------------------------------------------------------

namespace {

std::atomic<std::size_t> g_calibration_ops{0};

double calibrated_accuracy(const NetworkParams& params, const SurrogateSpec& spec,
                           const Dataset& data, const std::vector<double>& lambdas) {
  g_calibration_ops.fetch_add(1, std::memory_order_relaxed);
  return accuracy(scale_thresholds(params, lambdas), spec.as_hard(), data);
}

}  // namespace

double evaluate(const NetworkParams& params, const SurrogateSpec& spec,
                const Dataset& data, EvalMode mode) {
  return accuracy(params, mode == EvalMode::kHard ? spec.as_hard() : spec, data);
}

std::size_t calibration_operations() {
  return g_calibration_ops.load(std::memory_order_relaxed);
}

// --- training -------------------------------------------------------------

int steps_per_epoch(std::size_t train_size, std::size_t batch_size) {
  if (batch_size == 0) throw Error("steps_per_epoch: batch size must be positive");
  return static_cast<int>(train_size / batch_size);
}

int passes_per_step(const RunConfig& cfg) {
  return cfg.method == Method::kSast ? 2 : 1;
}

int step_param_buffers(Method method) {
  // Live alongside the traces: the packed iterate w, the unpacked parameter
  // copy and the accumulating gradient. The SAST second pass additionally
  // holds the first-pass gradient, eps and w + eps.
  return method == Method::kSast ? 6 : 3;
}

namespace {

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           int epoch) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

void check_data(const DatasetSplits& d) {
  for (const Dataset* s : {&d.train, &d.val, &d.test}) {
    if (s->empty()) throw Error("data: every split must be nonempty");
    if (s->num_classes != d.train.num_classes)
      throw Error("data: splits disagree on the number of classes");
    if (s->dim() != d.train.dim() || s->steps() != d.train.steps())
      throw Error("data: splits disagree on input shape");
  }
}

std::string checkpoint_name(std::uint64_t seed, int epoch) {
  return "seed" + std::to_string(seed) + "_epoch" + std::to_string(epoch) + ".sast";
}

std::string best_name(std::uint64_t seed) {
  return "seed" + std::to_string(seed) + "_best.sast";
}

struct EpochEval {
  double val_loss, val_sur, val_hard, test_sur, test_hard;
};

EpochEval evaluate_epoch(const NetworkParams& params, const RunConfig& cfg,
                         const DatasetSplits& data) {
  EpochEval e{};
  e.val_loss = batch_loss(params, cfg.surrogate, data.val);
  const bool sur = std::count(cfg.eval_modes.begin(), cfg.eval_modes.end(),
                              EvalMode::kSurrogate) > 0;
  const bool hard = std::count(cfg.eval_modes.begin(), cfg.eval_modes.end(),
                               EvalMode::kHard) > 0;
  // Checkpoint selection always needs validation surrogate accuracy.
  e.val_sur = evaluate(params, cfg.surrogate, data.val, EvalMode::kSurrogate);
  e.test_sur = sur ? evaluate(params, cfg.surrogate, data.test, EvalMode::kSurrogate) : 0.0;
  e.val_hard = hard ? evaluate(params, cfg.surrogate, data.val, EvalMode::kHard) : 0.0;
  e.test_hard = hard ? evaluate(params, cfg.surrogate, data.test, EvalMode::kHard) : 0.0;
  return e;
}

}  // namespace

SeedRun train_seed(const RunConfig& cfg, const DatasetSplits& data,
                   std::uint64_t seed) {
  cfg.validate();
  check_data(data);
  const Dataset& train_set = data.train;
  const int steps = train_set.steps();
  const double r_x = train_set.input_radius();

  SeedRun run;
  run.seed = seed;
  NetworkParams params = initialize_network(cfg.dims(train_set.dim()),
                                            train_set.num_classes, cfg.alpha,
                                            cfg.init, seed);
  const ParamLayout layout(params, cfg.groups);
  Optimizer opt(cfg.optimizer);
  const int nb = steps_per_epoch(train_set.size(), cfg.batch_size);
  if (nb < 1) throw Error("train: training set smaller than one batch");
  const bool independent = cfg.method == Method::kSast &&
                           cfg.optimizer.policy == MinibatchPolicy::kIndependentSecond;
  if (independent && nb < 2)
    throw Error("train: an independent second minibatch needs two batches per epoch");
  const int pps = passes_per_step(cfg);
  run.passes_per_step = pps;
  const std::size_t peak = peak_bytes_estimate(params, cfg.batch_size, steps,
                                               step_param_buffers(cfg.method));
  const double b1 = derivative_bounds(cfg.surrogate).b1;
  if (cfg.theorem_aligned) {
    if (!(params.alpha + extract_bounds(params).m_theta * b1 < 1.0))
      throw Error("train: theorem-aligned run is not contractive at initialization");
  }

  fs::path ckpt_dir;
  if (!cfg.output_dir.empty()) {
    ckpt_dir = fs::path(cfg.output_dir) / "ckpt";
    fs::create_directories(ckpt_dir);
  }

  auto make_row = [&](int epoch, double train_loss, double wall) {
    MetricsRow r;
    r.run_id = cfg.name;
    r.method = to_string(cfg.method);
    r.seed = seed;
    r.epoch = epoch;
    r.train_loss = train_loss;
    const std::size_t ops_before = calibration_operations();
    const EpochEval e = evaluate_epoch(params, cfg, data);
    r.calibration_ops = calibration_operations() - ops_before;
    if (r.calibration_ops != 0)
      throw Error("train: calibration was invoked during default evaluation");
    r.val_loss = e.val_loss;
    r.val_acc_sur = e.val_sur;
    r.val_acc_hard = e.val_hard;
    r.test_acc_sur = e.test_sur;
    r.test_acc_hard = e.test_hard;
    r.val_gap = e.val_sur - e.val_hard;
    r.test_gap = e.test_sur - e.test_hard;
    const NetworkParams one[] = {params};
    const ContractionDiagnostic cd = observed_contraction(one, b1);
    r.hat_m_theta = cd.hat_m_theta;
    r.hat_gamma = cd.hat_gamma;
    r.contractive = cd.hat_gamma < 1.0;
    if (cfg.diagnostics_every > 0 && epoch % cfg.diagnostics_every == 0) {
      std::vector<std::size_t> all(train_set.size());
      std::iota(all.begin(), all.end(), 0);
      const Objective obj = make_objective(params, cfg.surrogate, train_set, all, layout);
      const Vector w = layout.pack(params);
      std::vector<double> radii;
      for (double s : kDefaultSecantScales) radii.push_back(s * w.norm());
      r.beta_sec = secant_smoothness(obj, w, radii, 4, seed).beta_sec;
      r.beta = ball_beta(params, cfg.surrogate, r_x, steps, radii.back());
    }
    r.wall_clock = wall;
    r.steps = run.steps;
    r.passes = run.passes;
    r.peak_bytes = peak;
    return r;
  };

  auto save_ckpt = [&](int epoch) {
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      run.checkpoints.emplace_back(epoch, params);
      if (!ckpt_dir.empty())
        save_checkpoint((ckpt_dir / checkpoint_name(seed, epoch)).string(),
                        params, cfg.surrogate);
    }
  };

  run.rows.push_back(make_row(0, batch_loss(params, cfg.surrogate, train_set), 0.0));
  run.best = params;
  run.selected = run.rows.back();
  save_ckpt(0);

  const std::size_t b = cfg.batch_size;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto perm = epoch_permutation(train_set.size(), seed, epoch);
    double loss_sum = 0.0;
    int taken = 0;
    bool budget_hit = false;
    const auto start = std::chrono::steady_clock::now();
    try {
      for (int k = 0; k < nb; ++k) {
        if (cfg.max_passes > 0 && run.passes + pps > cfg.max_passes) {
          budget_hit = true;
          break;
        }
        // The descent batch follows the same sequence for every method, so
        // SAST at rho = 0 retraces the baseline.
        const std::span<const std::size_t> descent(perm.data() + k * b, b);
        StepReport rep;
        if (cfg.method == Method::kBaseline) {
          rep = baseline_step(params, cfg.surrogate, train_set, descent, opt, layout);
        } else {
          const std::span<const std::size_t> ascent =
              independent
                  ? std::span<const std::size_t>(perm.data() + ((k + 1) % nb) * b, b)
                  : descent;
          rep = sast_step(params, cfg.surrogate, train_set, ascent, descent, opt, layout);
        }
        if (!std::isfinite(rep.loss_second_pass))
          throw NonFiniteError("train: non-finite loss", 0, 0);
        loss_sum += rep.loss_second_pass;
        ++taken;
        ++run.steps;
        run.passes += pps;
      }
    } catch (const Error& e) {
      run.failed = true;
      run.failure = std::string("epoch ") + std::to_string(epoch) + ": " + e.what();
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (run.failed) {
      MetricsRow r;
      r.run_id = cfg.name;
      r.method = to_string(cfg.method);
      r.seed = seed;
      r.epoch = epoch;
      r.train_loss = std::numeric_limits<double>::quiet_NaN();
      r.wall_clock = wall;
      r.steps = run.steps;
      r.passes = run.passes;
      r.peak_bytes = peak;
      r.status = "failed";
      run.rows.push_back(r);
      break;
    }
    if (taken == 0) break;
    run.rows.push_back(make_row(epoch, loss_sum / taken, wall));
    save_ckpt(epoch);
    if (run.rows.back().val_acc_sur > run.selected.val_acc_sur) {
      run.selected = run.rows.back();
      run.best = params;
    }
    if (budget_hit) break;
  }
  run.best_epoch = run.selected.epoch;
  run.final_params = params;
  if (run.passes != run.steps * static_cast<std::size_t>(pps))
    throw Error("train: pass accounting mismatch");
  if (!ckpt_dir.empty())
    save_checkpoint((ckpt_dir / best_name(seed)).string(), run.best, cfg.surrogate);
  return run;
}

namespace {

ordered_json row_json(const MetricsRow& r) {
  return {{"epoch", r.epoch},
          {"val_acc_sur", r.val_acc_sur},
          {"val_acc_hard", r.val_acc_hard},
          {"test_acc_sur", r.test_acc_sur},
          {"test_acc_hard", r.test_acc_hard},
          {"test_gap", r.test_gap},
          {"hat_gamma", r.hat_gamma},
          {"passes", r.passes}};
}

void write_outputs(const TrainResult& res) {
  const fs::path dir(res.config.output_dir);
  fs::create_directories(dir);
  io::write_file((dir / "config.json").string(), to_json(res.config) + "\n");
  std::string csv = metrics_csv_header() + "\n";
  ordered_json summary;
  summary["name"] = res.config.name;
  summary["method"] = to_string(res.config.method);
  summary["rho"] = res.config.optimizer.rho;
  summary["selection"] = "best validation surrogate accuracy";
  summary["memory_estimate"] =
      "bytes of inputs, traces and reverse-sweep buffers of one batched pass "
      "plus parameter-sized optimizer buffers";
  ordered_json seeds = ordered_json::array();
  for (const SeedRun& r : res.runs) {
    for (const MetricsRow& row : r.rows) csv += to_csv(row) + "\n";
    ordered_json s;
    s["seed"] = r.seed;
    s["status"] = r.failed ? "failed" : "ok";
    if (r.failed) s["failure"] = r.failure;
    s["best_epoch"] = r.best_epoch;
    s["steps"] = r.steps;
    s["passes"] = r.passes;
    s["passes_per_step"] = r.passes_per_step;
    s["selected"] = row_json(r.selected);
    seeds.push_back(s);
  }
  summary["seeds"] = seeds;
  io::write_file((dir / "metrics.csv").string(), csv);
  io::write_file((dir / "summary.json").string(), summary.dump(2) + "\n");
}

}  // namespace

TrainResult train(const RunConfig& cfg, const DatasetSplits& data) {
  cfg.validate();
  TrainResult res;
  res.config = cfg;
  for (std::uint64_t seed : cfg.seeds) res.runs.push_back(train_seed(cfg, data, seed));
  if (!cfg.output_dir.empty()) write_outputs(res);
  return res;
}

TrainResult train(const RunConfig& cfg) {
  cfg.validate();
  return train(cfg, load_data(cfg.data));
}

// --- robustness -------------------------------------------------------------

std::vector<RobustnessCurve> robustness_sweep(const std::vector<NetworkParams>& models,
                                              const SurrogateSpec& spec,
                                              const Dataset& data,
                                              const RobustnessConfig& cfg,
                                              const std::vector<EvalMode>& modes) {
  std::vector<RobustnessCurve> curves;
  for (CorruptionFamily fam : cfg.families) {
    const std::size_t first = curves.size();
    for (std::size_t m = 0; m < models.size(); ++m)
      for (EvalMode mode : modes) {
        RobustnessCurve c;
        c.model = m;
        c.mode = mode;
        c.family = fam;
        curves.push_back(c);
      }
    for (double p : cfg.severities) {
      CorruptionConfig cc;
      cc.family = fam;
      cc.severity = p;
      cc.seed = cfg.seed + 1000003ull * static_cast<std::uint64_t>(fam);
      const Dataset corrupted = corrupt_dataset(data, cc);
      for (std::size_t i = first; i < curves.size(); ++i)
        curves[i].points.push_back(
            {p, evaluate(models[curves[i].model], spec, corrupted, curves[i].mode)});
    }
  }
  for (auto& c : curves) {
    std::vector<double> x, y;
    for (const auto& pt : c.points) {
      x.push_back(pt.severity);
      y.push_back(pt.accuracy);
    }
    if (!y.empty()) c.mean = summarize(y).mean;
    c.auc = x.size() >= 2 ? trapezoid_area(x, y) : 0.0;
  }
  return curves;
}

// --- calibration ------------------------------------------------------------

std::vector<double> calibration_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(0.5 + 0.1 * i);
  return g;
}

namespace {

// Prefers higher accuracy, then the multiplier closest to 1, then the smaller.
bool better(double acc, double lam, double best_acc, double best_lam) {
  if (acc != best_acc) return acc > best_acc;
  const double a = std::abs(lam - 1.0), b = std::abs(best_lam - 1.0);
  if (a != b) return a < b;
  return lam < best_lam;
}

}  // namespace

CalibrationResult calibrate_thresholds(const NetworkParams& params,
                                       const SurrogateSpec& spec,
                                       const Dataset& val, const Dataset& test,
                                       CalibrationMode mode) {
  const std::size_t ops_before = calibration_operations();
  const std::size_t layers = params.layers.size();
  const auto grid = calibration_grid();
  CalibrationResult res;
  res.mode = mode;
  res.val_hard_uncalibrated = evaluate(params, spec, val, EvalMode::kHard);

  double best_lam = 1.0, best_acc = -1.0;
  for (double lam : grid) {
    const double acc =
        calibrated_accuracy(params, spec, val, std::vector<double>(layers, lam));
    if (best_acc < 0.0 || better(acc, lam, best_acc, best_lam)) {
      best_acc = acc;
      best_lam = lam;
    }
  }
  res.lambdas.assign(layers, best_lam);
  res.val_hard_calibrated = best_acc;

  if (mode == CalibrationMode::kPerLayer && layers > 1) {
    constexpr int kMaxSweeps = 10;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
      bool changed = false;
      for (std::size_t l = 0; l < layers; ++l) {
        for (double lam : grid) {
          if (lam == res.lambdas[l]) continue;
          auto trial = res.lambdas;
          trial[l] = lam;
          const double acc = calibrated_accuracy(params, spec, val, trial);
          if (acc > res.val_hard_calibrated) {
            res.val_hard_calibrated = acc;
            res.lambdas = trial;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
  }
  res.test_hard_calibrated = calibrated_accuracy(params, spec, test, res.lambdas);
  res.evaluations = calibration_operations() - ops_before;
  return res;
}

// --- compute-matched control -----------------------------------------------

std::vector<MatchedPair> compute_matched_control(const RunConfig& sast_cfg,
                                                 const TrainResult& sast_run,
                                                 const DatasetSplits& data) {
  if (sast_cfg.method != Method::kSast)
    throw Error("match-compute: reference run must use SAST");
  const int nb = steps_per_epoch(data.train.size(), sast_cfg.batch_size);
  std::vector<MatchedPair> pairs;
  for (const SeedRun& s : sast_run.runs) {
    RunConfig base = sast_cfg;
    base.method = Method::kBaseline;
    base.name = sast_cfg.name + "-matched";
    base.max_passes = s.passes;
    base.epochs = static_cast<int>((s.passes + nb - 1) / nb);
    base.output_dir.clear();
    base.seeds = {s.seed};
    const SeedRun m = train_seed(base, data, s.seed);
    MatchedPair p;
    p.seed = s.seed;
    p.sast = s.selected;
    p.matched = m.selected;
    p.sast_passes = s.passes;
    p.matched_passes = m.passes;
    pairs.push_back(p);
  }
  return pairs;
}

// --- overhead ---------------------------------------------------------------

OverheadResult measure_overhead(const RunConfig& cfg, const DatasetSplits& data,
                                int timed_epochs) {
  if (timed_epochs < 3) throw Error("overhead: at least three timed epochs required");
  OverheadResult out;
  std::vector<double> times[2];
  std::size_t peaks[2] = {0, 0};
  // Alternating rounds keep slow drift in machine load from favoring either
  // method.
  constexpr int kOrder[] = {0, 1, 1, 0, 0, 1};
  for (int m : kOrder) {
    RunConfig c = cfg;
    c.method = m == 0 ? Method::kBaseline : Method::kSast;
    c.epochs = 1 + timed_epochs;
    c.diagnostics_every = 0;
    c.checkpoint_every = 0;
    c.output_dir.clear();
    c.max_passes = 0;
    const SeedRun r = train_seed(c, data, cfg.seeds.front());
    if (r.failed) throw Error("overhead: run failed: " + r.failure);
    for (const MetricsRow& row : r.rows)
      if (row.epoch >= 2) times[m].push_back(row.wall_clock);
    peaks[m] = std::max(peaks[m], r.rows.back().peak_bytes);
  }
  out.baseline_epoch_seconds = summarize(times[0]);
  out.sast_epoch_seconds = summarize(times[1]);
  out.time_factor = out.sast_epoch_seconds.mean / out.baseline_epoch_seconds.mean;
  out.baseline_peak_bytes = peaks[0];
  out.sast_peak_bytes = peaks[1];
  out.memory_factor = static_cast<double>(peaks[1]) / static_cast<double>(peaks[0]);
  return out;
}

// --- report -------------------------------------------------------------------

namespace {

std::string f4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

struct SeedLine {
  std::string run, method;
  std::uint64_t seed;
  int best_epoch;
  double sur, hard, gap;
  std::size_t passes;
};

}  // namespace

ReportOutput report(const std::vector<std::string>& run_dirs,
                    const std::vector<ExternalRow>& external) {
  ReportOutput out;
  ordered_json j;
  j["runs"] = ordered_json::array();
  std::ostringstream seeds_txt, agg_txt, table_txt, diag_txt;
  seeds_txt << "run,method,seed,best_epoch,test_acc_sur,test_acc_hard,test_gap,passes\n";
  table_txt << "method | surrogate acc | hard acc | gap\n";
  diag_txt << "run,seed,final_epoch,hat_gamma,last_beta_sec,last_beta\n";

  for (const std::string& d : run_dirs) {
    const fs::path dir(d);
    ordered_json summary;
    try {
      summary = ordered_json::parse(io::read_file((dir / "summary.json").string()));
    } catch (const std::exception& e) {
      out.gaps.push_back(d + ": summary.json unavailable");
      continue;
    }
    std::vector<MetricsRow> rows;
    try {
      rows = parse_metrics_csv(io::read_file((dir / "metrics.csv").string()));
    } catch (const std::exception& e) {
      out.gaps.push_back(d + ": metrics.csv unavailable");
    }
    const std::string name = summary.value("name", dir.filename().string());
    const std::string method = summary.value("method", "?");
    std::vector<double> sur, hard, gap;
    ordered_json run_j;
    run_j["name"] = name;
    run_j["method"] = method;
    run_j["seeds"] = ordered_json::array();
    for (const auto& s : summary.value("seeds", ordered_json::array())) {
      if (s.value("status", "ok") != "ok") {
        out.gaps.push_back(name + ": seed " + std::to_string(s.value("seed", 0ull)) +
                           " failed");
        continue;
      }
      const auto& sel = s["selected"];
      SeedLine l{name, method, s["seed"].get<std::uint64_t>(),
                 s["best_epoch"].get<int>(), sel["test_acc_sur"].get<double>(),
                 sel["test_acc_hard"].get<double>(), sel["test_gap"].get<double>(),
                 s["passes"].get<std::size_t>()};
      seeds_txt << l.run << ',' << l.method << ',' << l.seed << ',' << l.best_epoch
                << ',' << f4(l.sur) << ',' << f4(l.hard) << ',' << f4(l.gap) << ','
                << l.passes << '\n';
      sur.push_back(l.sur);
      hard.push_back(l.hard);
      gap.push_back(l.gap);
      run_j["seeds"].push_back({{"seed", l.seed},
                                {"best_epoch", l.best_epoch},
                                {"test_acc_sur", l.sur},
                                {"test_acc_hard", l.hard},
                                {"test_gap", l.gap},
                                {"passes", l.passes}});
      std::uint64_t seed = l.seed;
      const MetricsRow* last = nullptr;
      const MetricsRow* last_beta = nullptr;
      for (const auto& r : rows)
        if (r.seed == seed && r.status == "ok") {
          last = &r;
          if (r.beta_sec >= 0.0) last_beta = &r;
        }
      if (last)
        diag_txt << name << ',' << seed << ',' << last->epoch << ','
                 << f4(last->hat_gamma) << ','
                 << (last_beta ? fmt(last_beta->beta_sec) : "-") << ','
                 << (last_beta ? fmt(last_beta->beta) : "-") << '\n';
    }
    if (sur.empty()) {
      out.gaps.push_back(name + ": no completed seeds");
      j["runs"].push_back(run_j);
      continue;
    }
    auto agg = [&](const char* label, const std::vector<double>& v) {
      const Summary s = summarize(v);
      agg_txt << name << ' ' << label << ": mean " << f4(s.mean) << " +/- "
              << f4(s.std) << ", median " << f4(s.median) << " [" << f4(s.q1)
              << ", " << f4(s.q3) << "], n=" << s.count << '\n';
      run_j[label] = {{"mean", s.mean}, {"std", s.std}, {"median", s.median},
                      {"q1", s.q1}, {"q3", s.q3}, {"count", s.count}};
      return s;
    };
    const Summary ss = agg("test_acc_sur", sur);
    const Summary sh = agg("test_acc_hard", hard);
    const Summary sg = agg("test_gap", gap);
    std::string label = method == "sast"
                            ? "SAST (rho=" + f4(summary.value("rho", 0.0)).substr(0, 4) + ")"
                            : "Baseline surrogate training";
    table_txt << label << " [" << name << "] | " << f4(ss.mean) << " | "
              << f4(sh.mean) << " | " << f4(sg.mean) << '\n';
    j["runs"].push_back(run_j);
  }
  j["external"] = ordered_json::array();
  for (const ExternalRow& e : external) {
    const double g = e.acc_sur - e.acc_hard;
    table_txt << e.method << " [external] | " << f4(e.acc_sur) << " | "
              << f4(e.acc_hard) << " | " << f4(g) << '\n';
    j["external"].push_back(
        {{"method", e.method}, {"acc_sur", e.acc_sur}, {"acc_hard", e.acc_hard}, {"gap", g}});
  }
  j["gaps"] = out.gaps;
  std::ostringstream text;
  text << "== per-seed (selected checkpoint) ==\n" << seeds_txt.str()
       << "\n== aggregates ==\n" << agg_txt.str()
       << "\n== transfer gap ==\n" << table_txt.str()
       << "\n== diagnostics ==\n" << diag_txt.str();
  if (!out.gaps.empty()) {
    text << "\n== missing ==\n";
    for (const auto& g : out.gaps) text << g << '\n';
  }
  out.text = text.str();
  out.json = j.dump(2);
  return out;
}

}  // namespace sast
