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

#include <cstdint>
#include <span>
#include <vector>

#include "sast/grad.hpp"
#include "sast/optimizer.hpp"

namespace sast {

// Fraction of samples whose argmax logit equals the label. Ties resolve to
// the lowest class index.
double accuracy(const NetworkParams& params, const SurrogateSpec& spec,
                const Dataset& data);

struct ContractionDiagnostic {
  double hat_m_theta = 0.0;
  double hat_gamma = 0.0;
};

// Observed threshold bound over checkpoints and layers, and the implied
// contraction factor alpha + hat_M_theta * B1 (largest alpha if it differs).
ContractionDiagnostic observed_contraction(
    std::span<const NetworkParams> checkpoints, double b1);

// Relative perturbation radii used when none are given.
inline const std::vector<double> kDefaultSecantScales{1e-3, 1e-2, 1e-1};

struct SecantResult {
  double beta_sec = 0.0;
  std::vector<double> per_radius;  // max ratio for each radius
  std::uint64_t seed = 0;
};

// max_j ||grad(w + d_j) - grad(w)|| / ||d_j|| with m isotropic probes on the
// sphere of each radius. Each radius has its own random stream, so the probe
// set for m is a prefix of the set for any larger m.
SecantResult secant_smoothness(const Objective& objective, const Vector& w,
                               std::span<const double> radii, int probes,
                               std::uint64_t seed);

struct SamGapResult {
  double gap = 0.0;            // max over all probes of L(w+e) - L(w)
  double gradient_probe = 0.0; // along rho * g / ||g||
  double random_mean = 0.0;    // mean over the random sphere probes
  double random_max = 0.0;
};

inline constexpr int kSamGapRandomProbes = 64;

// Lower-bound estimate of the SAM gap max_{||e|| = rho} L(w+e) - L(w).
SamGapResult sam_gap(const Objective& objective, const Vector& w, double rho,
                     int random_probes, std::uint64_t seed);

struct TransferGap {
  double acc_sur = 0.0;
  double acc_hard = 0.0;
  double gap = 0.0;
};

// Two full evaluations with identical parameters differing only in the
// nonlinearity. The hard slot defaults to H.
TransferGap transfer_gap(const NetworkParams& params, const SurrogateSpec& spec,
                         const Dataset& data);
TransferGap transfer_gap(const NetworkParams& params,
                         const SurrogateSpec& first_mode,
                         const SurrogateSpec& second_mode, const Dataset& data);

struct Jacobians {
  Matrix jw;  // C x p over the trainable vector of the layout
  Matrix jx;  // C x (d_0 T), frame-major flattening of the input
  Vector logits;
};

// One reverse sweep per logit.
Jacobians logit_jacobians(const NetworkParams& params, const SurrogateSpec& spec,
                          const FrameSequence& x, const ParamLayout& layout);

// sqrt(lambda_min(J J^T)) for a C x p matrix, via the C x C Gram matrix.
double gram_min_singular(const Matrix& jacobian);
double gram_min_singular(const NetworkParams& params, const SurrogateSpec& spec,
                         const FrameSequence& x, const ParamLayout& layout);

inline constexpr double kConditioningTol = 1e-6;
inline constexpr double kMechanismSlack = 1e-9;

struct MechanismRecord {
  double param_grad_norm = 0.0;  // ||grad_w l||
  double input_grad_norm = 0.0;  // ||grad_x l||
  double sigma_min = 0.0;        // sigma_min(J_w)
  double jw_norm = 0.0;          // ||J_w||_2
  double jx_norm = 0.0;          // ||J_x||_2
  double bound = 0.0;            // ||J_x|| / sigma_min * ||grad_w l||
  bool conditioned = false;      // sigma_min > tol * ||J_w||
  bool satisfied = true;         // only meaningful when conditioned
};

// Checks ||grad_x l|| <= ||J_x|| / sigma_min(J_w) * ||grad_w l|| for one
// labeled sample.
MechanismRecord mechanism_check(const NetworkParams& params,
                                const SurrogateSpec& spec,
                                const FrameSequence& x, int label,
                                const ParamLayout& layout,
                                double rel_tol = kConditioningTol);

// One row of the per-checkpoint diagnostics table.
struct DiagnosticsReport {
  double hat_m_theta = 0.0;
  double hat_gamma = 0.0;
  double beta_sec = 0.0;
  double sam_gap_delta_rho = 0.0;
  double transfer_gap = 0.0;
  double mean_param_grad_norm = 0.0;
  double mean_input_grad_norm = 0.0;
  double sigma_min_gram = 0.0;  // median over held-out samples
  int mechanism_violations = 0;
  int unconditioned = 0;
};

struct DiagnosticsOptions {
  double rho = 0.05;
  std::vector<double> secant_scales = kDefaultSecantScales;
  int secant_probes = 4;
  int sam_probes = kSamGapRandomProbes;
  std::size_t max_samples = 64;  // held-out samples used for per-sample metrics
  std::uint64_t seed = 7;
};

DiagnosticsReport diagnose(const NetworkParams& params, const SurrogateSpec& spec,
                           const Dataset& train, const Dataset& heldout,
                           const ParamLayout& layout,
                           const DiagnosticsOptions& opts);

}  // namespace sast
