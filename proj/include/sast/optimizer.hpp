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
#include <functional>
#include <span>
#include <vector>

#include "sast/grad.hpp"
#include "sast/theory.hpp"

namespace sast {

enum class MinibatchPolicy { kIndependentSecond, kReused };
enum class BaseOptimizer { kPlainSgd, kMomentum };

struct OptimizerConfig {
  double eta = 0.1;
  double rho = 0.0;
  double delta = 1e-12;
  MinibatchPolicy policy = MinibatchPolicy::kIndependentSecond;
  BaseOptimizer base = BaseOptimizer::kPlainSgd;
  double momentum = 0.9;

  void validate() const;
  // Plain SGD with an independent second minibatch.
  bool theorem_aligned() const {
    return base == BaseOptimizer::kPlainSgd &&
           policy == MinibatchPolicy::kIndependentSecond;
  }
};

struct StepReport {
  double loss_first_pass = 0.0;
  double grad_norm_first_pass = 0.0;
  double epsilon_norm = 0.0;
  double loss_second_pass = 0.0;
  double grad_norm_second_pass = 0.0;
  int pass_count_delta = 0;
  // sast_step called with rho = 0; the step is a baseline step in disguise.
  bool degenerate_radius = false;
};

struct LossGrad {
  double loss;
  Vector grad;
};
using Objective = std::function<LossGrad(const Vector&)>;

// rho * g / (||g|| + delta); zero for g = 0.
Vector sam_perturbation(const Vector& g, double rho, double delta);

// Base optimizer O(w, g) plus the two update rules on a flat parameter vector.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg);

  const OptimizerConfig& config() const { return cfg_; }

  // w <- O(w, g)
  void apply(Vector& w, const Vector& g);

  // Ascent on first at w, descent direction from second at w + eps.
  StepReport sam_step(Vector& w, const Objective& first, const Objective& second);
  StepReport baseline_step(Vector& w, const Objective& objective);

  void reset_state() { velocity_.resize(0); }

 private:
  OptimizerConfig cfg_;
  Vector velocity_;
};

// Mean cross-entropy and its gradient over the trainable vector. Every call
// runs a fresh forward pass from zero state.
Objective make_objective(const NetworkParams& shape, const SurrogateSpec& spec,
                         const Batch& batch, const ParamLayout& layout);

// Same over data[idx]; idx storage must outlive the objective.
Objective make_objective(const NetworkParams& shape, const SurrogateSpec& spec,
                         const Dataset& data, std::span<const std::size_t> idx,
                         const ParamLayout& layout);

StepReport sast_step(NetworkParams& params, const SurrogateSpec& spec,
                     const Dataset& data, std::span<const std::size_t> first,
                     std::span<const std::size_t> second, Optimizer& opt,
                     const ParamLayout& layout);
StepReport baseline_step(NetworkParams& params, const SurrogateSpec& spec,
                         const Dataset& data, std::span<const std::size_t> idx,
                         Optimizer& opt, const ParamLayout& layout);

StepReport sast_step(NetworkParams& params, const SurrogateSpec& spec,
                     const Batch& first, const Batch& second, Optimizer& opt,
                     const ParamLayout& layout);
StepReport baseline_step(NetworkParams& params, const SurrogateSpec& spec,
                         const Batch& batch, Optimizer& opt,
                         const ParamLayout& layout);

// Finite-sum objective (1/n) sum_i l_i(w), evaluated on index subsets.
struct FiniteSumProblem {
  std::size_t num_samples = 0;
  std::function<LossGrad(const Vector&, std::span<const std::size_t>)> eval;
  // Per-sample gradients at w (used for the variance estimate).
  std::function<std::vector<Vector>(const Vector&)> sample_grads;
};

FiniteSumProblem make_problem(const NetworkParams& shape,
                              const SurrogateSpec& spec, const Dataset& data,
                              const ParamLayout& layout);

struct ConvergenceOptions {
  int steps = 100;                  // K
  std::size_t batch_size = 0;       // 0: full batch
  std::vector<std::uint64_t> seeds{1};
  double beta = 0.0;                // smoothness constant for the bound
};

struct ConvergenceResult {
  double lhs = 0.0;      // mean over seeds of (1/K) sum_k ||grad L(w_k)||^2
  ConvergenceBound rhs{};
  double loss0 = 0.0;
  double loss_star = 0.0;  // best full-batch loss observed over all runs
  double sigma2 = 0.0;     // largest minibatch-variance estimate seen
  double beta = 0.0;
  double eta = 0.0;
  bool step_size_ok = false;  // eta <= 1/(4 beta)
  bool theorem_aligned = false;
  bool holds = false;
  std::vector<double> per_seed_lhs;
  // Largest ||w - w0|| over every iterate and perturbed point visited.
  double max_excursion = 0.0;
};

// Minibatch variance E||g_B - g||^2 for uniform sampling of b out of n
// without replacement, from per-sample gradients.
double minibatch_variance(const std::vector<Vector>& sample_grads,
                          std::size_t batch_size);

// Runs SAST for K steps from w0 per seed and evaluates both sides of the
// nonconvex convergence bound. Full batch when batch_size is 0 or >= n.
ConvergenceResult convergence_trial(const FiniteSumProblem& problem,
                                    const Vector& w0,
                                    const OptimizerConfig& cfg,
                                    const ConvergenceOptions& opts);

}  // namespace sast
