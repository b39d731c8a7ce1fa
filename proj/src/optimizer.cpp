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

#include "sast/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sast {

void OptimizerConfig::validate() const {
  if (!(eta > 0.0)) throw Error("optimizer: eta must be positive");
  if (!(rho >= 0.0)) throw Error("optimizer: rho must be nonnegative");
  if (!(delta > 0.0)) throw Error("optimizer: delta must be positive");
  if (base == BaseOptimizer::kMomentum && !(momentum >= 0.0 && momentum < 1.0))
    throw Error("optimizer: momentum must lie in [0,1)");
}

Vector sam_perturbation(const Vector& g, double rho, double delta) {
  const double n = g.norm();
  if (n == 0.0) return Vector::Zero(g.size());
  return (rho / (n + delta)) * g;
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Optimizer::apply(Vector& w, const Vector& g) {
  switch (cfg_.base) {
    case BaseOptimizer::kPlainSgd:
      w -= cfg_.eta * g;
      return;
    case BaseOptimizer::kMomentum:
      if (velocity_.size() != g.size()) velocity_ = Vector::Zero(g.size());
      velocity_ = cfg_.momentum * velocity_ + g;
      w -= cfg_.eta * velocity_;
      return;
  }
}

StepReport Optimizer::sam_step(Vector& w, const Objective& first,
                               const Objective& second) {
  StepReport r;
  r.degenerate_radius = cfg_.rho == 0.0;
  const LossGrad a = first(w);
  const Vector eps = sam_perturbation(a.grad, cfg_.rho, cfg_.delta);
  const LossGrad b = second(w + eps);
  r.loss_first_pass = a.loss;
  r.grad_norm_first_pass = a.grad.norm();
  r.epsilon_norm = eps.norm();
  r.loss_second_pass = b.loss;
  r.grad_norm_second_pass = b.grad.norm();
  r.pass_count_delta = 2;
  apply(w, b.grad);
  return r;
}

StepReport Optimizer::baseline_step(Vector& w, const Objective& objective) {
  StepReport r;
  const LossGrad a = objective(w);
  r.loss_first_pass = a.loss;
  r.grad_norm_first_pass = a.grad.norm();
  r.loss_second_pass = a.loss;
  r.grad_norm_second_pass = r.grad_norm_first_pass;
  r.pass_count_delta = 1;
  apply(w, a.grad);
  return r;
}

Objective make_objective(const NetworkParams& shape, const SurrogateSpec& spec,
                         const Batch& batch, const ParamLayout& layout) {
  return [shape, spec, &batch, &layout](const Vector& w) {
    NetworkParams p = shape;
    layout.unpack(w, p);
    const GradientBundle gb = backward(p, spec, batch);
    return LossGrad{gb.loss, layout.pack(gb.d_params)};
  };
}

Objective make_objective(const NetworkParams& shape, const SurrogateSpec& spec,
                         const Dataset& data, std::span<const std::size_t> idx,
                         const ParamLayout& layout) {
  return [shape, spec, &data, idx, &layout](const Vector& w) {
    NetworkParams p = shape;
    layout.unpack(w, p);
    const GradientBundle gb = backward(p, spec, data, idx);
    return LossGrad{gb.loss, layout.pack(gb.d_params)};
  };
}

StepReport sast_step(NetworkParams& params, const SurrogateSpec& spec,
                     const Dataset& data, std::span<const std::size_t> first,
                     std::span<const std::size_t> second, Optimizer& opt,
                     const ParamLayout& layout) {
  Vector w = layout.pack(params);
  const Objective f1 = make_objective(params, spec, data, first, layout);
  const bool reuse = opt.config().policy == MinibatchPolicy::kReused;
  const Objective f2 =
      reuse ? f1 : make_objective(params, spec, data, second, layout);
  StepReport r = opt.sam_step(w, f1, f2);
  layout.unpack(w, params);
  return r;
}

StepReport baseline_step(NetworkParams& params, const SurrogateSpec& spec,
                         const Dataset& data, std::span<const std::size_t> idx,
                         Optimizer& opt, const ParamLayout& layout) {
  Vector w = layout.pack(params);
  StepReport r =
      opt.baseline_step(w, make_objective(params, spec, data, idx, layout));
  layout.unpack(w, params);
  return r;
}

StepReport sast_step(NetworkParams& params, const SurrogateSpec& spec,
                     const Batch& first, const Batch& second, Optimizer& opt,
                     const ParamLayout& layout) {
  Vector w = layout.pack(params);
  const Objective f1 = make_objective(params, spec, first, layout);
  const bool reuse = opt.config().policy == MinibatchPolicy::kReused;
  const Objective f2 =
      reuse ? f1 : make_objective(params, spec, second, layout);
  StepReport r = opt.sam_step(w, f1, f2);
  layout.unpack(w, params);
  return r;
}

StepReport baseline_step(NetworkParams& params, const SurrogateSpec& spec,
                         const Batch& batch, Optimizer& opt,
                         const ParamLayout& layout) {
  Vector w = layout.pack(params);
  StepReport r = opt.baseline_step(w, make_objective(params, spec, batch, layout));
  layout.unpack(w, params);
  return r;
}

FiniteSumProblem make_problem(const NetworkParams& shape,
                              const SurrogateSpec& spec, const Dataset& data,
                              const ParamLayout& layout) {
  FiniteSumProblem prob;
  prob.num_samples = data.size();
  prob.eval = [shape, spec, &data, &layout](const Vector& w,
                                            std::span<const std::size_t> idx) {
    NetworkParams p = shape;
    layout.unpack(w, p);
    const GradientBundle gb = backward(p, spec, data, idx);
    return LossGrad{gb.loss, layout.pack(gb.d_params)};
  };
  prob.sample_grads = [shape, spec, &data, &layout](const Vector& w) {
    NetworkParams p = shape;
    layout.unpack(w, p);
    std::vector<Vector> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const StateTrace tr = forward(p, spec, data.inputs[i]);
      const CrossEntropy ce = cross_entropy(tr.logits, data.labels[i]);
      out.push_back(layout.pack(backprop(p, spec, data.inputs[i], tr, ce.grad).params));
    }
    return out;
  };
  return prob;
}

double minibatch_variance(const std::vector<Vector>& sample_grads,
                          std::size_t batch_size) {
  const std::size_t n = sample_grads.size();
  if (n <= 1 || batch_size >= n) return 0.0;
  if (batch_size == 0) throw Error("minibatch_variance: batch size must be positive");
  Vector mean = Vector::Zero(sample_grads.front().size());
  for (const auto& g : sample_grads) mean += g;
  mean /= static_cast<double>(n);
  double spread = 0.0;
  for (const auto& g : sample_grads) spread += (g - mean).squaredNorm();
  spread /= static_cast<double>(n);
  const double b = static_cast<double>(batch_size);
  const double nn = static_cast<double>(n);
  return (nn - b) / (b * (nn - 1.0)) * spread;
}

namespace {

// Hands out disjoint index blocks from shuffled epoch permutations.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed) : rng_(seed), perm_(n) {
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    pos_ = n;  // force a shuffle on first draw
  }

  // Returns true when a new epoch started before this draw.
  bool draw(std::size_t count, std::vector<std::size_t>& out) {
    bool fresh = false;
    if (pos_ + count > perm_.size()) {
      std::shuffle(perm_.begin(), perm_.end(), rng_);
      pos_ = 0;
      fresh = true;
    }
    out.assign(perm_.begin() + pos_, perm_.begin() + pos_ + count);
    pos_ += count;
    return fresh;
  }

 private:
  std::mt19937_64 rng_;
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
};

}  // namespace

ConvergenceResult convergence_trial(const FiniteSumProblem& problem,
                                    const Vector& w0,
                                    const OptimizerConfig& cfg,
                                    const ConvergenceOptions& opts) {
  cfg.validate();
  if (opts.steps < 1) throw Error("convergence_trial: need K >= 1");
  if (opts.seeds.empty()) throw Error("convergence_trial: need at least one seed");
  const std::size_t n = problem.num_samples;
  const bool full = opts.batch_size == 0 || opts.batch_size >= n;

  ConvergenceResult res;
  res.beta = opts.beta;
  res.eta = cfg.eta;
  res.step_size_ok = opts.beta > 0.0 && cfg.eta <= 1.0 / (4.0 * opts.beta);
  res.theorem_aligned = res.step_size_ok && cfg.theorem_aligned();

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  res.loss0 = problem.eval(w0, all).loss;
  res.loss_star = res.loss0;

  for (std::uint64_t seed : opts.seeds) {
    Vector w = w0;
    Optimizer opt(cfg);
    // Twice the batch per step with an independent second minibatch.
    const bool independent = cfg.policy == MinibatchPolicy::kIndependentSecond;
    const std::size_t draw = independent ? 2 * opts.batch_size : opts.batch_size;
    if (!full && draw > n)
      throw Error("convergence_trial: dataset too small for two disjoint minibatches");
    EpochSampler sampler(n, seed);
    std::vector<std::size_t> idx;
    double sum_sq = 0.0;
    for (int k = 0; k < opts.steps; ++k) {
      const LossGrad fullg = problem.eval(w, all);
      sum_sq += fullg.grad.squaredNorm();
      res.loss_star = std::min(res.loss_star, fullg.loss);
      auto track = [&](const Vector& v) {
        res.max_excursion = std::max(res.max_excursion, (v - w0).norm());
      };
      track(w);
      if (full) {
        auto f = [&](const Vector& v) {
          track(v);
          return problem.eval(v, all);
        };
        opt.sam_step(w, f, f);
        continue;
      }
      if (sampler.draw(draw, idx))
        res.sigma2 = std::max(
            res.sigma2, minibatch_variance(problem.sample_grads(w), opts.batch_size));
      const std::span<const std::size_t> first(idx.data(), opts.batch_size);
      const std::span<const std::size_t> second =
          independent ? std::span<const std::size_t>(idx.data() + opts.batch_size,
                                                     opts.batch_size)
                      : first;
      opt.sam_step(w, [&](const Vector& v) { return problem.eval(v, first); },
                   [&](const Vector& v) {
                     track(v);
                     return problem.eval(v, second);
                   });
    }
    res.max_excursion = std::max(res.max_excursion, (w - w0).norm());
    res.loss_star = std::min(res.loss_star, problem.eval(w, all).loss);
    res.per_seed_lhs.push_back(sum_sq / opts.steps);
  }
  res.lhs = std::accumulate(res.per_seed_lhs.begin(), res.per_seed_lhs.end(), 0.0) /
            static_cast<double>(res.per_seed_lhs.size());
  res.rhs = convergence_rhs(res.loss0, res.loss_star, cfg.eta, opts.steps,
                            opts.beta, cfg.rho, res.sigma2);
  res.holds = res.lhs <= res.rhs.total();
  return res;
}

}  // namespace sast
