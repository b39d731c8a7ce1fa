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

#include "sast/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "sast/stats.hpp"

namespace sast {

double accuracy(const NetworkParams& params, const SurrogateSpec& spec,
                const Dataset& data) {
  if (data.empty()) return 0.0;
  constexpr std::size_t kChunk = 256;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + kChunk); ++i)
      idx.push_back(i);
    const Matrix o = batch_logits(params, spec, data, idx);
    for (Eigen::Index j = 0; j < o.cols(); ++j) {
      Eigen::Index best = 0;
      o.col(j).maxCoeff(&best);
      if (best == data.labels[idx[j]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ContractionDiagnostic observed_contraction(
    std::span<const NetworkParams> checkpoints, double b1) {
  if (checkpoints.empty()) throw Error("observed_contraction: no checkpoints");
  ContractionDiagnostic d;
  double alpha = 0.0;
  for (const auto& p : checkpoints) {
    alpha = std::max(alpha, p.alpha);
    for (const auto& l : p.layers)
      d.hat_m_theta = std::max(d.hat_m_theta, l.theta.cwiseAbs().maxCoeff());
  }
  d.hat_gamma = alpha + d.hat_m_theta * b1;
  return d;
}

namespace {

Vector random_direction(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  } while (v.norm() == 0.0);
  return v.normalized();
}

}  // namespace

SecantResult secant_smoothness(const Objective& objective, const Vector& w,
                               std::span<const double> radii, int probes,
                               std::uint64_t seed) {
  if (probes < 1) throw Error("secant_smoothness: need at least one probe");
  SecantResult res;
  res.seed = seed;
  const Vector g0 = objective(w).grad;
  for (std::size_t r = 0; r < radii.size(); ++r) {
    if (!(radii[r] > 0.0)) throw Error("secant_smoothness: radii must be positive");
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (r + 1));
    double worst = 0.0;
    for (int j = 0; j < probes; ++j) {
      const Vector delta = radii[r] * random_direction(rng, w.size());
      const Vector g = objective(w + delta).grad;
      worst = std::max(worst, (g - g0).norm() / delta.norm());
    }
    res.per_radius.push_back(worst);
    res.beta_sec = std::max(res.beta_sec, worst);
  }
  return res;
}

SamGapResult sam_gap(const Objective& objective, const Vector& w, double rho,
                     int random_probes, std::uint64_t seed) {
  SamGapResult res;
  if (rho == 0.0) return res;
  if (!(rho > 0.0)) throw Error("sam_gap: rho must be nonnegative");
  const LossGrad base = objective(w);
  std::mt19937_64 rng(seed);
  double sum = 0.0;
  res.random_max = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < random_probes; ++j) {
    const double inc = objective(w + rho * random_direction(rng, w.size())).loss - base.loss;
    sum += inc;
    res.random_max = std::max(res.random_max, inc);
  }
  res.random_mean = random_probes > 0 ? sum / random_probes : 0.0;
  if (random_probes == 0) res.random_max = 0.0;
  const double gn = base.grad.norm();
  res.gradient_probe =
      gn > 0.0 ? objective(w + (rho / gn) * base.grad).loss - base.loss : 0.0;
  res.gap = std::max(res.gradient_probe, res.random_max);
  return res;
}

TransferGap transfer_gap(const NetworkParams& params, const SurrogateSpec& spec,
                         const Dataset& data) {
  return transfer_gap(params, spec, spec.as_hard(), data);
}

TransferGap transfer_gap(const NetworkParams& params,
                         const SurrogateSpec& first_mode,
                         const SurrogateSpec& second_mode, const Dataset& data) {
  TransferGap tg;
  tg.acc_sur = accuracy(params, first_mode, data);
  tg.acc_hard = accuracy(params, second_mode, data);
  tg.gap = tg.acc_sur - tg.acc_hard;
  return tg;
}

Jacobians logit_jacobians(const NetworkParams& params, const SurrogateSpec& spec,
                          const FrameSequence& x, const ParamLayout& layout) {
  const StateTrace trace = forward(params, spec, x);
  const int classes = params.num_classes();
  Jacobians j;
  j.logits = trace.logits;
  j.jw.resize(classes, static_cast<Eigen::Index>(layout.size()));
  j.jx.resize(classes, x.frames.size());
  for (int c = 0; c < classes; ++c) {
    const SampleGradient sg =
        backprop(params, spec, x, trace, Vector::Unit(classes, c));
    j.jw.row(c) = layout.pack(sg.params).transpose();
    j.jx.row(c) = Eigen::Map<const Vector>(sg.input.data(), sg.input.size()).transpose();
  }
  return j;
}

namespace {

Eigen::VectorXd gram_eigenvalues(const Matrix& jacobian) {
  const Matrix gram = jacobian * jacobian.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues();  // ascending
}

}  // namespace

double gram_min_singular(const Matrix& jacobian) {
  if (jacobian.rows() == 0) return 0.0;
  if (jacobian.rows() > jacobian.cols()) return 0.0;  // rank < C
  return std::sqrt(std::max(gram_eigenvalues(jacobian)[0], 0.0));
}

double gram_min_singular(const NetworkParams& params, const SurrogateSpec& spec,
                         const FrameSequence& x, const ParamLayout& layout) {
  return gram_min_singular(logit_jacobians(params, spec, x, layout).jw);
}

MechanismRecord mechanism_check(const NetworkParams& params,
                                const SurrogateSpec& spec,
                                const FrameSequence& x, int label,
                                const ParamLayout& layout, double rel_tol) {
  const Jacobians j = logit_jacobians(params, spec, x, layout);
  const CrossEntropy ce = cross_entropy(j.logits, label);
  MechanismRecord rec;
  rec.param_grad_norm = (j.jw.transpose() * ce.grad).norm();
  rec.input_grad_norm = (j.jx.transpose() * ce.grad).norm();
  const Eigen::VectorXd ew = gram_eigenvalues(j.jw);
  const Eigen::VectorXd ex = gram_eigenvalues(j.jx);
  rec.sigma_min = j.jw.rows() > j.jw.cols() ? 0.0 : std::sqrt(std::max(ew[0], 0.0));
  rec.jw_norm = std::sqrt(std::max(ew[ew.size() - 1], 0.0));
  rec.jx_norm = std::sqrt(std::max(ex[ex.size() - 1], 0.0));
  rec.conditioned = rec.sigma_min > rel_tol * rec.jw_norm && rec.sigma_min > 0.0;
  if (rec.conditioned) {
    rec.bound = rec.jx_norm / rec.sigma_min * rec.param_grad_norm;
    rec.satisfied = rec.input_grad_norm - rec.bound <=
                    kMechanismSlack * std::max(1.0, rec.bound);
  }
  return rec;
}

DiagnosticsReport diagnose(const NetworkParams& params, const SurrogateSpec& spec,
                           const Dataset& train, const Dataset& heldout,
                           const ParamLayout& layout,
                           const DiagnosticsOptions& opts) {
  DiagnosticsReport rep;
  const DerivativeBounds db = derivative_bounds(spec);
  const ContractionDiagnostic cd =
      observed_contraction(std::span<const NetworkParams>(&params, 1), db.b1);
  rep.hat_m_theta = cd.hat_m_theta;
  rep.hat_gamma = cd.hat_gamma;

  const Objective obj = make_objective(params, spec, train, layout);
  const Vector w = layout.pack(params);
  std::vector<double> radii;
  for (double s : opts.secant_scales) radii.push_back(s * std::max(w.norm(), 1e-12));
  rep.beta_sec = secant_smoothness(obj, w, radii, opts.secant_probes, opts.seed).beta_sec;
  rep.sam_gap_delta_rho = sam_gap(obj, w, opts.rho, opts.sam_probes, opts.seed).gap;
  rep.transfer_gap = transfer_gap(params, spec, heldout).gap;

  const std::size_t n = std::min(opts.max_samples, heldout.size());
  std::vector<double> pg, ig, smin;
  for (std::size_t i = 0; i < n; ++i) {
    const MechanismRecord rec =
        mechanism_check(params, spec, heldout.inputs[i], heldout.labels[i], layout);
    pg.push_back(rec.param_grad_norm);
    ig.push_back(rec.input_grad_norm);
    smin.push_back(rec.sigma_min);
    if (!rec.conditioned) ++rep.unconditioned;
    else if (!rec.satisfied) ++rep.mechanism_violations;
  }
  if (n > 0) {
    rep.mean_param_grad_norm = summarize(pg).mean;
    rep.mean_input_grad_norm = summarize(ig).mean;
    rep.sigma_min_gram = summarize(smin).median;
  }
  return rep;
}

}  // namespace sast
