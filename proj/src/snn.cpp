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

#include "sast/snn.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "sast/linalg.hpp"

namespace sast {

std::string to_string(SurrogateFamily family) {
  switch (family) {
    case SurrogateFamily::kArctan:
      return "arctan";
    case SurrogateFamily::kFastSigmoid:
      return "fast_sigmoid";
    case SurrogateFamily::kHard:
      return "hard";
  }
  return "unknown";
}

SurrogateFamily surrogate_family_from_string(const std::string& name) {
  if (name == "arctan") return SurrogateFamily::kArctan;
  if (name == "fast_sigmoid") return SurrogateFamily::kFastSigmoid;
  if (name == "hard") return SurrogateFamily::kHard;
  throw Error("unknown surrogate family: " + name);
}

void SurrogateSpec::validate() const {
  if (smooth() && !(slope_k > 0.0 && std::isfinite(slope_k)))
    throw Error("surrogate slope k must be positive and finite");
}

SurrogateValue surrogate_eval(const SurrogateSpec& spec, double x) {
  const double k = spec.slope_k;
  switch (spec.family) {
    case SurrogateFamily::kArctan: {
      const double kx = k * x;
      const double q = 1.0 + kx * kx;
      return {0.5 + std::atan(kx) * std::numbers::inv_pi,
              k * std::numbers::inv_pi / q,
              -2.0 * k * k * kx * std::numbers::inv_pi / (q * q)};
    }
    case SurrogateFamily::kFastSigmoid: {
      const double kx = k * x;
      const double q = 1.0 + std::abs(kx);
      const double sign = kx > 0.0 ? 1.0 : (kx < 0.0 ? -1.0 : 0.0);
      return {0.5 * (1.0 + kx / q), 0.5 * k / (q * q), -k * k * sign / (q * q * q)};
    }
    case SurrogateFamily::kHard:
      break;
  }
  throw Error("surrogate_eval: hard family has no derivatives, use hard_step");
}

DerivativeBounds derivative_bounds(const SurrogateSpec& spec) {
  const double k = spec.slope_k;
  switch (spec.family) {
    case SurrogateFamily::kArctan:
      return {k * std::numbers::inv_pi,
              3.0 * std::numbers::sqrt3 / (8.0 * std::numbers::pi) * k * k};
    case SurrogateFamily::kFastSigmoid:
      return {0.5 * k, k * k};
    case SurrogateFamily::kHard:
      break;
  }
  throw Error("derivative_bounds: hard family is not differentiable");
}

std::vector<int> NetworkParams::dims() const {
  std::vector<int> d;
  if (layers.empty()) return d;
  d.push_back(input_dim());
  for (const auto& l : layers) d.push_back(l.out_dim());
  return d;
}

std::size_t NetworkParams::parameter_count(bool include_alpha) const {
  std::size_t n = 0;
  for (const auto& l : layers)
    n += static_cast<std::size_t>(l.a.size() + l.b.size() + l.theta.size());
  n += static_cast<std::size_t>(w_out.size() + b_out.size());
  return n + (include_alpha ? 1 : 0);
}

namespace {

template <typename M>
bool all_finite(const M& m) {
  return m.allFinite();
}

}  // namespace

void NetworkParams::validate() const {
  if (layers.empty()) throw Error("network needs at least one layer");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("leak alpha must lie in (0,1)");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& p = layers[l];
    const std::string where = "layer " + std::to_string(l + 1);
    if (p.b.size() != p.a.rows() || p.theta.size() != p.a.rows())
      throw DimensionError(where + ": b/theta size does not match A rows");
    if (l > 0 && p.a.cols() != layers[l - 1].a.rows())
      throw DimensionError(where + ": A columns do not match previous layer");
    if (!all_finite(p.a) || !all_finite(p.b) || !all_finite(p.theta))
      throw Error(where + ": non-finite parameter");
    if ((p.theta.array() <= 0.0).any())
      throw Error(where + ": thresholds must be strictly positive");
  }
  if (w_out.cols() != last_dim())
    throw DimensionError("readout columns do not match last layer width");
  if (b_out.size() != w_out.rows())
    throw DimensionError("readout bias size does not match class count");
  if (w_out.rows() < 1) throw DimensionError("readout needs at least one class");
  if (!all_finite(w_out) || !all_finite(b_out))
    throw Error("readout: non-finite parameter");
}

NetworkParams NetworkParams::zeros(const std::vector<int>& dims,
                                   int num_classes, double alpha) {
  if (dims.size() < 2) throw DimensionError("need d_0 and at least one layer");
  NetworkParams p;
  p.alpha = alpha;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    p.layers.push_back({Matrix::Zero(dims[l], dims[l - 1]),
                        Vector::Zero(dims[l]), Vector::Ones(dims[l])});
  }
  p.w_out = Matrix::Zero(num_classes, dims.back());
  p.b_out = Vector::Zero(num_classes);
  return p;
}

NetworkParams scale_thresholds(const NetworkParams& params, double lambda) {
  return scale_thresholds(
      params, std::vector<double>(params.layers.size(), lambda));
}

NetworkParams scale_thresholds(const NetworkParams& params,
                               const std::vector<double>& lambdas) {
  if (lambdas.size() != params.layers.size())
    throw DimensionError("one threshold multiplier per layer required");
  NetworkParams out = params;
  for (std::size_t l = 0; l < out.layers.size(); ++l)
    out.layers[l].theta *= lambdas[l];
  return out;
}

NetworkParams initialize_network(const std::vector<int>& dims, int num_classes,
                                 double alpha, const InitOptions& opts,
                                 std::uint64_t seed) {
  NetworkParams p = NetworkParams::zeros(dims, num_classes, alpha);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (auto& layer : p.layers) {
    const double scale = opts.weight_gain / std::sqrt(double(layer.in_dim()));
    for (Eigen::Index j = 0; j < layer.a.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.a.rows(); ++i)
        layer.a(i, j) = scale * normal(rng);
    for (Eigen::Index i = 0; i < layer.b.size(); ++i)
      layer.b[i] = opts.bias_scale * unif(rng);
    for (Eigen::Index i = 0; i < layer.theta.size(); ++i)
      layer.theta[i] = opts.theta_init * (1.0 + opts.theta_jitter * unif(rng));
  }
  const double scale = opts.readout_gain / std::sqrt(double(dims.back()));
  for (Eigen::Index j = 0; j < p.w_out.cols(); ++j)
    for (Eigen::Index i = 0; i < p.w_out.rows(); ++i)
      p.w_out(i, j) = scale * normal(rng);
  p.validate();
  return p;
}

StateTrace forward(const NetworkParams& params, const SurrogateSpec& spec,
                   const FrameSequence& x) {
  if (x.dim() != params.input_dim())
    throw DimensionError("forward: input dimension " + std::to_string(x.dim()) +
                         " does not match d_0 = " +
                         std::to_string(params.input_dim()));
  if (x.steps() < 1) throw DimensionError("forward: need at least one frame");
  if (spec.smooth()) spec.validate();

  const int steps = x.steps();
  const double alpha = params.alpha;
  StateTrace trace;
  trace.u.reserve(params.layers.size());
  trace.z.reserve(params.layers.size());

  const Matrix* input = &x.frames;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& layer = params.layers[l];
    const int d = layer.out_dim();
    // Feed-forward drive for all steps at once: A z^{(l-1)} + b.
    Matrix drive = layer.a * (*input);
    drive.colwise() += layer.b;

    Matrix u(d, steps);
    Matrix z(d, steps);
    for (int t = 0; t < steps; ++t) {
      auto ut = u.col(t);
      if (t == 0) {
        ut = drive.col(0);
      } else {
        ut = alpha * u.col(t - 1) + drive.col(t) -
             layer.theta.cwiseProduct(z.col(t - 1));
      }
      for (int i = 0; i < d; ++i) {
        const double arg = ut[i] - layer.theta[i];
        z(i, t) = spec.smooth() ? surrogate_eval(spec, arg).value
                                : hard_step(arg);
      }
      if (!ut.allFinite())
        throw NonFiniteError("forward: non-finite membrane state",
                             static_cast<int>(l) + 1, t + 1);
    }
    trace.u.push_back(std::move(u));
    trace.z.push_back(std::move(z));
    input = &trace.z.back();
  }
  trace.zbar = trace.z.back().rowwise().mean();
  trace.logits = params.w_out * trace.zbar + params.b_out;
  if (!trace.logits.allFinite())
    throw NonFiniteError("forward: non-finite logits", params.num_layers(), 0);
  return trace;
}

Vector logits(const NetworkParams& params, const SurrogateSpec& spec,
              const FrameSequence& x) {
  return forward(params, spec, x).logits;
}

ParamBounds extract_bounds(const NetworkParams& params) {
  ParamBounds pb;
  auto track = [&pb](const SpectralNormResult& r) {
    pb.converged = pb.converged && r.converged;
    pb.worst_residual = std::max(pb.worst_residual, r.residual);
    return r.value;
  };
  for (const auto& layer : params.layers) {
    pb.m_a = std::max(pb.m_a, track(spectral_norm(layer.a)));
    pb.m_b = std::max(pb.m_b, layer.b.norm());
    pb.m_theta = std::max(pb.m_theta, layer.theta.cwiseAbs().maxCoeff());
  }
  pb.m_out = track(spectral_norm(params.w_out));
  pb.m_b_out = params.b_out.norm();
  return pb;
}

ParamBounds extract_bounds(const NetworkParams& params, const Dataset& data) {
  ParamBounds pb = extract_bounds(params);
  pb.r_x = data.input_radius();
  pb.has_r_x = true;
  return pb;
}

}  // namespace sast
