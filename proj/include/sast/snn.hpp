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
#include <string>
#include <vector>

#include "sast/common.hpp"
#include "sast/frames.hpp"

namespace sast {

enum class SurrogateFamily { kArctan, kFastSigmoid, kHard };

std::string to_string(SurrogateFamily family);
SurrogateFamily surrogate_family_from_string(const std::string& name);

// Spike nonlinearity. Arctan is C2 and theory-aligned; FastSigmoid has a
// discontinuous second derivative at 0 and is accepted as a practical choice
// only. Hard is the Heaviside step used for hard-spike evaluation.
struct SurrogateSpec {
  SurrogateFamily family = SurrogateFamily::kArctan;
  double slope_k = 3.141592653589793;

  static SurrogateSpec arctan(double k) { return {SurrogateFamily::kArctan, k}; }
  static SurrogateSpec fast_sigmoid(double k) {
    return {SurrogateFamily::kFastSigmoid, k};
  }
  static SurrogateSpec hard() { return {SurrogateFamily::kHard, 0.0}; }

  bool smooth() const { return family != SurrogateFamily::kHard; }
  bool is_c2() const { return family == SurrogateFamily::kArctan; }
  void validate() const;

  // Same spec with the nonlinearity replaced by H.
  SurrogateSpec as_hard() const { return hard(); }

  bool operator==(const SurrogateSpec&) const = default;
};

struct SurrogateValue {
  double value;
  double first;
  double second;
};

// sigma(x), sigma'(x), sigma''(x) for a smooth family.
SurrogateValue surrogate_eval(const SurrogateSpec& spec, double x);

// Heaviside with H(0) = 1: a neuron fires when u >= theta.
inline double hard_step(double x) { return x >= 0.0 ? 1.0 : 0.0; }

// Uniform bounds sup|sigma'| <= b1 and sup|sigma''| <= b2.
struct DerivativeBounds {
  double b1;
  double b2;
};
DerivativeBounds derivative_bounds(const SurrogateSpec& spec);

struct LayerParams {
  Matrix a;      // d_l x d_{l-1}
  Vector b;      // d_l
  Vector theta;  // d_l, strictly positive

  int in_dim() const { return static_cast<int>(a.cols()); }
  int out_dim() const { return static_cast<int>(a.rows()); }
};

struct NetworkParams {
  std::vector<LayerParams> layers;
  double alpha = 0.9;
  Matrix w_out;  // C x d_L
  Vector b_out;  // C

  int num_layers() const { return static_cast<int>(layers.size()); }
  int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  int last_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
  int num_classes() const { return static_cast<int>(w_out.rows()); }
  // d_0, d_1, ..., d_L
  std::vector<int> dims() const;
  std::size_t parameter_count(bool include_alpha = false) const;

  // Throws Error/DimensionError when an invariant is broken.
  void validate() const;

  static NetworkParams zeros(const std::vector<int>& dims, int num_classes,
                             double alpha);
};

// Scales every threshold by a common multiplier (or one per layer).
NetworkParams scale_thresholds(const NetworkParams& params, double lambda);
NetworkParams scale_thresholds(const NetworkParams& params,
                               const std::vector<double>& lambdas);

struct InitOptions {
  double weight_gain = 1.0;     // A ~ N(0, gain^2 / d_in)
  double readout_gain = 1.0;    // W_out ~ N(0, gain^2 / d_L)
  double bias_scale = 0.0;      // b ~ U(-s, s)
  double theta_init = 0.1;      // initial threshold (all units)
  double theta_jitter = 0.0;    // theta ~ theta_init * (1 + U(-j, j))
};

NetworkParams initialize_network(const std::vector<int>& dims, int num_classes,
                                 double alpha, const InitOptions& opts,
                                 std::uint64_t seed);

// Membrane and output trajectories of one forward pass. u[l] and z[l] are
// d_l x T (column t is time t+1).
struct StateTrace {
  std::vector<Matrix> u;
  std::vector<Matrix> z;
  Vector zbar;
  Vector logits;
};

// Unrolled LIF network with reset-by-subtraction. States start at zero for
// every call. Hard spec gives the hard-spike network, any smooth spec gives
// the surrogate-forward network.
StateTrace forward(const NetworkParams& params, const SurrogateSpec& spec,
                   const FrameSequence& x);

// Logits only; same arithmetic as forward().
Vector logits(const NetworkParams& params, const SurrogateSpec& spec,
              const FrameSequence& x);

// Operator and vector bounds of a parameter set. R_x is only filled when data
// is supplied.
struct ParamBounds {
  double m_a = 0.0;
  double m_b = 0.0;
  double m_theta = 0.0;
  double m_out = 0.0;
  double m_b_out = 0.0;
  double r_x = 0.0;
  bool has_r_x = false;
  bool converged = true;        // all power iterations converged
  double worst_residual = 0.0;  // largest power-iteration residual
};

ParamBounds extract_bounds(const NetworkParams& params);
ParamBounds extract_bounds(const NetworkParams& params, const Dataset& data);

}  // namespace sast
