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

#include <string>
#include <vector>

#include "sast/snn.hpp"

namespace sast {

// Data, parameter and surrogate bounds that all closed-form constants are
// functions of.
struct AssumptionSet {
  double r_x = 0.0;
  double m_a = 0.0;
  double m_b = 0.0;
  double m_theta = 0.0;
  double m_out = 0.0;
  double m_b_out = 0.0;
  double alpha = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  int steps = 1;            // T
  std::vector<int> dims;    // d_0 .. d_L
  int num_classes = 0;      // C

  int num_layers() const { return static_cast<int>(dims.size()) - 1; }
  void validate() const;

  // Bounds read off a parameter set. The slack factor (>= 1) inflates the
  // operator and threshold bounds so that they also cover nearby iterates.
  static AssumptionSet from_params(const NetworkParams& params,
                                   const SurrogateSpec& spec, double r_x,
                                   int steps, double slack = 1.0);
};

struct TheoryConstants {
  double s_t_alpha = 0.0;
  double gamma = 0.0;
  bool contractive = false;
  double s_t_gamma = 0.0;
  double g_t = 0.0;            // B1 * M_A * S_T(gamma)
  std::vector<double> r_u;     // per layer
  double l_x = 0.0;
  double c_inner = 0.0;
  double c_p = 0.0;
  double l_w = 0.0;
  double h_w = 0.0;
  double beta = 0.0;
};

// sum_{k<T} a^k; equals (1 - a^T) / (1 - a) for a != 1 and T for a = 1.
double geometric_factor(double a, int steps);

struct Contraction {
  double gamma;
  bool contractive;
};
Contraction contraction_gamma(const AssumptionSet& as);

// B1 = k / pi, B2 = 3 sqrt(3) k^2 / (8 pi).
DerivativeBounds arctan_constants(double k);

std::vector<double> state_bounds(const AssumptionSet& as);
double input_lipschitz(const AssumptionSet& as);

struct ParameterConstants {
  double c_inner;
  double c_p;
  double l_w;
  double h_w;
};
ParameterConstants parameter_constants(const AssumptionSet& as);

// 0.5 L_w^2 + 2 H_w
double smoothness_beta(double l_w, double h_w);

TheoryConstants compute_constants(const AssumptionSet& as);

// beta for every parameter point within `radius` of params: each block bound
// grows by at most the Euclidean length of the perturbation.
double ball_beta(const NetworkParams& params, const SurrogateSpec& spec,
                 double r_x, int steps, double radius);

// Upper bound on max_{||e|| <= rho} L(w + e).
double sam_upper_bound(double loss, double grad_norm, double rho, double beta);

// |l(f(x)) - l(f(x'))| <= sqrt(2) L_x ||x - x'||_{2,2}
double loss_stability_bound(double l_x, double dx_norm);

// E ||x - m.x||_{2,2} <= sqrt(p T) R_x under independent coordinate drops.
double event_drop_distance_bound(double p, int steps, double r_x);
// E |delta loss| <= sqrt(2) L_x sqrt(p T) R_x
double event_drop_bound(double l_x, double p, int steps, double r_x);

struct ConvergenceBound {
  double init_term;   // 4 (L0 - L*) / (eta K)
  double sam_term;    // 3 beta^2 rho^2
  double noise_term;  // 2 eta beta sigma^2
  double total() const { return init_term + sam_term + noise_term; }
};
ConvergenceBound convergence_rhs(double loss0, double loss_star, double eta,
                                 int steps, double beta, double rho,
                                 double sigma2);

// Key-value JSON report of an assumption set and its constants.
std::string theory_report(const AssumptionSet& as, const TheoryConstants& tc);

}  // namespace sast
