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

#include "sast/theory.hpp"

#include <cmath>
#include <numbers>

#include "json.hpp"

namespace sast {

void AssumptionSet::validate() const {
  if (dims.size() < 2) throw Error("assumptions: need d_0 and one layer");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("assumptions: alpha not in (0,1)");
  if (steps < 1) throw Error("assumptions: T must be >= 1");
  for (double v : {r_x, m_a, m_b, m_theta, m_out, m_b_out, b1, b2})
    if (!(v >= 0.0 && std::isfinite(v)))
      throw Error("assumptions: bounds must be finite and nonnegative");
}

AssumptionSet AssumptionSet::from_params(const NetworkParams& params,
                                         const SurrogateSpec& spec, double r_x,
                                         int steps, double slack) {
  const ParamBounds pb = extract_bounds(params);
  const DerivativeBounds db = derivative_bounds(spec);
  AssumptionSet as;
  as.r_x = r_x;
  as.m_a = slack * pb.m_a;
  as.m_b = slack * pb.m_b;
  as.m_theta = slack * pb.m_theta;
  as.m_out = slack * pb.m_out;
  as.m_b_out = slack * pb.m_b_out;
  as.alpha = params.alpha;
  as.b1 = db.b1;
  as.b2 = db.b2;
  as.steps = steps;
  as.dims = params.dims();
  as.num_classes = params.num_classes();
  as.validate();
  return as;
}

double geometric_factor(double a, int steps) {
  if (steps < 1) throw Error("geometric_factor: T must be >= 1");
  if (a == 1.0) return static_cast<double>(steps);
  return (1.0 - std::pow(a, steps)) / (1.0 - a);
}

Contraction contraction_gamma(const AssumptionSet& as) {
  const double gamma = as.alpha + as.m_theta * as.b1;
  return {gamma, gamma < 1.0};
}

DerivativeBounds arctan_constants(double k) {
  if (!(k > 0.0)) throw Error("arctan_constants: k must be positive");
  return derivative_bounds(SurrogateSpec::arctan(k));
}

namespace {

// R_z^{(l-1)}: R_x for the first layer, sqrt(d_{l-1}) above it.
double input_radius(const AssumptionSet& as, int l) {
  return l == 1 ? as.r_x : std::sqrt(static_cast<double>(as.dims[l - 1]));
}

double temporal_gain(const AssumptionSet& as) {
  return as.b1 * as.m_a * geometric_factor(contraction_gamma(as).gamma, as.steps);
}

}  // namespace

std::vector<double> state_bounds(const AssumptionSet& as) {
  const double s = geometric_factor(as.alpha, as.steps);
  std::vector<double> r;
  for (int l = 1; l <= as.num_layers(); ++l) {
    r.push_back(s * (as.m_a * input_radius(as, l) + as.m_b +
                     as.m_theta * std::sqrt(static_cast<double>(as.dims[l]))));
  }
  return r;
}

double input_lipschitz(const AssumptionSet& as) {
  return as.m_out * std::pow(temporal_gain(as), as.num_layers()) /
         std::sqrt(static_cast<double>(as.steps));
}

ParameterConstants parameter_constants(const AssumptionSet& as) {
  ParameterConstants pc{};
  for (int l = 1; l <= as.num_layers(); ++l)
    pc.c_inner += input_radius(as, l) + 2.0 + as.m_theta * as.b1;
  pc.c_p = pc.c_inner + std::sqrt(static_cast<double>(as.dims.back())) + 1.0;
  const double g = temporal_gain(as);
  const int depth = as.num_layers();
  const double root_t = std::sqrt(static_cast<double>(as.steps));
  pc.l_w = as.m_out * std::pow(g, depth) / root_t * pc.c_p;
  pc.h_w = as.m_out * std::pow(g, 2 * depth) * as.b2 * pc.c_p * pc.c_p +
           std::pow(g, depth) * pc.c_inner / root_t;
  return pc;
}

double smoothness_beta(double l_w, double h_w) {
  return 0.5 * l_w * l_w + 2.0 * h_w;
}

TheoryConstants compute_constants(const AssumptionSet& as) {
  as.validate();
  TheoryConstants tc;
  tc.s_t_alpha = geometric_factor(as.alpha, as.steps);
  const Contraction c = contraction_gamma(as);
  tc.gamma = c.gamma;
  tc.contractive = c.contractive;
  tc.s_t_gamma = geometric_factor(c.gamma, as.steps);
  tc.g_t = temporal_gain(as);
  tc.r_u = state_bounds(as);
  tc.l_x = input_lipschitz(as);
  const ParameterConstants pc = parameter_constants(as);
  tc.c_inner = pc.c_inner;
  tc.c_p = pc.c_p;
  tc.l_w = pc.l_w;
  tc.h_w = pc.h_w;
  tc.beta = smoothness_beta(pc.l_w, pc.h_w);
  return tc;
}

double ball_beta(const NetworkParams& params, const SurrogateSpec& spec,
                 double r_x, int steps, double radius) {
  if (!(radius >= 0.0)) throw Error("ball_beta: radius must be nonnegative");
  AssumptionSet as = AssumptionSet::from_params(params, spec, r_x, steps);
  as.m_a += radius;
  as.m_b += radius;
  as.m_theta += radius;
  as.m_out += radius;
  as.m_b_out += radius;
  return compute_constants(as).beta;
}

double sam_upper_bound(double loss, double grad_norm, double rho, double beta) {
  return loss + rho * grad_norm + 0.5 * beta * rho * rho;
}

double loss_stability_bound(double l_x, double dx_norm) {
  return std::numbers::sqrt2 * l_x * dx_norm;
}

double event_drop_distance_bound(double p, int steps, double r_x) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("drop probability must lie in [0,1]");
  return std::sqrt(p * steps) * r_x;
}

double event_drop_bound(double l_x, double p, int steps, double r_x) {
  return std::numbers::sqrt2 * l_x * event_drop_distance_bound(p, steps, r_x);
}

ConvergenceBound convergence_rhs(double loss0, double loss_star, double eta,
                                 int steps, double beta, double rho,
                                 double sigma2) {
  if (!(eta > 0.0) || steps < 1) throw Error("convergence_rhs: need eta > 0, K >= 1");
  return {4.0 * (loss0 - loss_star) / (eta * steps), 3.0 * beta * beta * rho * rho,
          2.0 * eta * beta * sigma2};
}

std::string theory_report(const AssumptionSet& as, const TheoryConstants& tc) {
  nlohmann::ordered_json j;
  j["assumptions"] = {{"R_x", as.r_x},       {"M_A", as.m_a},
                      {"M_b", as.m_b},       {"M_theta", as.m_theta},
                      {"M_out", as.m_out},   {"M_b_out", as.m_b_out},
                      {"alpha", as.alpha},   {"B1", as.b1},
                      {"B2", as.b2},         {"T", as.steps},
                      {"L", as.num_layers()}, {"dims", as.dims},
                      {"C", as.num_classes}};
  j["constants"] = {{"S_T_alpha", tc.s_t_alpha},
                    {"gamma", tc.gamma},
                    {"contractive", tc.contractive},
                    {"theorem_backed", tc.contractive},
                    {"S_T_gamma", tc.s_t_gamma},
                    {"G_T", tc.g_t},
                    {"R_u", tc.r_u},
                    {"L_x", tc.l_x},
                    {"C_inner", tc.c_inner},
                    {"C_p", tc.c_p},
                    {"L_w", tc.l_w},
                    {"H_w", tc.h_w},
                    {"beta", tc.beta}};
  if (!tc.contractive)
    j["constants"]["note"] = "non-contractive: bound not theorem-backed";
  return j.dump(2);
}

}  // namespace sast
