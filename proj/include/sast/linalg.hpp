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

#include <functional>

#include "sast/common.hpp"

namespace sast {

struct SpectralNormResult {
  double value = 0.0;
  // ||M^T M v - s^2 v|| / max(s^2, tiny) at the final iterate.
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kPowerIterationTol = 1e-10;
inline constexpr int kPowerIterationCap = 1000;

// Largest singular value of m by power iteration on m^T m, started from a
// fixed pseudo-random vector so results are reproducible.
SpectralNormResult spectral_norm(const Matrix& m,
                                 double tol = kPowerIterationTol,
                                 int max_iter = kPowerIterationCap);

// Same iteration for an operator known only through products: apply(v) must
// return J v and apply_t(u) must return J^T u.
SpectralNormResult spectral_norm(
    const std::function<Vector(const Vector&)>& apply,
    const std::function<Vector(const Vector&)>& apply_t, int cols,
    double tol = kPowerIterationTol, int max_iter = kPowerIterationCap);

}  // namespace sast
