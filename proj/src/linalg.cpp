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

#include "sast/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sast {

SpectralNormResult spectral_norm(
    const std::function<Vector(const Vector&)>& apply,
    const std::function<Vector(const Vector&)>& apply_t, int cols, double tol,
    int max_iter) {
  SpectralNormResult res;
  if (cols == 0) {
    res.converged = true;
    return res;
  }
  std::mt19937_64 rng(0x5eed5eedULL);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Vector v(cols);
  for (int i = 0; i < cols; ++i) v[i] = (i % 2 == 0 ? 1.0 : -1.0) * unif(rng);
  v.normalize();

  double lambda = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    Vector w = apply_t(apply(v));
    const double next = v.dot(w);
    const double wn = w.norm();
    res.iterations = it;
    if (wn == 0.0) {
      lambda = 0.0;
      res.converged = true;
      break;
    }
    const bool settled =
        std::abs(next - lambda) <= tol * std::max(std::abs(next), 1e-300);
    lambda = next;
    v = w / wn;
    if (settled) {
      res.converged = true;
      break;
    }
  }
  Vector w = apply_t(apply(v));
  lambda = std::max(lambda, v.dot(w));
  res.value = std::sqrt(std::max(lambda, 0.0));
  res.residual = (w - lambda * v).norm() / std::max(lambda, 1e-300);
  if (lambda == 0.0) res.residual = 0.0;
  return res;
}

SpectralNormResult spectral_norm(const Matrix& m, double tol, int max_iter) {
  if (m.size() == 0) return {0.0, 0.0, 0, true};
  return spectral_norm([&m](const Vector& v) -> Vector { return m * v; },
                       [&m](const Vector& u) -> Vector {
                         return m.transpose() * u;
                       },
                       static_cast<int>(m.cols()), tol, max_iter);
}

}  // namespace sast
