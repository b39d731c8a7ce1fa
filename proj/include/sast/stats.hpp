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

#include <cstddef>
#include <span>

namespace sast {

// Mean, sample standard deviation, and quartiles (linear interpolation
// between order statistics).
struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
  double iqr() const { return q3 - q1; }
};

Summary summarize(std::span<const double> values);

// Quantile q in [0,1] of the values.
double quantile(std::span<const double> values, double q);

// Trapezoid area under y(x) over the given abscissae.
double trapezoid_area(std::span<const double> x, std::span<const double> y);

}  // namespace sast
