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

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace sast {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of two operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A forward or reverse sweep produced NaN or Inf. Layer and time are 1-based
// (time 0 is used for readout quantities).
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, int layer, int time)
      : Error(what + " (layer " + std::to_string(layer) + ", t=" +
              std::to_string(time) + ")"),
        layer_(layer),
        time_(time) {}

  int layer() const { return layer_; }
  int time() const { return time_; }

 private:
  int layer_;
  int time_;
};

// Malformed or out-of-range content in a file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace sast
