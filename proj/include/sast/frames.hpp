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

#include <algorithm>
#include <cstddef>
#include <vector>

#include "sast/common.hpp"

namespace sast {

// A length-T sequence of input frames x_1..x_T, stored column-wise: column t
// holds frame t+1, so the matrix is d0 x T.
struct FrameSequence {
  Matrix frames;

  FrameSequence() = default;
  explicit FrameSequence(Matrix m) : frames(std::move(m)) {}
  static FrameSequence zeros(int dim, int steps) {
    return FrameSequence(Matrix::Zero(dim, steps));
  }

  int dim() const { return static_cast<int>(frames.rows()); }
  int steps() const { return static_cast<int>(frames.cols()); }

  // max_t ||x_t||_2
  double max_frame_norm() const {
    double r = 0.0;
    for (int t = 0; t < steps(); ++t) r = std::max(r, frames.col(t).norm());
    return r;
  }

  bool operator==(const FrameSequence& other) const {
    return frames.rows() == other.frames.rows() &&
           frames.cols() == other.frames.cols() && frames == other.frames;
  }
};

// ||x - x'||_{2,2}: Frobenius norm over all frames.
inline double sequence_distance(const FrameSequence& a, const FrameSequence& b) {
  if (a.dim() != b.dim() || a.steps() != b.steps())
    throw DimensionError("sequence_distance: shape mismatch");
  return (a.frames - b.frames).norm();
}

// Labeled collection of frame sequences with uniform shape. Labels are
// 0-based class indices.
struct Dataset {
  std::vector<FrameSequence> inputs;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
  int steps() const { return inputs.empty() ? 0 : inputs.front().steps(); }
  int dim() const { return inputs.empty() ? 0 : inputs.front().dim(); }

  // Largest per-frame L2 norm over the whole dataset (data-dependent R_x).
  double input_radius() const {
    double r = 0.0;
    for (const auto& x : inputs) r = std::max(r, x.max_frame_norm());
    return r;
  }

  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset out;
    out.num_classes = num_classes;
    out.inputs.reserve(idx.size());
    out.labels.reserve(idx.size());
    for (auto i : idx) {
      out.inputs.push_back(inputs.at(i));
      out.labels.push_back(labels.at(i));
    }
    return out;
  }
};

}  // namespace sast
