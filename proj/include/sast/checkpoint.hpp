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

#include "sast/grad.hpp"
#include "sast/snn.hpp"

namespace sast {

// Checkpoint container, version 1. All integers are unsigned little-endian,
// all reals IEEE-754 binary64 little-endian.
//
//   magic      8 bytes  "SASTCKPT"
//   version    u32      1
//   kind       u32      0 = parameters, 1 = gradient dump
//   family     u32      0 arctan, 1 fast_sigmoid, 2 hard
//   slope_k    f64
//   alpha      f64      (d_alpha for gradient dumps)
//   L          u32      number of layers
//   dims       u32 x (L+1)   d_0 .. d_L
//   C          u32      classes
//   per layer  A (d_l x d_{l-1}, row-major) f64, b f64 x d_l, theta f64 x d_l
//   W_out      C x d_L row-major f64
//   b_out      f64 x C
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkParams params;
  SurrogateSpec spec;
};

std::string encode_checkpoint(const NetworkParams& params,
                              const SurrogateSpec& spec);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const SurrogateSpec& spec);
Checkpoint load_checkpoint(const std::string& path);

// Gradient dumps reuse the container with kind = 1; the "theta" slots hold
// d_theta and no positivity check is applied on load.
std::string encode_gradient(const ParamGradient& grad, const SurrogateSpec& spec);
ParamGradient decode_gradient(const std::string& bytes);
void save_gradient(const std::string& path, const ParamGradient& grad,
                   const SurrogateSpec& spec);

}  // namespace sast
