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
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sast/common.hpp"
#include "sast/frames.hpp"
#include "sast/snn.hpp"

namespace sast {

// A minibatch is a dataset slice; it must be nonempty with uniform shape.
using Batch = Dataset;
void validate_batch(const Batch& batch, const NetworkParams& params);

struct CrossEntropy {
  double loss;
  Vector grad;  // softmax(o) - onehot(y)
};

// -o_y + logsumexp(o) with max subtraction. Label is 0-based.
CrossEntropy cross_entropy(const Vector& logits, int label);

struct LayerGradient {
  Matrix d_a;
  Vector d_b;
  Vector d_theta;
};

// Gradient with the same block structure as NetworkParams.
struct ParamGradient {
  std::vector<LayerGradient> layers;
  Matrix d_w_out;
  Vector d_b_out;
  double d_alpha = 0.0;

  static ParamGradient zeros_like(const NetworkParams& params);
  ParamGradient& operator+=(const ParamGradient& other);
  ParamGradient& operator*=(double s);
  bool all_finite() const;
};

// Which blocks form the trainable vector w. A, b, W_out and b_out are always
// trainable; thresholds and leak are switchable groups.
struct TrainableGroups {
  bool thresholds = true;
  bool leak = false;
  bool operator==(const TrainableGroups&) const = default;
};

// Flattening order: per layer A (row-major), b, theta; then W_out (row-major),
// b_out; then alpha.
class ParamLayout {
 public:
  ParamLayout(const NetworkParams& shape, TrainableGroups groups = {});

  std::size_t size() const { return size_; }
  const TrainableGroups& groups() const { return groups_; }

  Vector pack(const NetworkParams& params) const;
  Vector pack(const ParamGradient& grad) const;
  // Overwrites the trainable blocks of params with the entries of w.
  void unpack(const Vector& w, NetworkParams& params) const;

 private:
  std::vector<int> dims_;
  int classes_;
  TrainableGroups groups_;
  std::size_t size_ = 0;
};

struct SampleGradient {
  ParamGradient params;
  Matrix input;  // d_0 x T, gradient with respect to every frame entry
};

// Reverse sweep through a stored surrogate trace for an arbitrary cotangent
// on the logits. Covers the leak path, the reset path -theta*z_{t-1} and the
// cross-layer path through A.
SampleGradient backprop(const NetworkParams& params, const SurrogateSpec& spec,
                        const FrameSequence& x, const StateTrace& trace,
                        const Vector& logit_cotangent);

struct GradientBundle {
  ParamGradient d_params;
  double loss = 0.0;
  std::optional<std::vector<double>> per_sample_param_grad_norms;
  std::optional<std::vector<Matrix>> per_sample_input_grads;
};

// Mean cross-entropy over the batch under the surrogate forward model.
double batch_loss(const NetworkParams& params, const SurrogateSpec& spec,
                  const Batch& batch);
double batch_loss(const NetworkParams& params, const SurrogateSpec& spec,
                  const Dataset& data, std::span<const std::size_t> idx);

// Exact gradient of batch_loss by full BPTT. The whole minibatch is swept at
// once; traces for all samples are held until the reverse pass finishes.
GradientBundle backward(const NetworkParams& params, const SurrogateSpec& spec,
                        const Batch& batch);
// Same, over the samples data[idx] without copying them.
GradientBundle backward(const NetworkParams& params, const SurrogateSpec& spec,
                        const Dataset& data, std::span<const std::size_t> idx);

// Logits (C x n) for data[idx]; any spec, including hard.
Matrix batch_logits(const NetworkParams& params, const SurrogateSpec& spec,
                    const Dataset& data, std::span<const std::size_t> idx);

// Bytes of the tensors simultaneously live at the peak of one batched
// forward/backward (inputs, traces, reverse-sweep buffers) plus
// param_buffers parameter-sized vectors held by the optimizer step.
std::size_t peak_bytes_estimate(const NetworkParams& shape,
                                std::size_t batch_size, int steps,
                                int param_buffers);

// As backward, plus per-sample ||grad_w l_i|| (over the trainable set of
// layout) and per-sample input gradients.
GradientBundle per_sample_gradients(const NetworkParams& params,
                                    const SurrogateSpec& spec,
                                    const Batch& batch,
                                    const ParamLayout& layout);

// Central differences of f at w, one coordinate at a time.
Vector central_difference(const std::function<double(const Vector&)>& f,
                          const Vector& w, double h);

// Central-difference estimate of grad batch_loss over the trainable vector.
Vector finite_difference_gradient(const NetworkParams& params,
                                  const SurrogateSpec& spec, const Batch& batch,
                                  const ParamLayout& layout, double h = 1e-6);

// Central-difference estimate of grad_x l(f(x), y) (d_0 x T).
Matrix finite_difference_input_gradient(const NetworkParams& params,
                                        const SurrogateSpec& spec,
                                        const FrameSequence& x, int label,
                                        double h = 1e-6);

}  // namespace sast
