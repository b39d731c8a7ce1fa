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

#include "sast/grad.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sast {

void validate_batch(const Batch& batch, const NetworkParams& params) {
  if (batch.empty()) throw Error("batch must be nonempty");
  if (batch.labels.size() != batch.inputs.size())
    throw DimensionError("batch: label count does not match input count");
  const int steps = batch.inputs.front().steps();
  for (const auto& x : batch.inputs) {
    if (x.steps() != steps) throw DimensionError("batch: non-uniform T");
    if (x.dim() != params.input_dim())
      throw DimensionError("batch: input dimension does not match d_0");
  }
  for (int y : batch.labels)
    if (y < 0 || y >= params.num_classes())
      throw Error("batch: label " + std::to_string(y) + " out of range");
}

CrossEntropy cross_entropy(const Vector& logits, int label) {
  if (label < 0 || label >= logits.size())
    throw Error("cross_entropy: label " + std::to_string(label) +
                " out of range for " + std::to_string(logits.size()) +
                " classes");
  if (!logits.allFinite()) throw Error("cross_entropy: non-finite logits");
  Eigen::Index top = 0;
  const double m = logits.maxCoeff(&top);
  const Vector e = (logits.array() - m).exp();
  const double s = e.sum();
  // e[top] is exactly 1; log1p keeps precision when the rest is tiny.
  double rest = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i)
    if (i != top) rest += e[i];
  CrossEntropy ce;
  ce.loss = (m - logits[label]) + std::log1p(rest);
  ce.grad = e / s;
  ce.grad[label] -= 1.0;
  return ce;
}

ParamGradient ParamGradient::zeros_like(const NetworkParams& params) {
  ParamGradient g;
  for (const auto& l : params.layers)
    g.layers.push_back({Matrix::Zero(l.a.rows(), l.a.cols()),
                        Vector::Zero(l.b.size()), Vector::Zero(l.theta.size())});
  g.d_w_out = Matrix::Zero(params.w_out.rows(), params.w_out.cols());
  g.d_b_out = Vector::Zero(params.b_out.size());
  return g;
}

ParamGradient& ParamGradient::operator+=(const ParamGradient& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].d_a += other.layers[l].d_a;
    layers[l].d_b += other.layers[l].d_b;
    layers[l].d_theta += other.layers[l].d_theta;
  }
  d_w_out += other.d_w_out;
  d_b_out += other.d_b_out;
  d_alpha += other.d_alpha;
  return *this;
}

ParamGradient& ParamGradient::operator*=(double s) {
  for (auto& l : layers) {
    l.d_a *= s;
    l.d_b *= s;
    l.d_theta *= s;
  }
  d_w_out *= s;
  d_b_out *= s;
  d_alpha *= s;
  return *this;
}

bool ParamGradient::all_finite() const {
  for (const auto& l : layers)
    if (!l.d_a.allFinite() || !l.d_b.allFinite() || !l.d_theta.allFinite())
      return false;
  return d_w_out.allFinite() && d_b_out.allFinite() && std::isfinite(d_alpha);
}

ParamLayout::ParamLayout(const NetworkParams& shape, TrainableGroups groups)
    : dims_(shape.dims()), classes_(shape.num_classes()), groups_(groups) {
  for (std::size_t l = 1; l < dims_.size(); ++l) {
    size_ += std::size_t(dims_[l]) * dims_[l - 1] + dims_[l];
    if (groups_.thresholds) size_ += dims_[l];
  }
  size_ += std::size_t(classes_) * dims_.back() + classes_;
  if (groups_.leak) size_ += 1;
}

namespace {

template <typename M>
void put_matrix(const M& m, Vector& w, std::size_t& k) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w[k++] = m(i, j);
}

template <typename V>
void put_vector(const V& v, Vector& w, std::size_t& k) {
  for (Eigen::Index i = 0; i < v.size(); ++i) w[k++] = v[i];
}

void get_matrix(Matrix& m, const Vector& w, std::size_t& k) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = w[k++];
}

void get_vector(Vector& v, const Vector& w, std::size_t& k) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = w[k++];
}

}  // namespace

Vector ParamLayout::pack(const NetworkParams& params) const {
  if (params.dims() != dims_ || params.num_classes() != classes_)
    throw DimensionError("ParamLayout::pack: parameter shape mismatch");
  Vector w(size_);
  std::size_t k = 0;
  for (const auto& l : params.layers) {
    put_matrix(l.a, w, k);
    put_vector(l.b, w, k);
    if (groups_.thresholds) put_vector(l.theta, w, k);
  }
  put_matrix(params.w_out, w, k);
  put_vector(params.b_out, w, k);
  if (groups_.leak) w[k++] = params.alpha;
  return w;
}

Vector ParamLayout::pack(const ParamGradient& grad) const {
  Vector w(size_);
  std::size_t k = 0;
  if (grad.layers.size() + 1 != dims_.size())
    throw DimensionError("ParamLayout::pack: gradient shape mismatch");
  for (const auto& l : grad.layers) {
    put_matrix(l.d_a, w, k);
    put_vector(l.d_b, w, k);
    if (groups_.thresholds) put_vector(l.d_theta, w, k);
  }
  put_matrix(grad.d_w_out, w, k);
  put_vector(grad.d_b_out, w, k);
  if (groups_.leak) w[k++] = grad.d_alpha;
  return w;
}

void ParamLayout::unpack(const Vector& w, NetworkParams& params) const {
  if (static_cast<std::size_t>(w.size()) != size_)
    throw DimensionError("ParamLayout::unpack: vector length mismatch");
  if (params.dims() != dims_ || params.num_classes() != classes_)
    throw DimensionError("ParamLayout::unpack: parameter shape mismatch");
  std::size_t k = 0;
  for (auto& l : params.layers) {
    get_matrix(l.a, w, k);
    get_vector(l.b, w, k);
    if (groups_.thresholds) get_vector(l.theta, w, k);
  }
  get_matrix(params.w_out, w, k);
  get_vector(params.b_out, w, k);
  if (groups_.leak) params.alpha = w[k++];
}

SampleGradient backprop(const NetworkParams& params, const SurrogateSpec& spec,
                        const FrameSequence& x, const StateTrace& trace,
                        const Vector& logit_cotangent) {
  if (!spec.smooth())
    throw Error("backprop: hard-spike forward is not differentiable");
  if (logit_cotangent.size() != params.num_classes())
    throw DimensionError("backprop: cotangent size does not match C");

  const int num_layers = params.num_layers();
  const int steps = x.steps();
  const double alpha = params.alpha;

  SampleGradient out;
  ParamGradient& g = out.params;
  g.layers.resize(num_layers);
  g.d_w_out = logit_cotangent * trace.zbar.transpose();
  g.d_b_out = logit_cotangent;

  // Cotangent arriving at z_t^{(l)} from above (readout or next layer).
  Matrix external(params.last_dim(), steps);
  external.colwise() =
      (params.w_out.transpose() * logit_cotangent) / static_cast<double>(steps);

  for (int l = num_layers - 1; l >= 0; --l) {
    const LayerParams& layer = params.layers[l];
    const Matrix& u = trace.u[l];
    const Matrix& z = trace.z[l];
    const Matrix& input = l == 0 ? x.frames : trace.z[l - 1];
    const int d = layer.out_dim();

    Matrix du(d, steps);
    Vector du_next = Vector::Zero(d);
    Vector d_theta = Vector::Zero(d);
    Vector slope(d);
    for (int t = steps - 1; t >= 0; --t) {
      // z_t reaches the loss through the layer above and through the reset
      // term -theta*z_t of u_{t+1}.
      const Vector dz = external.col(t) - layer.theta.cwiseProduct(du_next);
      for (int i = 0; i < d; ++i)
        slope[i] = surrogate_eval(spec, u(i, t) - layer.theta[i]).first;
      const Vector via_spike = slope.cwiseProduct(dz);
      Vector du_t = via_spike + alpha * du_next;
      d_theta -= via_spike;
      if (t > 0) {
        d_theta -= du_t.cwiseProduct(z.col(t - 1));
        g.d_alpha += du_t.dot(u.col(t - 1));
      }
      if (!du_t.allFinite())
        throw NonFiniteError("backprop: non-finite membrane cotangent", l + 1,
                             t + 1);
      du.col(t) = du_t;
      du_next = std::move(du_t);
    }
    g.layers[l].d_a = du * input.transpose();
    g.layers[l].d_b = du.rowwise().sum();
    g.layers[l].d_theta = std::move(d_theta);
    external = layer.a.transpose() * du;
  }
  out.input = std::move(external);
  if (!g.all_finite())
    throw NonFiniteError("backprop: non-finite parameter gradient", 0, 0);
  return out;
}

namespace {

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

void validate_indices(const Dataset& data, std::span<const std::size_t> idx,
                      const NetworkParams& params) {
  if (idx.empty()) throw Error("batch must be nonempty");
  const int steps = data.inputs.at(idx[0]).steps();
  for (std::size_t i : idx) {
    const FrameSequence& x = data.inputs.at(i);
    if (x.steps() != steps) throw DimensionError("batch: non-uniform T");
    if (x.dim() != params.input_dim())
      throw DimensionError("batch: input dimension does not match d_0");
    const int y = data.labels.at(i);
    if (y < 0 || y >= params.num_classes())
      throw Error("batch: label " + std::to_string(y) + " out of range");
  }
}

// Time-major batched trace: column t*n + i holds sample i at time t.
struct BatchTrace {
  Matrix input;
  std::vector<Matrix> u;
  std::vector<Matrix> z;
  Matrix zbar;    // d_L x n
  Matrix logits;  // C x n
};

BatchTrace forward_batch(const NetworkParams& params, const SurrogateSpec& spec,
                         const Dataset& data, std::span<const std::size_t> idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  const int steps = data.inputs[idx[0]].steps();
  BatchTrace bt;
  bt.input.resize(params.input_dim(), steps * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Matrix& f = data.inputs[idx[i]].frames;
    for (int t = 0; t < steps; ++t) bt.input.col(t * n + i) = f.col(t);
  }
  const double alpha = params.alpha;
  const Matrix* in = &bt.input;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& layer = params.layers[l];
    const int d = layer.out_dim();
    Matrix u = layer.a * (*in);
    u.colwise() += layer.b;
    Matrix z(d, steps * n);
    for (int t = 0; t < steps; ++t) {
      auto ut = u.middleCols(t * n, n);
      if (t > 0) {
        ut += alpha * u.middleCols((t - 1) * n, n);
        ut -= layer.theta.asDiagonal() * z.middleCols((t - 1) * n, n);
      }
      auto zt = z.middleCols(t * n, n);
      for (Eigen::Index j = 0; j < n; ++j)
        for (int i = 0; i < d; ++i) {
          const double arg = ut(i, j) - layer.theta[i];
          zt(i, j) = spec.smooth() ? surrogate_eval(spec, arg).value : hard_step(arg);
        }
      if (!ut.allFinite())
        throw NonFiniteError("forward: non-finite membrane state",
                             static_cast<int>(l) + 1, t + 1);
    }
    bt.u.push_back(std::move(u));
    bt.z.push_back(std::move(z));
    in = &bt.z.back();
  }
  const Matrix& top = bt.z.back();
  bt.zbar = Matrix::Zero(params.last_dim(), n);
  for (int t = 0; t < steps; ++t) bt.zbar += top.middleCols(t * n, n);
  bt.zbar /= static_cast<double>(steps);
  bt.logits = params.w_out * bt.zbar;
  bt.logits.colwise() += params.b_out;
  if (!bt.logits.allFinite())
    throw NonFiniteError("forward: non-finite logits", params.num_layers(), 0);
  return bt;
}

}  // namespace

Matrix batch_logits(const NetworkParams& params, const SurrogateSpec& spec,
                    const Dataset& data, std::span<const std::size_t> idx) {
  if (idx.empty()) return Matrix(params.num_classes(), 0);
  if (spec.smooth()) spec.validate();
  for (std::size_t i : idx)
    if (data.inputs.at(i).dim() != params.input_dim())
      throw DimensionError("batch_logits: input dimension does not match d_0");
  return forward_batch(params, spec, data, idx).logits;
}

double batch_loss(const NetworkParams& params, const SurrogateSpec& spec,
                  const Dataset& data, std::span<const std::size_t> idx) {
  if (!spec.smooth())
    throw Error("batch_loss: training objective requires a smooth surrogate");
  validate_indices(data, idx, params);
  const Matrix o = forward_batch(params, spec, data, idx).logits;
  double total = 0.0;
  for (Eigen::Index i = 0; i < o.cols(); ++i)
    total += cross_entropy(o.col(i), data.labels[idx[i]]).loss;
  return total / static_cast<double>(idx.size());
}

double batch_loss(const NetworkParams& params, const SurrogateSpec& spec,
                  const Batch& batch) {
  validate_batch(batch, params);
  const auto idx = all_indices(batch.size());
  return batch_loss(params, spec, batch, idx);
}

GradientBundle backward(const NetworkParams& params, const SurrogateSpec& spec,
                        const Dataset& data, std::span<const std::size_t> idx) {
  if (!spec.smooth())
    throw Error("backward: training requires a smooth surrogate");
  spec.validate();
  validate_indices(data, idx, params);
  const BatchTrace bt = forward_batch(params, spec, data, idx);
  const auto n = static_cast<Eigen::Index>(idx.size());
  const int steps = data.inputs[idx[0]].steps();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double alpha = params.alpha;

  GradientBundle bundle;
  ParamGradient& g = bundle.d_params;
  g.layers.resize(params.layers.size());

  // Cotangent on the logits of the mean loss.
  Matrix go(params.num_classes(), n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const CrossEntropy ce = cross_entropy(bt.logits.col(i), data.labels[idx[i]]);
    total += ce.loss;
    go.col(i) = ce.grad * inv_n;
  }
  bundle.loss = total * inv_n;
  g.d_w_out = go * bt.zbar.transpose();
  g.d_b_out = go.rowwise().sum();

  Matrix external(params.last_dim(), steps * n);
  {
    const Matrix top = (params.w_out.transpose() * go) / static_cast<double>(steps);
    for (int t = 0; t < steps; ++t) external.middleCols(t * n, n) = top;
  }
  for (int l = params.num_layers() - 1; l >= 0; --l) {
    const LayerParams& layer = params.layers[l];
    const Matrix& u = bt.u[l];
    const Matrix& z = bt.z[l];
    const Matrix& input = l == 0 ? bt.input : bt.z[l - 1];
    const int d = layer.out_dim();
    Matrix du(d, steps * n);
    Matrix du_next = Matrix::Zero(d, n);
    Matrix dz(d, n);
    Vector d_theta = Vector::Zero(d);
    for (int t = steps - 1; t >= 0; --t) {
      dz = external.middleCols(t * n, n) - layer.theta.asDiagonal() * du_next;
      auto ut = u.middleCols(t * n, n);
      for (Eigen::Index j = 0; j < n; ++j)
        for (int i = 0; i < d; ++i)
          dz(i, j) *= surrogate_eval(spec, ut(i, j) - layer.theta[i]).first;
      auto dut = du.middleCols(t * n, n);
      dut = dz + alpha * du_next;
      d_theta -= dz.rowwise().sum();
      if (t > 0) {
        d_theta -= dut.cwiseProduct(z.middleCols((t - 1) * n, n)).rowwise().sum();
        g.d_alpha += dut.cwiseProduct(u.middleCols((t - 1) * n, n)).sum();
      }
      if (!dut.allFinite())
        throw NonFiniteError("backward: non-finite membrane cotangent", l + 1, t + 1);
      du_next = dut;
    }
    g.layers[l].d_a = du * input.transpose();
    g.layers[l].d_b = du.rowwise().sum();
    g.layers[l].d_theta = std::move(d_theta);
    if (l > 0) external = layer.a.transpose() * du;
  }
  if (!g.all_finite())
    throw NonFiniteError("backward: non-finite parameter gradient", 0, 0);
  return bundle;
}

GradientBundle backward(const NetworkParams& params, const SurrogateSpec& spec,
                        const Batch& batch) {
  validate_batch(batch, params);
  const auto idx = all_indices(batch.size());
  return backward(params, spec, batch, idx);
}

std::size_t peak_bytes_estimate(const NetworkParams& shape,
                                std::size_t batch_size, int steps,
                                int param_buffers) {
  const std::size_t cols = batch_size * static_cast<std::size_t>(steps);
  std::size_t doubles = static_cast<std::size_t>(shape.input_dim()) * cols;
  std::size_t widest = 0;
  for (const auto& l : shape.layers) {
    doubles += 2 * static_cast<std::size_t>(l.out_dim()) * cols;  // u, z
    widest = std::max(widest, static_cast<std::size_t>(l.out_dim()));
  }
  doubles += 2 * widest * cols;  // du and the cotangent passed downwards
  doubles += static_cast<std::size_t>(param_buffers) * shape.parameter_count(true);
  return doubles * sizeof(double);
}

GradientBundle per_sample_gradients(const NetworkParams& params,
                                    const SurrogateSpec& spec,
                                    const Batch& batch,
                                    const ParamLayout& layout) {
  if (!spec.smooth())
    throw Error("per_sample_gradients: requires a smooth surrogate");
  validate_batch(batch, params);
  GradientBundle bundle;
  bundle.d_params = ParamGradient::zeros_like(params);
  bundle.per_sample_param_grad_norms.emplace();
  bundle.per_sample_input_grads.emplace();
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const FrameSequence& x = batch.inputs[i];
    const StateTrace trace = forward(params, spec, x);
    const CrossEntropy ce = cross_entropy(trace.logits, batch.labels[i]);
    SampleGradient sg = backprop(params, spec, x, trace, ce.grad);
    total += ce.loss;
    bundle.d_params += sg.params;
    bundle.per_sample_param_grad_norms->push_back(layout.pack(sg.params).norm());
    bundle.per_sample_input_grads->push_back(std::move(sg.input));
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  bundle.d_params *= inv_n;
  bundle.loss = total * inv_n;
  return bundle;
}

Vector central_difference(const std::function<double(const Vector&)>& f,
                          const Vector& w, double h) {
  Vector g(w.size());
  Vector probe = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    probe[i] = w[i] + h;
    const double up = f(probe);
    probe[i] = w[i] - h;
    const double down = f(probe);
    probe[i] = w[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

namespace {

void check_step(double h) {
  if (!(h >= 1e-8 && h <= 1e-4))
    throw Error("finite-difference step must lie in [1e-8, 1e-4]");
}

}  // namespace

Vector finite_difference_gradient(const NetworkParams& params,
                                  const SurrogateSpec& spec, const Batch& batch,
                                  const ParamLayout& layout, double h) {
  check_step(h);
  NetworkParams work = params;
  auto f = [&](const Vector& w) {
    layout.unpack(w, work);
    return batch_loss(work, spec, batch);
  };
  return central_difference(f, layout.pack(params), h);
}

Matrix finite_difference_input_gradient(const NetworkParams& params,
                                        const SurrogateSpec& spec,
                                        const FrameSequence& x, int label,
                                        double h) {
  check_step(h);
  const int d = x.dim();
  const int steps = x.steps();
  auto f = [&](const Vector& v) {
    FrameSequence probe(Eigen::Map<const Matrix>(v.data(), d, steps));
    return cross_entropy(logits(params, spec, probe), label).loss;
  };
  const Vector flat = Eigen::Map<const Vector>(x.frames.data(), x.frames.size());
  const Vector g = central_difference(f, flat, h);
  return Eigen::Map<const Matrix>(g.data(), d, steps);
}

}  // namespace sast
