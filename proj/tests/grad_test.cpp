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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "sast/grad.hpp"
#include "test_util.hpp"

namespace sast {
namespace {

using testing::random_dataset;
using testing::random_input;
using testing::random_net;

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

TEST(CrossEntropy, UniformLogits) {
  const CrossEntropy ce = cross_entropy(Vector::Zero(2), 0);
  EXPECT_NEAR(ce.loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(ce.grad[0], -0.5, 1e-15);
  EXPECT_NEAR(ce.grad[1], 0.5, 1e-15);
}

TEST(CrossEntropy, ConfidentLogitAgainstHighPrecision) {
  // log(1 + 2 e^-10) with 40-digit arithmetic.
  const double expected = 9.079573746724444627521709619970336644553e-5;
  Vector o(3);
  o << 10.0, 0.0, 0.0;
  EXPECT_NEAR(cross_entropy(o, 0).loss, expected, 1e-18);
}

TEST(CrossEntropy, LargeLogitsStayFinite) {
  Vector o(3);
  o << 1e300, -1e300, 0.0;
  const CrossEntropy ce = cross_entropy(o, 1);
  EXPECT_TRUE(std::isfinite(ce.loss));
  EXPECT_TRUE(ce.grad.allFinite());
  EXPECT_DOUBLE_EQ(ce.loss, 2e300);
}

TEST(CrossEntropy, GradientNormBounds) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 100000; ++trial) {
    const int classes = 2 + trial % 9;
    Vector o(classes);
    const double s = scale(rng);
    for (int i = 0; i < classes; ++i) o[i] = s * n(rng);
    const CrossEntropy ce = cross_entropy(o, trial % classes);
    ASSERT_LE(ce.grad.norm(), std::sqrt(2.0));
    ASSERT_LE(ce.grad.lpNorm<1>(), 2.0 + 1e-12);
    ASSERT_NEAR(ce.grad.sum(), 0.0, 1e-12);
  }
}

TEST(CrossEntropy, RejectsBadLabel) {
  EXPECT_THROW(cross_entropy(Vector::Zero(3), 3), Error);
  EXPECT_THROW(cross_entropy(Vector::Zero(3), -1), Error);
}

TEST(BatchLoss, MeanReduction) {
  const NetworkParams p = random_net({4, 5}, 3, 0.8, 2);
  const auto spec = SurrogateSpec::arctan(std::numbers::pi);
  const Dataset d = random_dataset(3, 4, 5, 3, 7);
  double sum = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    sum += cross_entropy(logits(p, spec, d.inputs[i]), d.labels[i]).loss;
  EXPECT_NEAR(batch_loss(p, spec, d), sum / 3.0, 1e-14);
  EXPECT_NEAR(batch_loss(p, spec, d.subset({1})),
              cross_entropy(logits(p, spec, d.inputs[1]), d.labels[1]).loss, 1e-14);
  EXPECT_NEAR(batch_loss(p, spec, d.subset({2, 2})), batch_loss(p, spec, d.subset({2})),
              1e-15);
}

TEST(BatchLoss, RejectsHardAndBadBatches) {
  const NetworkParams p = random_net({4, 5}, 3, 0.8, 2);
  const Dataset d = random_dataset(3, 4, 5, 3, 7);
  EXPECT_THROW(batch_loss(p, SurrogateSpec::hard(), d), Error);
  EXPECT_THROW(batch_loss(p, SurrogateSpec::arctan(1.0), Dataset{}), Error);
  Dataset bad = d;
  bad.inputs[1] = random_input(4, 6, 1);
  EXPECT_THROW(batch_loss(p, SurrogateSpec::arctan(1.0), bad), DimensionError);
}

TEST(Backward, ReadoutOnlyPath) {
  const NetworkParams p = NetworkParams::zeros({3, 2}, 2, 0.9);
  Dataset d;
  d.num_classes = 2;
  d.inputs = {random_input(3, 4, 1)};
  d.labels = {1};
  const GradientBundle g = backward(p, SurrogateSpec::arctan(1.0), d);
  EXPECT_NEAR(g.d_params.d_b_out[0], 0.5, 1e-15);
  EXPECT_NEAR(g.d_params.d_b_out[1], -0.5, 1e-15);
}

struct FdCase {
  std::vector<int> dims;
  int classes;
  int steps;
  SurrogateSpec spec;
  TrainableGroups groups;
};

void expect_matches_fd(const FdCase& c, std::uint64_t seed) {
  const NetworkParams p = random_net(c.dims, c.classes, 0.6, seed, 0.9);
  const Dataset d = random_dataset(3, c.dims[0], c.steps, c.classes, seed + 50);
  const ParamLayout layout(p, c.groups);
  const Vector exact = layout.pack(backward(p, c.spec, d).d_params);
  const Vector fd = finite_difference_gradient(p, c.spec, d, layout, 1e-6);
  ASSERT_EQ(exact.size(), fd.size());
  for (Eigen::Index i = 0; i < exact.size(); ++i)
    EXPECT_LT(rel_err(exact[i], fd[i]), 1e-5)
        << "coordinate " << i << " exact " << exact[i] << " fd " << fd[i];
}

TEST(Backward, MatchesFiniteDifferencesAllGroups) {
  TrainableGroups all{true, true};
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    expect_matches_fd({{3, 4}, 2, 5, SurrogateSpec::arctan(std::numbers::pi), all}, seed);
    expect_matches_fd({{3, 4, 3}, 3, 4, SurrogateSpec::arctan(2.0), all}, seed);
    expect_matches_fd({{2, 3, 3}, 2, 6, SurrogateSpec::fast_sigmoid(2.0), all}, seed);
  }
}

TEST(Backward, ThresholdGradientHasResetPath) {
  // With T = 1 the reset term never acts, so d theta is the spike-argument
  // path alone; with T = 2 the reset term contributes too. Both must match
  // finite differences over theta coordinates.
  for (int steps : {1, 2, 5}) {
    const NetworkParams p = random_net({2, 3}, 2, 0.7, 17, 1.2);
    const Dataset d = random_dataset(2, 2, steps, 2, 3);
    const auto spec = SurrogateSpec::arctan(std::numbers::pi);
    const GradientBundle g = backward(p, spec, d);
    for (int i = 0; i < 3; ++i) {
      NetworkParams up = p, down = p;
      up.layers[0].theta[i] += 1e-6;
      down.layers[0].theta[i] -= 1e-6;
      const double fd = (batch_loss(up, spec, d) - batch_loss(down, spec, d)) / 2e-6;
      EXPECT_LT(rel_err(g.d_params.layers[0].d_theta[i], fd), 1e-5) << "T=" << steps;
    }
  }
  // T = 1, one layer: d theta_i = -sigma'(u_i - theta_i) (W_out^T g)_i exactly.
  const NetworkParams p = random_net({2, 3}, 2, 0.7, 17, 1.2);
  const Dataset d = random_dataset(1, 2, 1, 2, 3);
  const auto spec = SurrogateSpec::arctan(std::numbers::pi);
  const StateTrace tr = forward(p, spec, d.inputs[0]);
  const CrossEntropy ce = cross_entropy(tr.logits, d.labels[0]);
  const Vector top = p.w_out.transpose() * ce.grad;
  const GradientBundle g = backward(p, spec, d);
  for (int i = 0; i < 3; ++i) {
    const double slope =
        surrogate_eval(spec, tr.u[0](i, 0) - p.layers[0].theta[i]).first;
    EXPECT_NEAR(g.d_params.layers[0].d_theta[i], -slope * top[i], 1e-14);
  }
}

TEST(Backward, BatchEqualsMeanOfPerSample) {
  const NetworkParams p = random_net({4, 6, 5}, 3, 0.8, 23);
  const Dataset d = random_dataset(7, 4, 6, 3, 24);
  const auto spec = SurrogateSpec::arctan(std::numbers::pi);
  const ParamLayout layout(p, {true, true});
  const Vector batch = layout.pack(backward(p, spec, d).d_params);
  Vector mean = Vector::Zero(batch.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    mean += layout.pack(backward(p, spec, d.subset({i})).d_params);
  mean /= static_cast<double>(d.size());
  EXPECT_LT((batch - mean).cwiseAbs().maxCoeff(), 1e-12);
  const GradientBundle ps = per_sample_gradients(p, spec, d, layout);
  EXPECT_LT((layout.pack(ps.d_params) - batch).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(ps.loss, backward(p, spec, d).loss, 1e-13);
}

TEST(Backward, SingleSampleBatchEqualsPerSample) {
  const NetworkParams p = random_net({4, 5}, 2, 0.8, 3);
  const Dataset d = random_dataset(1, 4, 5, 2, 4);
  const auto spec = SurrogateSpec::arctan(1.5);
  const ParamLayout layout(p);
  const GradientBundle ps = per_sample_gradients(p, spec, d, layout);
  const Vector g = layout.pack(backward(p, spec, d).d_params);
  EXPECT_NEAR((*ps.per_sample_param_grad_norms)[0], g.norm(), 1e-12);
}

TEST(Backward, IndexViewMatchesCopiedBatch) {
  const NetworkParams p = random_net({4, 5}, 3, 0.8, 8);
  const Dataset d = random_dataset(9, 4, 5, 3, 9);
  const auto spec = SurrogateSpec::arctan(2.0);
  const std::vector<std::size_t> idx{7, 2, 5};
  const ParamLayout layout(p);
  const Vector a = layout.pack(backward(p, spec, d, idx).d_params);
  const Vector b = layout.pack(backward(p, spec, d.subset(idx)).d_params);
  EXPECT_EQ(a, b);
  EXPECT_EQ(batch_loss(p, spec, d, idx), batch_loss(p, spec, d.subset(idx)));
}

TEST(Backward, BitIdenticalAcrossRuns) {
  const NetworkParams p = random_net({4, 5, 3}, 3, 0.8, 12);
  const Dataset d = random_dataset(5, 4, 6, 3, 13);
  const auto spec = SurrogateSpec::arctan(std::numbers::pi);
  const ParamLayout layout(p, {true, true});
  EXPECT_EQ(layout.pack(backward(p, spec, d).d_params),
            layout.pack(backward(p, spec, d).d_params));
}

TEST(Backward, InputGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const NetworkParams p = random_net({3, 4, 3}, 2, 0.7, seed, 1.0);
    const FrameSequence x = random_input(3, 5, seed + 9);
    const auto spec = SurrogateSpec::arctan(std::numbers::pi);
    Dataset d;
    d.num_classes = 2;
    d.inputs = {x};
    d.labels = {1};
    const GradientBundle ps = per_sample_gradients(p, spec, d, ParamLayout(p));
    const Matrix& exact = (*ps.per_sample_input_grads)[0];
    const Matrix fd = finite_difference_input_gradient(p, spec, x, 1, 1e-6);
    for (Eigen::Index i = 0; i < exact.size(); ++i)
      EXPECT_LT(rel_err(exact.data()[i], fd.data()[i]), 1e-5) << "entry " << i;
  }
}

TEST(BatchLogits, MatchesPerSampleForwardInEveryMode) {
  const NetworkParams p = random_net({4, 5, 3}, 3, 0.8, 40, 1.2);
  const Dataset d = random_dataset(6, 4, 7, 3, 41);
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5};
  for (const auto& spec : {SurrogateSpec::arctan(2.0), SurrogateSpec::hard()}) {
    const Matrix o = batch_logits(p, spec, d, idx);
    for (std::size_t i = 0; i < d.size(); ++i)
      EXPECT_LT((o.col(i) - logits(p, spec, d.inputs[i])).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Layout, PackUnpackRoundTrip) {
  const NetworkParams p = random_net({3, 4, 2}, 3, 0.8, 5);
  for (TrainableGroups g : {TrainableGroups{false, false}, TrainableGroups{true, false},
                            TrainableGroups{true, true}}) {
    const ParamLayout layout(p, g);
    // 12+4 + 8+2 + 6+3 always; thresholds 6; alpha 1.
    EXPECT_EQ(layout.size(), 35u + (g.thresholds ? 6u : 0u) + (g.leak ? 1u : 0u));
    NetworkParams q = NetworkParams::zeros({3, 4, 2}, 3, 0.1);
    layout.unpack(layout.pack(p), q);
    EXPECT_EQ(layout.pack(q), layout.pack(p));
    EXPECT_EQ(q.layers[1].a, p.layers[1].a);
    if (!g.thresholds) EXPECT_EQ(q.layers[0].theta, Vector::Ones(4));
  }
  EXPECT_THROW(ParamLayout(p).unpack(Vector::Zero(3), *const_cast<NetworkParams*>(&p)),
               DimensionError);
}

TEST(FiniteDifference, Quadratic) {
  const Vector g = central_difference([](const Vector& w) { return w.squaredNorm(); },
                                      Vector::Constant(1, 3.0), 1e-6);
  EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDifference, OddFunctionGivesMirroredEstimates) {
  auto f = [](const Vector& w) { return std::pow(w[0], 3) + std::sin(w[1]); };
  Vector w(2);
  w << 0.7, -1.3;
  const Vector a = central_difference(f, w, 1e-6);
  const Vector b = central_difference(f, -w, 1e-6);
  // f is odd, so its gradient is even: g(-w) = g(w) and f(-w) = -f(w).
  EXPECT_NEAR(a[0], b[0], 1e-8);
  EXPECT_NEAR(a[1], b[1], 1e-8);
  EXPECT_NEAR(f(-w), -f(w), 1e-15);
}

TEST(FiniteDifference, RejectsStepOutsideRange) {
  const NetworkParams p = random_net({2, 2}, 2, 0.5, 1);
  const Dataset d = random_dataset(2, 2, 3, 2, 1);
  EXPECT_THROW(finite_difference_gradient(p, SurrogateSpec::arctan(1.0), d,
                                          ParamLayout(p), 1e-2),
               Error);
  EXPECT_THROW(finite_difference_gradient(p, SurrogateSpec::arctan(1.0), d,
                                          ParamLayout(p), 1e-10),
               Error);
}

TEST(PeakBytes, GrowsWithParamBuffers) {
  const NetworkParams p = random_net({8, 6}, 2, 0.5, 1);
  const std::size_t a = peak_bytes_estimate(p, 4, 5, 3);
  const std::size_t b = peak_bytes_estimate(p, 4, 5, 6);
  EXPECT_EQ(b - a, 3 * p.parameter_count(true) * sizeof(double));
  // inputs 8*20, traces 2*6*20, reverse buffers 2*6*20, 3 param copies
  EXPECT_EQ(a, (8 * 20 + 240 + 240 + 3 * p.parameter_count(true)) * sizeof(double));
}

}  // namespace
}  // namespace sast
