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

#include <cstring>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "sast/binary_io.hpp"
#include "sast/checkpoint.hpp"
#include "test_util.hpp"

namespace sast {
namespace {

using testing::random_net;

bool same_params(const NetworkParams& a, const NetworkParams& b) {
  if (a.dims() != b.dims() || a.alpha != b.alpha) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    if (a.layers[l].a != b.layers[l].a || a.layers[l].b != b.layers[l].b ||
        a.layers[l].theta != b.layers[l].theta)
      return false;
  return a.w_out == b.w_out && a.b_out == b.b_out;
}

TEST(Checkpoint, RoundTripIsExact) {
  const NetworkParams p = random_net({5, 4, 3}, 3, 0.85, 9);
  for (const auto& spec : {SurrogateSpec::arctan(2.5), SurrogateSpec::fast_sigmoid(4.0),
                           SurrogateSpec::hard()}) {
    const std::string bytes = encode_checkpoint(p, spec);
    const Checkpoint c = decode_checkpoint(bytes);
    EXPECT_TRUE(same_params(c.params, p));
    EXPECT_EQ(c.spec, spec);
    EXPECT_EQ(encode_checkpoint(c.params, c.spec), bytes);
  }
}

TEST(Checkpoint, HeaderLayout) {
  const NetworkParams p = NetworkParams::zeros({2, 3}, 2, 0.5);
  const std::string bytes = encode_checkpoint(p, SurrogateSpec::arctan(1.0));
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 8), "SASTCKPT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1);  // version, little-endian
  // header 8+4+4+4+8+8+4 + dims 2*4 + C 4, then A 3x2, b 3, theta 3, W 2x3, b_out 2
  EXPECT_EQ(bytes.size(), 8u + 4 + 4 + 4 + 8 + 8 + 4 + 8 + 4 + 8 * (6 + 3 + 3 + 6 + 2));
}

TEST(Checkpoint, RejectsCorruption) {
  const NetworkParams p = random_net({3, 2}, 2, 0.5, 1);
  const std::string good = encode_checkpoint(p, SurrogateSpec::arctan(1.0));
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = good;
  bad[8] = 7;
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  EXPECT_THROW(decode_checkpoint(good.substr(0, good.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(good + "x"), FormatError);
  EXPECT_THROW(decode_checkpoint(""), FormatError);
}

TEST(Checkpoint, RejectsInvalidParameters) {
  NetworkParams p = random_net({3, 2}, 2, 0.5, 1);
  p.layers[0].theta[0] = -1.0;
  // Encoding a parameter set with a negative threshold is refused.
  EXPECT_THROW(encode_checkpoint(p, SurrogateSpec::arctan(1.0)), Error);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "sast_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "a.sast").string();
  const NetworkParams p = random_net({4, 3}, 2, 0.9, 2);
  save_checkpoint(path, p, SurrogateSpec::arctan(3.0));
  const Checkpoint c = load_checkpoint(path);
  EXPECT_TRUE(same_params(c.params, p));
  EXPECT_THROW(load_checkpoint((dir / "missing.sast").string()), Error);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, GradientDumpAllowsNegativeThresholdSlots) {
  const NetworkParams p = random_net({3, 2}, 2, 0.5, 4);
  ParamGradient g = ParamGradient::zeros_like(p);
  g.layers[0].d_theta << -1.5, 2.0;
  g.layers[0].d_a(1, 2) = 0.25;
  g.d_alpha = -0.125;
  const ParamGradient back = decode_gradient(encode_gradient(g, SurrogateSpec::arctan(1.0)));
  EXPECT_EQ(back.layers[0].d_theta, g.layers[0].d_theta);
  EXPECT_EQ(back.layers[0].d_a, g.layers[0].d_a);
  EXPECT_EQ(back.d_alpha, g.d_alpha);
  // A gradient container is not a parameter checkpoint.
  EXPECT_THROW(decode_checkpoint(encode_gradient(g, SurrogateSpec::arctan(1.0))),
               FormatError);
}

TEST(BinaryIo, LittleEndianIntegers) {
  io::ByteWriter w;
  w.u32(0x01020304u);
  w.f64(1.0);
  const std::string s = w.take();
  ASSERT_EQ(s.size(), 12u);
  EXPECT_EQ(static_cast<unsigned char>(s[0]), 0x04);
  EXPECT_EQ(static_cast<unsigned char>(s[3]), 0x01);
  io::ByteReader r(s);
  EXPECT_EQ(r.u32(), 0x01020304u);
  EXPECT_EQ(r.f64(), 1.0);
  EXPECT_THROW(r.u32(), FormatError);
}

}  // namespace
}  // namespace sast
