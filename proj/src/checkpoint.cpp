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

#include "sast/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "sast/binary_io.hpp"

namespace sast {

namespace io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("write failed for " + path);
}

}  // namespace io

namespace {

constexpr std::string_view kMagic = "SASTCKPT";
constexpr std::uint32_t kKindParams = 0;
constexpr std::uint32_t kKindGradient = 1;

std::uint32_t family_code(SurrogateFamily f) {
  switch (f) {
    case SurrogateFamily::kArctan:
      return 0;
    case SurrogateFamily::kFastSigmoid:
      return 1;
    case SurrogateFamily::kHard:
      return 2;
  }
  return 0;
}

SurrogateFamily family_from_code(std::uint32_t c) {
  switch (c) {
    case 0:
      return SurrogateFamily::kArctan;
    case 1:
      return SurrogateFamily::kFastSigmoid;
    case 2:
      return SurrogateFamily::kHard;
  }
  throw FormatError("checkpoint: unknown surrogate family code " +
                    std::to_string(c));
}

void write_matrix(io::ByteWriter& w, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
}

void write_vector(io::ByteWriter& w, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v[i]);
}

Matrix read_matrix(io::ByteReader& r, int rows, int cols) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = r.f64();
  return m;
}

Vector read_vector(io::ByteReader& r, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = r.f64();
  return v;
}

// Shared layout for parameters and gradient dumps.
struct Blocks {
  std::vector<int> dims;
  int classes = 0;
  double alpha = 0.0;
  SurrogateSpec spec;
  std::vector<Matrix> a;
  std::vector<Vector> b;
  std::vector<Vector> theta;
  Matrix w_out;
  Vector b_out;
};

std::string encode_blocks(std::uint32_t kind, const Blocks& bl) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(kind);
  w.u32(family_code(bl.spec.family));
  w.f64(bl.spec.slope_k);
  w.f64(bl.alpha);
  w.u32(static_cast<std::uint32_t>(bl.a.size()));
  for (int d : bl.dims) w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(bl.classes));
  for (std::size_t l = 0; l < bl.a.size(); ++l) {
    write_matrix(w, bl.a[l]);
    write_vector(w, bl.b[l]);
    write_vector(w, bl.theta[l]);
  }
  write_matrix(w, bl.w_out);
  write_vector(w, bl.b_out);
  return w.take();
}

Blocks decode_blocks(const std::string& bytes, std::uint32_t expected_kind) {
  io::ByteReader r(bytes);
  if (r.bytes(kMagic.size()) != kMagic)
    throw FormatError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " +
                      std::to_string(version));
  const std::uint32_t kind = r.u32();
  if (kind != expected_kind)
    throw FormatError("checkpoint: unexpected kind " + std::to_string(kind));
  Blocks bl;
  bl.spec.family = family_from_code(r.u32());
  bl.spec.slope_k = r.f64();
  bl.alpha = r.f64();
  const std::uint32_t num_layers = r.u32();
  if (num_layers == 0 || num_layers > 1024)
    throw FormatError("checkpoint: implausible layer count");
  for (std::uint32_t l = 0; l <= num_layers; ++l) {
    const std::uint32_t d = r.u32();
    if (d == 0 || d > (1u << 24)) throw FormatError("checkpoint: bad dimension");
    bl.dims.push_back(static_cast<int>(d));
  }
  bl.classes = static_cast<int>(r.u32());
  if (bl.classes <= 0 || bl.classes > (1 << 24))
    throw FormatError("checkpoint: bad class count");
  for (std::uint32_t l = 1; l <= num_layers; ++l) {
    bl.a.push_back(read_matrix(r, bl.dims[l], bl.dims[l - 1]));
    bl.b.push_back(read_vector(r, bl.dims[l]));
    bl.theta.push_back(read_vector(r, bl.dims[l]));
  }
  bl.w_out = read_matrix(r, bl.classes, bl.dims.back());
  bl.b_out = read_vector(r, bl.classes);
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  return bl;
}

}  // namespace

std::string encode_checkpoint(const NetworkParams& params,
                              const SurrogateSpec& spec) {
  params.validate();
  Blocks bl;
  bl.dims = params.dims();
  bl.classes = params.num_classes();
  bl.alpha = params.alpha;
  bl.spec = spec;
  for (const auto& l : params.layers) {
    bl.a.push_back(l.a);
    bl.b.push_back(l.b);
    bl.theta.push_back(l.theta);
  }
  bl.w_out = params.w_out;
  bl.b_out = params.b_out;
  return encode_blocks(kKindParams, bl);
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Blocks bl = decode_blocks(bytes, kKindParams);
  Checkpoint ck;
  ck.spec = bl.spec;
  ck.params.alpha = bl.alpha;
  for (std::size_t l = 0; l < bl.a.size(); ++l)
    ck.params.layers.push_back(
        {std::move(bl.a[l]), std::move(bl.b[l]), std::move(bl.theta[l])});
  ck.params.w_out = std::move(bl.w_out);
  ck.params.b_out = std::move(bl.b_out);
  try {
    ck.params.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint: invalid parameters: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const SurrogateSpec& spec) {
  io::write_file(path, encode_checkpoint(params, spec));
}

Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(io::read_file(path));
}

std::string encode_gradient(const ParamGradient& grad,
                            const SurrogateSpec& spec) {
  Blocks bl;
  if (grad.layers.empty()) throw Error("encode_gradient: empty gradient");
  bl.dims.push_back(static_cast<int>(grad.layers.front().d_a.cols()));
  for (const auto& l : grad.layers) {
    bl.dims.push_back(static_cast<int>(l.d_a.rows()));
    bl.a.push_back(l.d_a);
    bl.b.push_back(l.d_b);
    bl.theta.push_back(l.d_theta);
  }
  bl.classes = static_cast<int>(grad.d_w_out.rows());
  bl.alpha = grad.d_alpha;
  bl.spec = spec;
  bl.w_out = grad.d_w_out;
  bl.b_out = grad.d_b_out;
  return encode_blocks(kKindGradient, bl);
}

ParamGradient decode_gradient(const std::string& bytes) {
  Blocks bl = decode_blocks(bytes, kKindGradient);
  ParamGradient g;
  for (std::size_t l = 0; l < bl.a.size(); ++l)
    g.layers.push_back(
        {std::move(bl.a[l]), std::move(bl.b[l]), std::move(bl.theta[l])});
  g.d_w_out = std::move(bl.w_out);
  g.d_b_out = std::move(bl.b_out);
  g.d_alpha = bl.alpha;
  return g;
}

void save_gradient(const std::string& path, const ParamGradient& grad,
                   const SurrogateSpec& spec) {
  io::write_file(path, encode_gradient(grad, spec));
}

}  // namespace sast
