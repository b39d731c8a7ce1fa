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

#include "sast/events.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sast/binary_io.hpp"

namespace sast {

void EventStream::canonicalize() {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
}

void EventStream::validate() const {
  if (!(duration > 0.0)) throw Error("event stream: duration must be positive");
  if (spatial_dims < 1 || polarity_channels < 1)
    throw Error("event stream: empty sensor geometry");
  for (const auto& e : events) {
    if (!(e.t >= 0.0 && e.t <= duration))
      throw Error("event stream: timestamp outside [0, duration]");
    if (e.coord < 0 || e.coord >= spatial_dims)
      throw Error("event stream: coordinate out of range");
    if (e.polarity < 0 || e.polarity >= polarity_channels)
      throw Error("event stream: polarity out of range");
  }
}

FrameSequence bin_events(const EventStream& stream, int steps, int c_sat) {
  if (steps < 1) throw Error("bin_events: T must be >= 1");
  if (c_sat < 1) throw Error("bin_events: saturation count must be >= 1");
  stream.validate();
  Matrix counts = Matrix::Zero(stream.frame_dim(), steps);
  for (const auto& e : stream.events) {
    int bin = static_cast<int>(std::floor(e.t / stream.duration * steps));
    bin = std::clamp(bin, 0, steps - 1);
    counts(e.polarity * stream.spatial_dims + e.coord, bin) += 1.0;
  }
  const double sat = static_cast<double>(c_sat);
  return FrameSequence(counts.cwiseMin(sat) / sat);
}

std::string to_string(CorruptionFamily family) {
  switch (family) {
    case CorruptionFamily::kEventDrop:
      return "event_drop";
    case CorruptionFamily::kTimeJitter:
      return "time_jitter";
    case CorruptionFamily::kBinDrop:
      return "bin_drop";
  }
  return "unknown";
}

CorruptionFamily corruption_family_from_string(const std::string& name) {
  if (name == "event_drop") return CorruptionFamily::kEventDrop;
  if (name == "time_jitter") return CorruptionFamily::kTimeJitter;
  if (name == "bin_drop") return CorruptionFamily::kBinDrop;
  throw Error("unknown corruption family: " + name);
}

void CorruptionConfig::validate() const {
  if (!(severity >= 0.0 && severity <= 1.0))
    throw Error("corruption severity must lie in [0,1]");
}

FrameSequence corrupt(const FrameSequence& x, const CorruptionConfig& cfg) {
  cfg.validate();
  if (cfg.severity == 0.0) return x;
  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution hit(cfg.severity);
  const int steps = x.steps();
  switch (cfg.family) {
    case CorruptionFamily::kEventDrop: {
      FrameSequence out = x;
      for (int t = 0; t < steps; ++t)
        for (int i = 0; i < x.dim(); ++i)
          if (hit(rng)) out.frames(i, t) = 0.0;
      return out;
    }
    case CorruptionFamily::kTimeJitter: {
      FrameSequence out = FrameSequence::zeros(x.dim(), steps);
      std::bernoulli_distribution later(0.5);
      for (int t = 0; t < steps; ++t) {
        int dest = t;
        if (hit(rng)) dest = std::clamp(t + (later(rng) ? 1 : -1), 0, steps - 1);
        out.frames.col(dest) = out.frames.col(dest).cwiseMax(x.frames.col(t));
      }
      return out;
    }
    case CorruptionFamily::kBinDrop: {
      FrameSequence out = x;
      for (int t = 0; t < steps; ++t)
        if (hit(rng)) out.frames.col(t).setZero();
      return out;
    }
  }
  throw Error("corrupt: unknown corruption family");
}

Dataset corrupt_dataset(const Dataset& data, const CorruptionConfig& cfg) {
  Dataset out;
  out.num_classes = data.num_classes;
  out.labels = data.labels;
  out.inputs.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CorruptionConfig c = cfg;
    c.seed = cfg.seed * 0x9e3779b97f4a7c15ULL + (i + 1) * 0xbf58476d1ce4e5b9ULL;
    out.inputs.push_back(corrupt(data.inputs[i], c));
  }
  return out;
}

void SynthConfig::validate() const {
  if (classes < 2) throw Error("synth task: need at least two classes");
  if (steps < 1 || spatial < 1) throw Error("synth task: empty geometry");
  if (group_size < 1 || group_size > frame_dim())
    throw Error("synth task: group size out of range");
  if (shared < 0 || shared > group_size)
    throw Error("synth task: shared voxels exceed group size");
  if (!(on_rate > 0.0)) throw Error("synth task: on_rate must be positive");
  if (!(off_rate >= 0.0)) throw Error("synth task: off_rate must be nonnegative");
  if (window < 0 || window > steps) throw Error("synth task: bad window");
  if (train_per_class < 1) throw Error("synth task: empty training split");
  if (c_sat < 1) throw Error("synth task: c_sat must be >= 1");
}

namespace {

// Voxel groups per class: the first `shared` voxels are common to all
// classes, the rest are disjoint (wrapping if the sensor is too small).
std::vector<std::vector<int>> class_groups(const SynthConfig& cfg) {
  std::vector<int> perm(cfg.frame_dim());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0x6a09e667f3bcc909ULL);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<int>> groups(cfg.classes);
  std::size_t next = static_cast<std::size_t>(cfg.shared);
  for (int c = 0; c < cfg.classes; ++c) {
    for (int s = 0; s < cfg.shared; ++s) groups[c].push_back(perm[s]);
    for (int k = cfg.shared; k < cfg.group_size; ++k) {
      groups[c].push_back(perm[next % perm.size()]);
      ++next;
    }
  }
  return groups;
}

std::pair<int, int> class_window(const SynthConfig& cfg, int label) {
  if (cfg.window == 0) return {0, cfg.steps};
  const int span = cfg.steps - cfg.window;
  const int start = cfg.classes > 1 ? (span * label) / (cfg.classes - 1) : 0;
  return {start, start + cfg.window};
}

}  // namespace

EventStream synth_stream(const SynthConfig& cfg, int label, std::uint64_t seed) {
  cfg.validate();
  if (label < 0 || label >= cfg.classes) throw Error("synth_stream: bad label");
  const auto groups = class_groups(cfg);
  const auto [start, stop] = class_window(cfg, label);
  EventStream s;
  s.duration = static_cast<double>(cfg.steps);
  s.spatial_dims = cfg.spatial;
  s.polarity_channels = 2;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> within(0.0, 1.0);
  std::poisson_distribution<int> on(cfg.on_rate);
  auto emit = [&](int voxel, int bin, int count) {
    for (int k = 0; k < count; ++k) {
      const double t = std::min(bin + within(rng), s.duration);
      s.events.push_back({t, voxel % cfg.spatial, voxel / cfg.spatial});
    }
  };
  for (int voxel : groups[label])
    for (int bin = start; bin < stop; ++bin) emit(voxel, bin, on(rng));
  if (cfg.off_rate > 0.0) {
    std::poisson_distribution<int> off(cfg.off_rate);
    for (int voxel = 0; voxel < cfg.frame_dim(); ++voxel)
      for (int bin = 0; bin < cfg.steps; ++bin) emit(voxel, bin, off(rng));
  }
  s.canonicalize();
  return s;
}

DatasetSplits synth_task(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 seeder(cfg.seed);
  auto make_split = [&](int per_class) {
    Dataset d;
    d.num_classes = cfg.classes;
    for (int k = 0; k < per_class; ++k)
      for (int c = 0; c < cfg.classes; ++c) {
        d.inputs.push_back(bin_events(synth_stream(cfg, c, seeder()), cfg.steps, cfg.c_sat));
        d.labels.push_back(c);
      }
    return d;
  };
  DatasetSplits s;
  s.train = make_split(cfg.train_per_class);
  s.val = make_split(cfg.val_per_class);
  s.test = make_split(cfg.test_per_class);
  return s;
}

namespace {
constexpr std::string_view kDataMagic = "SASTDATA";
}

std::string encode_dataset(const Dataset& data) {
  if (data.labels.size() != data.inputs.size())
    throw DimensionError("encode_dataset: label count mismatch");
  io::ByteWriter w;
  w.bytes(kDataMagic);
  w.u32(kDatasetVersion);
  const int steps = data.steps();
  const int dim = data.dim();
  w.u64(static_cast<std::uint64_t>(steps));
  w.u64(static_cast<std::uint64_t>(dim));
  w.u64(data.size());
  w.u64(static_cast<std::uint64_t>(data.num_classes));
  for (const auto& x : data.inputs) {
    if (x.steps() != steps || x.dim() != dim)
      throw DimensionError("encode_dataset: non-uniform sample shape");
    for (int t = 0; t < steps; ++t)
      for (int i = 0; i < dim; ++i) w.f64(x.frames(i, t));
  }
  for (int y : data.labels) w.u32(static_cast<std::uint32_t>(y));
  return w.take();
}

Dataset decode_dataset(const std::string& bytes) {
  io::ByteReader r(bytes);
  if (r.bytes(kDataMagic.size()) != kDataMagic) throw FormatError("dataset: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion)
    throw FormatError("dataset: unsupported version " + std::to_string(version));
  const std::uint64_t steps = r.u64(), dim = r.u64(), n = r.u64(), classes = r.u64();
  if (steps == 0 || dim == 0 || classes == 0 || classes > (1u << 24))
    throw FormatError("dataset: bad header");
  if (n * steps * dim * 8 + n * 4 + 44 != bytes.size())
    throw FormatError("dataset: size does not match header");
  Dataset d;
  d.num_classes = static_cast<int>(classes);
  d.inputs.reserve(n);
  for (std::uint64_t s = 0; s < n; ++s) {
    FrameSequence x = FrameSequence::zeros(static_cast<int>(dim), static_cast<int>(steps));
    for (std::uint64_t t = 0; t < steps; ++t)
      for (std::uint64_t i = 0; i < dim; ++i) {
        const double v = r.f64();
        if (!(v >= 0.0 && v <= 1.0))
          throw FormatError("dataset: value " + std::to_string(v) +
                            " outside [0,1] at sample " + std::to_string(s) +
                            ", t=" + std::to_string(t) + ", coord " + std::to_string(i));
        x.frames(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = v;
      }
    d.inputs.push_back(std::move(x));
  }
  for (std::uint64_t s = 0; s < n; ++s) {
    const std::uint32_t y = r.u32();
    if (y >= classes)
      throw FormatError("dataset: label out of range at sample " + std::to_string(s));
    d.labels.push_back(static_cast<int>(y));
  }
  return d;
}

void save_frames(const std::string& path, const Dataset& data) {
  io::write_file(path, encode_dataset(data));
}

Dataset load_frames(const std::string& path) {
  return decode_dataset(io::read_file(path));
}

}  // namespace sast
