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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sast/frames.hpp"

namespace sast {

struct Event {
  double t = 0.0;
  int coord = 0;     // spatial index in [0, spatial_dims)
  int polarity = 0;  // 0 = ON (+), 1 = OFF (-)
};

struct EventStream {
  std::vector<Event> events;
  double duration = 1.0;
  int spatial_dims = 0;
  int polarity_channels = 2;

  int frame_dim() const { return spatial_dims * polarity_channels; }
  // Sorts by timestamp (stable, so simultaneous events keep input order).
  void canonicalize();
  void validate() const;
};

// Temporal binning into T uniform bins. Per-voxel counts are clipped at c_sat
// and divided by c_sat, so every entry lies in [0,1]. Polarity channels are
// concatenated: entry index = polarity * spatial_dims + coord.
FrameSequence bin_events(const EventStream& stream, int steps, int c_sat = 1);

enum class CorruptionFamily { kEventDrop, kTimeJitter, kBinDrop };

std::string to_string(CorruptionFamily family);
CorruptionFamily corruption_family_from_string(const std::string& name);

inline constexpr std::array<double, 5> kSeverityGrid{0.0, 0.1, 0.2, 0.3, 0.4};

struct CorruptionConfig {
  CorruptionFamily family = CorruptionFamily::kEventDrop;
  double severity = 0.0;  // p
  std::uint64_t seed = 0;
  void validate() const;
};

// EventDrop zeroes each voxel independently with probability p; TimeJitter
// moves each whole frame one bin earlier or later with probability p
// (clamped at the ends, colliding frames merged by elementwise max); BinDrop
// zeroes each frame with probability p. Deterministic in (x, cfg).
FrameSequence corrupt(const FrameSequence& x, const CorruptionConfig& cfg);

// Corrupts every sample with a per-sample stream derived from cfg.seed and the
// sample index, so two models evaluated on the result see identical inputs.
Dataset corrupt_dataset(const Dataset& data, const CorruptionConfig& cfg);

struct SynthConfig {
  int classes = 2;
  int steps = 10;          // T
  int spatial = 32;        // d_0 = spatial * 2 (two polarity channels)
  int group_size = 8;      // voxels that carry each class pattern
  int shared = 0;          // of those, voxels shared by every class
  double on_rate = 1.5;    // mean events per active voxel and bin
  double off_rate = 0.05;  // background events per voxel and bin
  // Each class is active in a window of this many bins; windows are staggered
  // across classes. 0 means all bins.
  int window = 0;
  int train_per_class = 64;
  int val_per_class = 32;
  int test_per_class = 32;
  int c_sat = 1;
  std::uint64_t seed = 1;

  int frame_dim() const { return 2 * spatial; }
  void validate() const;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// One raw event stream for a class.
EventStream synth_stream(const SynthConfig& cfg, int label, std::uint64_t seed);

DatasetSplits synth_task(const SynthConfig& cfg);

// Dataset container, version 1, little-endian:
//   magic "SASTDATA" | u32 version | u64 T | u64 d_0 | u64 n | u64 C |
//   n*T*d_0 f64 frames (sample-major, then time, then coordinate) |
//   n u32 labels
inline constexpr std::uint32_t kDatasetVersion = 1;

std::string encode_dataset(const Dataset& data);
Dataset decode_dataset(const std::string& bytes);
void save_frames(const std::string& path, const Dataset& data);
Dataset load_frames(const std::string& path);

}  // namespace sast
