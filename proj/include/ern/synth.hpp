// Copyright 2026 ERN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ern/audio.hpp"
#include "ern/emotion.hpp"

namespace ern::synth {

/// Sine plus white noise, deterministic per seed.
inline AudioSegment tone_segment(double freq_hz, double seconds,
                                 double amplitude, double noise_sigma,
                                 uint64_t seed, int rate = kCanonicalRate) {
  AudioSegment seg;
  seg.sample_rate = rate;
  seg.samples.resize(static_cast<size_t>(seconds * rate));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  for (size_t i = 0; i < seg.samples.size(); ++i) {
    const double t = static_cast<double>(i) / rate;
    double v = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * t);
    if (noise_sigma > 0.0) v += noise(rng);
    seg.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return seg;
}

/// One tone class per emotion label: distinct spectral band centers keep the
/// corpus linearly separable in mel space.
struct ToneClass {
  std::string label;
  double center_hz;
};

inline std::vector<ToneClass> default_tone_classes() {
  return {{"sad", 350.0}, {"angry", 900.0}, {"neutral", 2200.0}, {"happy", 5200.0}};
}

struct SynthExample {
  AudioSegment segment;
  int label = 0;
};

/// Seeded tone-plus-noise corpus: per-example frequency jitter (+-4%),
/// amplitude in [0.15, 0.9], additive noise.
inline std::vector<SynthExample> make_tone_corpus(int per_class, double seconds,
                                                  uint64_t seed) {
  const auto classes = default_tone_classes();
  std::vector<SynthExample> out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  std::uniform_real_distribution<double> amp(0.15, 0.9);
  for (int k = 0; k < static_cast<int>(classes.size()); ++k) {
    for (int i = 0; i < per_class; ++i) {
      const double freq = classes[k].center_hz * (1.0 + jitter(rng));
      out.push_back({tone_segment(freq, seconds, amp(rng), 0.02, rng()), k});
    }
  }
  return out;
}

/// Writes the corpus as <dir>/<label>/<label>_NNN.wav.
inline void write_tone_dataset(const std::string& dir, int per_class,
                               double seconds, uint64_t seed) {
  const auto classes = default_tone_classes();
  const auto corpus = make_tone_corpus(per_class, seconds, seed);
  for (const auto& cls : classes)
    std::filesystem::create_directories(std::filesystem::path(dir) / cls.label);
  std::vector<int> index(classes.size(), 0);
  for (const auto& ex : corpus) {
    const auto& label = classes[ex.label].label;
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%03d.wav", label.c_str(),
                  index[ex.label]++);
    write_wav((std::filesystem::path(dir) / label / name).string(), ex.segment);
  }
}

/// Deterministic 3-second two-tone mixtures for latency measurement.
inline AudioSegment benchmark_segment(int index, double seconds = 3.0) {
  const double f1 = 300.0 + 37.0 * (index % 13);
  const double f2 = 1100.0 + 83.0 * (index % 7);
  AudioSegment seg;
  seg.samples.resize(static_cast<size_t>(seconds * kCanonicalRate));
  std::mt19937_64 rng(0xBEEFull + index);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (size_t i = 0; i < seg.samples.size(); ++i) {
    const double t = static_cast<double>(i) / kCanonicalRate;
    const double v = 0.4 * std::sin(2.0 * std::numbers::pi * f1 * t) +
                     0.25 * std::sin(2.0 * std::numbers::pi * f2 * t) + noise(rng);
    seg.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return seg;
}

}  // namespace ern::synth
