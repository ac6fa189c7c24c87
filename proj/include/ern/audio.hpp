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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ern/error.hpp"

namespace ern {

inline constexpr int kCanonicalRate = 16000;

/// Fixed-rate mono sample buffer. Canonical segments are 16 kHz with all
/// samples in [-1, 1].
struct AudioSegment {
  std::vector<float> samples;
  int sample_rate = kCanonicalRate;
  double start_offset = 0.0;  // seconds from stream origin

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

namespace wav_detail {

inline uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

inline void append_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void append_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

}  // namespace wav_detail

/// Averages interleaved channels into a mono buffer.
inline std::vector<float> mix_to_mono(std::span<const float> interleaved,
                                      int channels) {
  if (channels <= 0) throw Error(ErrorCode::CorruptHeader, "channel count 0");
  const size_t frames = interleaved.size() / channels;
  std::vector<float> mono(frames);
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) acc += interleaved[i * channels + c];
    mono[i] = static_cast<float>(acc / channels);
  }
  return mono;
}

/// Linear-interpolation resampler. Output length is round(n * dst/src);
/// positions past the last source sample hold its value.
inline std::vector<float> resample_linear(std::span<const float> in,
                                          int src_rate, int dst_rate) {
  if (src_rate <= 0 || dst_rate <= 0)
    throw Error(ErrorCode::UsageError, "sample rates must be positive");
  if (src_rate == dst_rate) return std::vector<float>(in.begin(), in.end());
  if (in.empty()) return {};
  const size_t n_out = static_cast<size_t>(
      std::llround(static_cast<double>(in.size()) * dst_rate / src_rate));
  std::vector<float> out(n_out);
  const double step = static_cast<double>(src_rate) / dst_rate;
  for (size_t j = 0; j < n_out; ++j) {
    const double t = j * step;
    const size_t i0 = std::min(static_cast<size_t>(t), in.size() - 1);
    const size_t i1 = std::min(i0 + 1, in.size() - 1);
    const double frac = t - static_cast<double>(i0);
    out[j] = static_cast<float>((1.0 - frac) * in[i0] + frac * in[i1]);
  }
  return out;
}

/// Reads a RIFF/WAVE PCM file (8/16/24/32-bit integer or 32-bit float, mono
/// or stereo or more) and canonicalizes: mono by channel average, 16 kHz by
/// linear interpolation, amplitudes in [-1, 1].
inline AudioSegment read_wav(const std::string& path) {
  namespace wd = wav_detail;
  if (!std::filesystem::exists(path))
    throw Error(ErrorCode::NotFound, path);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::NotFound, path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error(ErrorCode::CorruptHeader, "not a RIFF/WAVE file: " + path);

  // Walk chunks for "fmt " and "data".
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const uint8_t* data = nullptr;
  uint32_t data_size = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t size = wd::read_u32(bytes.data() + pos + 4);
    pos += 8;
    if (pos + size > bytes.size())
      throw Error(ErrorCode::CorruptHeader, "truncated chunk in " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16)
        throw Error(ErrorCode::CorruptHeader, "fmt chunk too small");
      format = wd::read_u16(bytes.data() + pos);
      channels = wd::read_u16(bytes.data() + pos + 2);
      rate = wd::read_u32(bytes.data() + pos + 4);
      bits = wd::read_u16(bytes.data() + pos + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + pos;
      data_size = size;
    }
    pos += size + (size & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data == nullptr)
    throw Error(ErrorCode::CorruptHeader, "missing fmt/data chunk in " + path);
  if (channels == 0 || rate == 0)
    throw Error(ErrorCode::CorruptHeader, "bad fmt fields in " + path);

  const bool is_pcm = format == 1;
  const bool is_float = format == 3;
  if (!is_pcm && !is_float)
    throw Error(ErrorCode::UnsupportedEncoding,
                "compressed WAV (format tag " + std::to_string(format) + ")");
  if (is_pcm && bits != 8 && bits != 16 && bits != 24 && bits != 32)
    throw Error(ErrorCode::UnsupportedEncoding,
                std::to_string(bits) + "-bit PCM");
  if (is_float && bits != 32)
    throw Error(ErrorCode::UnsupportedEncoding,
                std::to_string(bits) + "-bit float");

  const size_t bytes_per_sample = bits / 8;
  const size_t n_values = data_size / bytes_per_sample;
  std::vector<float> raw(n_values);
  for (size_t i = 0; i < n_values; ++i) {
    const uint8_t* p = data + i * bytes_per_sample;
    float v = 0.0f;
    if (is_float) {
      uint32_t u = wd::read_u32(p);
      std::memcpy(&v, &u, 4);
    } else if (bits == 8) {
      v = (static_cast<int>(p[0]) - 128) / 128.0f;
    } else if (bits == 16) {
      const int16_t s = static_cast<int16_t>(wd::read_u16(p));
      v = s / 32768.0f;
    } else if (bits == 24) {
      int32_t s = static_cast<int32_t>(p[0]) | (static_cast<int32_t>(p[1]) << 8) |
                  (static_cast<int32_t>(p[2]) << 16);
      if (s & 0x800000) s |= ~0xffffff;  // sign-extend
      v = static_cast<float>(s) / 8388608.0f;
    } else {  // 32-bit int
      const int32_t s = static_cast<int32_t>(wd::read_u32(p));
      v = static_cast<float>(s / 2147483648.0);
    }
    raw[i] = v;
  }

  std::vector<float> mono =
      channels == 1 ? std::move(raw) : mix_to_mono(raw, channels);
  std::vector<float> canon =
      resample_linear(mono, static_cast<int>(rate), kCanonicalRate);
  for (float& v : canon) v = std::clamp(v, -1.0f, 1.0f);

  AudioSegment seg;
  seg.samples = std::move(canon);
  seg.sample_rate = kCanonicalRate;
  return seg;
}

/// Writes a mono segment as 16-bit PCM WAV. Samples encode as
/// clamp(round(x * 32768), -32768, 32767) so that a read-back differs by at
/// most 1/32768 from the original.
inline void write_wav(const std::string& path, const AudioSegment& seg) {
  namespace wd = wav_detail;
  std::vector<uint8_t> out;
  const uint32_t data_size = static_cast<uint32_t>(seg.samples.size() * 2);
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  wd::append_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  wd::append_u32(out, 16);
  wd::append_u16(out, 1);  // PCM
  wd::append_u16(out, 1);  // mono
  wd::append_u32(out, static_cast<uint32_t>(seg.sample_rate));
  wd::append_u32(out, static_cast<uint32_t>(seg.sample_rate * 2));
  wd::append_u16(out, 2);   // block align
  wd::append_u16(out, 16);  // bits
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  wd::append_u32(out, data_size);
  for (float v : seg.samples) {
    const long q = std::lround(std::clamp(v, -1.0f, 1.0f) * 32768.0f);
    wd::append_u16(out, static_cast<uint16_t>(
                            std::clamp<long>(q, -32768, 32767)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::NotFound, "cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
}

/// Splits a sample stream into fixed-length windows: full segments start at
/// k * hop; if samples remain past the last full segment, one zero-padded
/// tail segment is appended at the next hop offset. Sub-window streams yield
/// a single padded segment.
inline std::vector<AudioSegment> segment_stream(std::span<const float> samples,
                                                double segment_seconds = 3.0,
                                                double hop_seconds = 3.0,
                                                int rate = kCanonicalRate) {
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no samples");
  if (segment_seconds <= 0 || hop_seconds <= 0)
    throw Error(ErrorCode::UsageError, "segment/hop must be positive");
  if (hop_seconds > segment_seconds)
    throw Error(ErrorCode::UsageError, "hop must not exceed segment length");

  const size_t seg_len = static_cast<size_t>(std::llround(segment_seconds * rate));
  const size_t hop = static_cast<size_t>(std::llround(hop_seconds * rate));
  const size_t n = samples.size();

  std::vector<AudioSegment> out;
  size_t n_full = n >= seg_len ? (n - seg_len) / hop + 1 : 0;
  for (size_t k = 0; k < n_full; ++k) {
    AudioSegment seg;
    seg.samples.assign(samples.begin() + k * hop,
                       samples.begin() + k * hop + seg_len);
    seg.sample_rate = rate;
    seg.start_offset = static_cast<double>(k) * hop_seconds;
    out.push_back(std::move(seg));
  }
  const size_t covered = n_full > 0 ? (n_full - 1) * hop + seg_len : 0;
  if (covered < n) {
    AudioSegment seg;
    seg.samples.assign(samples.begin() + n_full * hop, samples.end());
    seg.samples.resize(seg_len, 0.0f);
    seg.sample_rate = rate;
    seg.start_offset = static_cast<double>(n_full) * hop_seconds;
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace ern
