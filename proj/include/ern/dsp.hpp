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
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "ern/audio.hpp"
#include "ern/error.hpp"
#include "ern/fft.hpp"

namespace ern {

struct StftConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;

  int window_samples(int rate) const {
    return static_cast<int>(std::lround(window_ms * rate / 1000.0));
  }
  int hop_samples(int rate) const {
    return static_cast<int>(std::lround(hop_ms * rate / 1000.0));
  }
};

struct MelConfig {
  int n_mels = 64;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-10;
};

/// Frames fully inside the segment, no padding.
inline int frame_count(size_t n_samples, int window, int hop) {
  if (n_samples < static_cast<size_t>(window)) return 0;
  return static_cast<int>((n_samples - window) / hop) + 1;
}

/// Periodic Hann window: 0.5 * (1 - cos(2*pi*n/N)).
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / n));
  return w;
}

/// Power spectrogram, [fft_size/2 + 1] bins by n_frames. Stored frame-major
/// so that per-frame filterbank application is contiguous.
struct PowerSpectrogram {
  int n_bins = 0;
  int n_frames = 0;
  std::vector<double> p;  // [frame][bin]

  double at(int bin, int frame) const { return p[size_t(frame) * n_bins + bin]; }
  const double* frame(int t) const { return p.data() + size_t(t) * n_bins; }
};

/// |DFT(hann . frame)|^2 per frame at hop intervals.
inline PowerSpectrogram stft_power(const AudioSegment& seg,
                                   const StftConfig& cfg = {}) {
  const int win = cfg.window_samples(seg.sample_rate);
  const int hop = cfg.hop_samples(seg.sample_rate);
  if (seg.samples.size() < static_cast<size_t>(win))
    throw Error(ErrorCode::SegmentTooShort,
                "need at least " + std::to_string(win) + " samples");
  if (cfg.fft_size < win)
    throw Error(ErrorCode::UsageError, "fft_size smaller than window");

  const std::vector<double> window = hann_window(win);
  PowerSpectrogram out;
  out.n_bins = cfg.fft_size / 2 + 1;
  out.n_frames = frame_count(seg.samples.size(), win, hop);
  out.p.resize(size_t(out.n_frames) * out.n_bins);

  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (int t = 0; t < out.n_frames; ++t) {
    const float* src = seg.samples.data() + size_t(t) * hop;
    for (int i = 0; i < win; ++i) buf[i] = window[i] * src[i];
    std::fill(buf.begin() + win, buf.end(), std::complex<double>(0.0));
    fft_inplace(buf);
    double* dst = out.p.data() + size_t(t) * out.n_bins;
    for (int k = 0; k < out.n_bins; ++k) dst[k] = std::norm(buf[k]);
  }
  return out;
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Triangular mel filterbank on the HTK scale, no area normalization.
/// Row m spans [edge m, edge m+2] of n_mels+2 equally-mel-spaced edges.
struct MelFilterbank {
  int n_mels = 0;
  int n_bins = 0;
  std::vector<double> weights;      // [mel][bin], dense
  std::vector<int> band_begin;      // first nonzero bin per filter
  std::vector<int> band_end;        // one past last nonzero bin
  std::vector<double> center_hz;    // peak frequency per filter

  static MelFilterbank build(const MelConfig& mel, int fft_size, int rate) {
    if (mel.n_mels < 1) throw Error(ErrorCode::UsageError, "n_mels must be >= 1");
    if (!(mel.f_min < mel.f_max) || mel.f_max > rate / 2.0)
      throw Error(ErrorCode::UsageError, "need f_min < f_max <= rate/2");

    MelFilterbank fb;
    fb.n_mels = mel.n_mels;
    fb.n_bins = fft_size / 2 + 1;
    fb.weights.assign(size_t(fb.n_mels) * fb.n_bins, 0.0);
    fb.band_begin.assign(fb.n_mels, fb.n_bins);
    fb.band_end.assign(fb.n_mels, 0);
    fb.center_hz.resize(fb.n_mels);

    const double mel_lo = hz_to_mel(mel.f_min);
    const double mel_hi = hz_to_mel(mel.f_max);
    std::vector<double> edges(mel.n_mels + 2);
    for (int i = 0; i < mel.n_mels + 2; ++i)
      edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (mel.n_mels + 1));

    for (int m = 0; m < fb.n_mels; ++m) {
      const double f0 = edges[m], f1 = edges[m + 1], f2 = edges[m + 2];
      fb.center_hz[m] = f1;
      for (int k = 0; k < fb.n_bins; ++k) {
        const double fk = static_cast<double>(k) * rate / fft_size;
        double w = 0.0;
        if (fk > f0 && fk < f1)
          w = (fk - f0) / (f1 - f0);
        else if (fk >= f1 && fk < f2)
          w = (f2 - fk) / (f2 - f1);
        if (w > 0.0) {
          fb.weights[size_t(m) * fb.n_bins + k] = w;
          fb.band_begin[m] = std::min(fb.band_begin[m], k);
          fb.band_end[m] = std::max(fb.band_end[m], k + 1);
        }
      }
      if (fb.band_begin[m] > fb.band_end[m]) fb.band_begin[m] = fb.band_end[m];
    }
    return fb;
  }
};

/// Time-frequency feature block, [n_mels (rows), n_frames, n_channels],
/// channels last.
struct FeatureTensor {
  int n_rows = 0;
  int n_frames = 0;
  int n_channels = 1;
  std::vector<float> data;          // [row][frame][channel]
  std::vector<float> frame_times;   // frame start, seconds

  float& at(int r, int t, int c = 0) {
    return data[(size_t(r) * n_frames + t) * n_channels + c];
  }
  float at(int r, int t, int c = 0) const {
    return data[(size_t(r) * n_frames + t) * n_channels + c];
  }
};

/// Log-mel spectrogram (natural log, floored): shape [n_mels, T', 1].
inline FeatureTensor mel_spectrogram(const AudioSegment& seg,
                                     const StftConfig& stft = {},
                                     const MelConfig& mel = {}) {
  const PowerSpectrogram power = stft_power(seg, stft);
  const MelFilterbank fb = MelFilterbank::build(mel, stft.fft_size, seg.sample_rate);

  FeatureTensor out;
  out.n_rows = mel.n_mels;
  out.n_frames = power.n_frames;
  out.n_channels = 1;
  out.data.resize(size_t(out.n_rows) * out.n_frames);
  out.frame_times.resize(out.n_frames);
  const int hop = stft.hop_samples(seg.sample_rate);
  for (int t = 0; t < out.n_frames; ++t)
    out.frame_times[t] = static_cast<float>(
        seg.start_offset + static_cast<double>(t) * hop / seg.sample_rate);

  for (int m = 0; m < fb.n_mels; ++m) {
    const double* w = fb.weights.data() + size_t(m) * fb.n_bins;
    for (int t = 0; t < out.n_frames; ++t) {
      const double* p = power.frame(t);
      double acc = 0.0;
      for (int k = fb.band_begin[m]; k < fb.band_end[m]; ++k) acc += w[k] * p[k];
      out.at(m, t) = static_cast<float>(std::log(std::max(acc, mel.log_floor)));
    }
  }
  return out;
}

/// Orthonormal DCT-II over the mel axis, first n_coeffs rows kept.
/// Returns [n_coeffs][n_frames] row-major.
struct MfccMatrix {
  int n_coeffs = 0;
  int n_frames = 0;
  std::vector<double> data;  // [coeff][frame]

  double at(int c, int t) const { return data[size_t(c) * n_frames + t]; }
};

inline MfccMatrix mfcc(const FeatureTensor& mel_tensor, int n_coeffs = 13) {
  if (n_coeffs > mel_tensor.n_rows)
    throw Error(ErrorCode::TooManyCoefficients,
                std::to_string(n_coeffs) + " > " + std::to_string(mel_tensor.n_rows));
  const int n = mel_tensor.n_rows;
  MfccMatrix out;
  out.n_coeffs = n_coeffs;
  out.n_frames = mel_tensor.n_frames;
  out.data.resize(size_t(n_coeffs) * out.n_frames);
  const double a0 = std::sqrt(1.0 / n);
  const double an = std::sqrt(2.0 / n);
  for (int c = 0; c < n_coeffs; ++c) {
    for (int t = 0; t < out.n_frames; ++t) {
      double acc = 0.0;
      for (int m = 0; m < n; ++m)
        acc += mel_tensor.at(m, t) *
               std::cos(std::numbers::pi * c * (m + 0.5) / n);
      out.data[size_t(c) * out.n_frames + t] = (c == 0 ? a0 : an) * acc;
    }
  }
  return out;
}

/// Power-weighted mean frequency per frame; frames with total power below
/// 1e-12 return 0.
inline std::vector<double> spectral_centroid(const PowerSpectrogram& power,
                                             int rate, int fft_size) {
  std::vector<double> out(power.n_frames);
  for (int t = 0; t < power.n_frames; ++t) {
    const double* p = power.frame(t);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < power.n_bins; ++k) {
      num += static_cast<double>(k) * rate / fft_size * p[k];
      den += p[k];
    }
    out[t] = den < 1e-12 ? 0.0 : num / den;
  }
  return out;
}

/// Sign changes per frame over (window - 1) sample pairs; zero counts as
/// positive.
inline std::vector<double> zero_crossing_rate(const AudioSegment& seg,
                                              const StftConfig& cfg = {}) {
  const int win = cfg.window_samples(seg.sample_rate);
  const int hop = cfg.hop_samples(seg.sample_rate);
  if (seg.samples.size() < static_cast<size_t>(win))
    throw Error(ErrorCode::SegmentTooShort,
                "need at least " + std::to_string(win) + " samples");
  const int n_frames = frame_count(seg.samples.size(), win, hop);
  std::vector<double> out(n_frames);
  for (int t = 0; t < n_frames; ++t) {
    const float* f = seg.samples.data() + size_t(t) * hop;
    int crossings = 0;
    for (int i = 1; i < win; ++i) {
      const bool prev_pos = f[i - 1] >= 0.0f;
      const bool cur_pos = f[i] >= 0.0f;
      if (prev_pos != cur_pos) ++crossings;
    }
    out[t] = static_cast<double>(crossings) / (win - 1);
  }
  return out;
}

enum class InputMode { mel_only, stacked };

/// Assembles the classifier input. mel_only: [64, T', 1] log-mel. stacked:
/// channel 0 log-mel, channel 1 MFCC rows zero-padded to n_mels, channel 2
/// split rows: 0..n/2-1 carry the per-segment min-max normalized centroid,
/// n/2..n-1 carry the raw ZCR.
inline FeatureTensor build_input_tensor(const AudioSegment& seg,
                                        InputMode mode = InputMode::mel_only,
                                        const StftConfig& stft = {},
                                        const MelConfig& mel = {}) {
  FeatureTensor logmel = mel_spectrogram(seg, stft, mel);
  if (mode == InputMode::mel_only) return logmel;

  const MfccMatrix coeffs = mfcc(logmel, 13);
  const PowerSpectrogram power = stft_power(seg, stft);
  const std::vector<double> centroid =
      spectral_centroid(power, seg.sample_rate, stft.fft_size);
  const std::vector<double> zcr = zero_crossing_rate(seg, stft);

  double c_min = 0.0, c_max = 0.0;
  if (!centroid.empty()) {
    c_min = *std::min_element(centroid.begin(), centroid.end());
    c_max = *std::max_element(centroid.begin(), centroid.end());
  }
  const double c_range = c_max - c_min;

  FeatureTensor out;
  out.n_rows = logmel.n_rows;
  out.n_frames = logmel.n_frames;
  out.n_channels = 3;
  out.data.assign(size_t(out.n_rows) * out.n_frames * 3, 0.0f);
  out.frame_times = logmel.frame_times;
  const int half = out.n_rows / 2;
  for (int t = 0; t < out.n_frames; ++t) {
    // constant centroid normalizes to 0
    const float c_norm = c_range > 0.0
        ? static_cast<float>((centroid[t] - c_min) / c_range) : 0.0f;
    const float z = static_cast<float>(zcr[t]);
    for (int r = 0; r < out.n_rows; ++r) {
      out.at(r, t, 0) = logmel.at(r, t);
      out.at(r, t, 1) =
          r < coeffs.n_coeffs ? static_cast<float>(coeffs.at(r, t)) : 0.0f;
      out.at(r, t, 2) = r < half ? c_norm : z;
    }
  }
  return out;
}

}  // namespace ern
