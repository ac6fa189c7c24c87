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

#include "ern/dsp.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "gtest/gtest.h"

namespace {

using ern::AudioSegment;
using ern::Error;
using ern::ErrorCode;
using ern::FeatureTensor;
using ern::MelConfig;
using ern::StftConfig;

constexpr double kPi = std::numbers::pi;

AudioSegment make_segment(size_t n, float value = 0.0f) {
  AudioSegment seg;
  seg.samples.assign(n, value);
  return seg;
}

AudioSegment make_sine(double freq, double seconds, double amp = 0.8,
                       double phase = 0.0) {
  AudioSegment seg;
  const size_t n = static_cast<size_t>(seconds * 16000);
  seg.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    seg.samples[i] =
        static_cast<float>(amp * std::sin(2.0 * kPi * freq * i / 16000.0 + phase));
  return seg;
}

// Naive O(N^2) DFT power oracle over one windowed, zero-padded frame.
std::vector<double> naive_dft_power(const std::vector<double>& frame,
                                    int fft_size) {
  const int n_bins = fft_size / 2 + 1;
  std::vector<double> power(n_bins);
  for (int k = 0; k < n_bins; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t n = 0; n < frame.size(); ++n) {
      const double ang = -2.0 * kPi * k * static_cast<double>(n) / fft_size;
      acc += frame[n] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    power[k] = std::norm(acc);
  }
  return power;
}

TEST(StftPower, ZeroSignalIsZero) {
  auto power = ern::stft_power(make_segment(48000));
  EXPECT_EQ(power.n_bins, 257);
  EXPECT_EQ(power.n_frames, 298);
  for (double v : power.p) EXPECT_EQ(v, 0.0);
}

TEST(StftPower, SineAtBinFrequencyPeaksAtBin) {
  // bin 32 of a 512-point FFT at 16 kHz = 1000 Hz exactly
  auto seg = make_sine(32.0 * 16000 / 512, 1.0);
  auto power = ern::stft_power(seg);
  for (int t = 0; t < power.n_frames; ++t) {
    int argmax = 0;
    for (int k = 1; k < power.n_bins; ++k)
      if (power.at(k, t) > power.at(argmax, t)) argmax = k;
    ASSERT_EQ(argmax, 32) << "frame " << t;
  }
}

TEST(StftPower, OnesFrameDcEqualsWindowSumSquared) {
  auto seg = make_segment(400, 1.0f);
  auto power = ern::stft_power(seg);
  ASSERT_EQ(power.n_frames, 1);
  const auto hann = ern::hann_window(400);
  double wsum = 0.0;
  for (double w : hann) wsum += w;
  EXPECT_NEAR(power.at(0, 0), wsum * wsum, 1e-6);
}

TEST(StftPower, MatchesNaiveDftOnRandomFrames) {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  AudioSegment seg;
  seg.samples.resize(400 + 99 * 160);  // 100 frames
  for (float& v : seg.samples) v = dist(rng);

  auto power = ern::stft_power(seg);
  ASSERT_EQ(power.n_frames, 100);

  const auto hann = ern::hann_window(400);
  double max_diff = 0.0;
  for (int t = 0; t < power.n_frames; ++t) {
    std::vector<double> frame(400);
    for (int i = 0; i < 400; ++i) frame[i] = hann[i] * seg.samples[t * 160 + i];
    auto expected = naive_dft_power(frame, 512);
    for (int k = 0; k < power.n_bins; ++k)
      max_diff = std::max(max_diff, std::abs(expected[k] - power.at(k, t)));
  }
  EXPECT_LT(max_diff, 1e-6);
}

TEST(StftPower, TooShortSegmentThrows) {
  try {
    ern::stft_power(make_segment(399));
    FAIL() << "expected SegmentTooShort";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SegmentTooShort);
  }
}

TEST(MelSpectrogram, SilenceHitsLogFloor) {
  FeatureTensor mel = ern::mel_spectrogram(make_segment(48000));
  EXPECT_EQ(mel.n_rows, 64);
  EXPECT_EQ(mel.n_frames, 298);
  EXPECT_EQ(mel.n_channels, 1);
  const float floor_val = std::log(1e-10f);
  for (float v : mel.data) ASSERT_FLOAT_EQ(v, floor_val);
}

TEST(MelSpectrogram, FrameCountFormula) {
  // floor((48000 - 400)/160) + 1 = 298, confirmed by enumerating frame starts
  int count = 0;
  for (size_t start = 0; start + 400 <= 48000; start += 160) ++count;
  ASSERT_EQ(count, 298);
  EXPECT_EQ(ern::mel_spectrogram(make_segment(48000)).n_frames, count);
}

TEST(MelSpectrogram, SineArgmaxAtNearestCenterFrequency) {
  // Independent center-frequency table from the HTK mel formula.
  auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto mel_to_hz = [](double m) {
    return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
  };
  const double mel_hi = hz_to_mel(8000.0);
  int nearest = 0;
  double best = 1e30;
  for (int m = 0; m < 64; ++m) {
    const double center = mel_to_hz(mel_hi * (m + 1) / 65.0);
    if (std::abs(center - 440.0) < best) {
      best = std::abs(center - 440.0);
      nearest = m;
    }
  }

  FeatureTensor mel = ern::mel_spectrogram(make_sine(440.0, 1.0));
  for (int t = 0; t < mel.n_frames; ++t) {
    int argmax = 0;
    for (int m = 1; m < mel.n_rows; ++m)
      if (mel.at(m, t) > mel.at(argmax, t)) argmax = m;
    ASSERT_EQ(argmax, nearest) << "frame " << t;
  }
}

TEST(MelSpectrogram, MonotoneUnderAmplitudeScaling) {
  auto seg = make_sine(700.0, 0.5, 0.25);
  AudioSegment doubled = seg;
  for (float& v : doubled.samples) v *= 2.0f;  // exact in binary fp
  FeatureTensor a = ern::mel_spectrogram(seg);
  FeatureTensor b = ern::mel_spectrogram(doubled);
  ASSERT_EQ(a.data.size(), b.data.size());
  for (size_t i = 0; i < a.data.size(); ++i) ASSERT_GE(b.data[i], a.data[i]);
}

TEST(MelSpectrogram, AllFinite) {
  std::mt19937 rng(55);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  AudioSegment seg;
  seg.samples.resize(8000);
  for (float& v : seg.samples) v = dist(rng);
  for (float v : ern::mel_spectrogram(seg).data) ASSERT_TRUE(std::isfinite(v));
}

TEST(MelFilterbank, RowsNonNegativeAndInteriorBinsCovered) {
  auto fb = ern::MelFilterbank::build(MelConfig{}, 512, 16000);
  for (double w : fb.weights) ASSERT_GE(w, 0.0);
  // every bin strictly inside (f_min, f_max) has positive total weight
  for (int k = 1; k < fb.n_bins; ++k) {
    const double fk = k * 16000.0 / 512.0;
    if (fk <= 0.0 || fk >= 8000.0) continue;
    double total = 0.0;
    for (int m = 0; m < fb.n_mels; ++m) total += fb.weights[m * fb.n_bins + k];
    ASSERT_GT(total, 0.0) << "bin " << k << " (" << fk << " Hz)";
  }
}

TEST(Mfcc, ConstantColumnConcentratesInCoeffZero) {
  FeatureTensor mel;
  mel.n_rows = 64;
  mel.n_frames = 2;
  mel.data.assign(64 * 2, 0.0f);
  for (int m = 0; m < 64; ++m) {
    mel.at(m, 0) = 3.5f;
    mel.at(m, 1) = -1.25f;
  }
  auto out = ern::mfcc(mel, 13);
  EXPECT_NEAR(out.at(0, 0), 3.5 * std::sqrt(64.0), 1e-4);
  EXPECT_NEAR(out.at(0, 1), -1.25 * std::sqrt(64.0), 1e-4);
  for (int c = 1; c < 13; ++c) {
    EXPECT_NEAR(out.at(c, 0), 0.0, 1e-4);
    EXPECT_NEAR(out.at(c, 1), 0.0, 1e-4);
  }
}

TEST(Mfcc, SilenceInput) {
  FeatureTensor mel = ern::mel_spectrogram(make_segment(48000));
  auto out = ern::mfcc(mel, 13);
  const double expected0 = std::log(1e-10f) * std::sqrt(64.0);
  for (int t = 0; t < out.n_frames; ++t) {
    ASSERT_NEAR(out.at(0, t), expected0, 1e-3);
    for (int c = 1; c < 13; ++c) ASSERT_NEAR(out.at(c, t), 0.0, 1e-3);
  }
}

TEST(Mfcc, MatchesNaiveDctDoubleLoop) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<float> dist(-20.0f, 5.0f);
  FeatureTensor mel;
  mel.n_rows = 64;
  mel.n_frames = 7;
  mel.data.resize(64 * 7);
  for (float& v : mel.data) v = dist(rng);

  auto out = ern::mfcc(mel, 64);
  double max_diff = 0.0;
  for (int c = 0; c < 64; ++c) {
    for (int t = 0; t < 7; ++t) {
      double acc = 0.0;
      for (int m = 0; m < 64; ++m)
        acc += static_cast<double>(mel.at(m, t)) *
               std::cos(kPi * c * (2.0 * m + 1.0) / (2.0 * 64.0));
      acc *= c == 0 ? std::sqrt(1.0 / 64.0) : std::sqrt(2.0 / 64.0);
      max_diff = std::max(max_diff, std::abs(acc - out.at(c, t)));
    }
  }
  EXPECT_LT(max_diff, 1e-9);
}

TEST(Mfcc, TooManyCoefficientsThrows) {
  FeatureTensor mel;
  mel.n_rows = 64;
  mel.n_frames = 1;
  mel.data.assign(64, 0.0f);
  try {
    ern::mfcc(mel, 65);
    FAIL() << "expected TooManyCoefficients";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooManyCoefficients);
  }
}

TEST(SpectralCentroid, SingleBinIsExact) {
  ern::PowerSpectrogram power;
  power.n_bins = 257;
  power.n_frames = 1;
  power.p.assign(257, 0.0);
  power.p[40] = 2.5;
  auto c = ern::spectral_centroid(power, 16000, 512);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_DOUBLE_EQ(c[0], 40.0 * 16000 / 512);
}

TEST(SpectralCentroid, SilenceIsZero) {
  auto power = ern::stft_power(make_segment(48000));
  for (double v : ern::spectral_centroid(power, 16000, 512)) EXPECT_EQ(v, 0.0);
}

TEST(SpectralCentroid, TwoEqualBinsGiveMidpoint) {
  ern::PowerSpectrogram power;
  power.n_bins = 257;
  power.n_frames = 1;
  power.p.assign(257, 0.0);
  power.p[10] = 1.0;
  power.p[30] = 1.0;
  auto c = ern::spectral_centroid(power, 16000, 512);
  EXPECT_DOUBLE_EQ(c[0], 20.0 * 16000 / 512);
}

TEST(ZeroCrossingRate, AlternatingIsOne) {
  AudioSegment seg;
  seg.samples.resize(400);
  for (size_t i = 0; i < seg.samples.size(); ++i)
    seg.samples[i] = i % 2 == 0 ? 1.0f : -1.0f;
  auto z = ern::zero_crossing_rate(seg);
  ASSERT_EQ(z.size(), 1u);
  EXPECT_DOUBLE_EQ(z[0], 1.0);
}

TEST(ZeroCrossingRate, ConstantIsZero) {
  auto z = ern::zero_crossing_rate(make_segment(400, 0.5f));
  EXPECT_DOUBLE_EQ(z[0], 0.0);
}

TEST(ZeroCrossingRate, HundredHertzPinnedPhaseFixture) {
  // cos(2*pi*100*n/16000) over one 400-sample frame. Count sign changes by
  // direct enumeration with the zero-counts-as-positive convention.
  AudioSegment seg;
  seg.samples.resize(400);
  for (int i = 0; i < 400; ++i)
    seg.samples[i] = static_cast<float>(std::cos(2.0 * kPi * 100.0 * i / 16000.0));

  int expected = 0;
  for (int i = 1; i < 400; ++i) {
    const bool a = seg.samples[i - 1] >= 0.0f;
    const bool b = seg.samples[i] >= 0.0f;
    if (a != b) ++expected;
  }
  EXPECT_EQ(expected, 5);  // 2.5 cycles, cosine phase

  auto z = ern::zero_crossing_rate(seg);
  EXPECT_DOUBLE_EQ(z[0], expected / 399.0);
  EXPECT_NEAR(z[0], 5.0 / 399.0, 1e-12);
}

TEST(BuildInputTensor, MelOnlyShape) {
  auto t = ern::build_input_tensor(make_segment(48000));
  EXPECT_EQ(t.n_rows, 64);
  EXPECT_EQ(t.n_frames, 298);
  EXPECT_EQ(t.n_channels, 1);
}

TEST(BuildInputTensor, StackedShapeAndContents) {
  auto seg = make_sine(440.0, 3.0);
  auto t = ern::build_input_tensor(seg, ern::InputMode::stacked);
  EXPECT_EQ(t.n_rows, 64);
  EXPECT_EQ(t.n_frames, 298);
  EXPECT_EQ(t.n_channels, 3);

  auto mel = ern::mel_spectrogram(seg);
  auto coeffs = ern::mfcc(mel, 13);
  for (int tt = 0; tt < 298; tt += 37) {
    for (int r = 0; r < 64; ++r) {
      ASSERT_FLOAT_EQ(t.at(r, tt, 0), mel.at(r, tt));
      ASSERT_FLOAT_EQ(t.at(r, tt, 1),
                      r < 13 ? static_cast<float>(coeffs.at(r, tt)) : 0.0f);
    }
    // centroid rows 0..31, zcr rows 32..63
    for (int r = 0; r < 32; ++r) ASSERT_EQ(t.at(r, tt, 2), t.at(0, tt, 2));
    for (int r = 32; r < 64; ++r) ASSERT_EQ(t.at(r, tt, 2), t.at(32, tt, 2));
    ASSERT_GE(t.at(0, tt, 2), 0.0f);
    ASSERT_LE(t.at(0, tt, 2), 1.0f);
  }
}

TEST(BuildInputTensor, SilenceStackedAuxChannelIsZero) {
  auto t = ern::build_input_tensor(make_segment(48000), ern::InputMode::stacked);
  for (int tt = 0; tt < t.n_frames; ++tt)
    for (int r = 0; r < t.n_rows; ++r) ASSERT_EQ(t.at(r, tt, 2), 0.0f);
}

}  // namespace
