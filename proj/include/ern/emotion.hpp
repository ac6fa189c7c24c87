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
#include <string>
#include <vector>

#include "ern/audio.hpp"
#include "ern/dsp.hpp"
#include "ern/error.hpp"
#include "ern/net.hpp"
#include "ern/policy.hpp"

namespace ern {

struct EmotionCategories {
  std::vector<std::string> labels;

  static EmotionCategories default4() {
    return {{"sad", "angry", "neutral", "happy"}};
  }
  int size() const { return static_cast<int>(labels.size()); }
  int index_of(const std::string& label) const {
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) return static_cast<int>(i);
    return -1;
  }
};

/// Energy/ZCR logistic used as the arousal input to the policy stage.
struct ArousalConfig {
  double w_energy = 4.0;
  double w_zcr = 2.0;
  double bias = -3.0;
  double threshold = 0.5;
};

struct ArousalEstimate {
  double score = 0.0;  // in [0, 1]
  ArousalLevel level = ArousalLevel::low;
};

/// score = logistic(w_e * E + w_z * Z + bias) where E is the mean per-frame
/// RMS in dBFS mapped from [-60, 0] onto [0, 1] (clipped) and Z is the mean
/// zero-crossing rate. level = high iff score >= threshold.
inline ArousalEstimate estimate_arousal(const AudioSegment& seg,
                                        const ArousalConfig& cfg = {},
                                        const StftConfig& stft = {}) {
  const int win = std::min<int>(stft.window_samples(seg.sample_rate),
                                static_cast<int>(seg.samples.size()));
  const int hop = stft.hop_samples(seg.sample_rate);
  const int n_frames = std::max(1, frame_count(seg.samples.size(), win, hop));

  double energy_sum = 0.0;
  double zcr_sum = 0.0;
  for (int t = 0; t < n_frames; ++t) {
    const float* f = seg.samples.data() + size_t(t) * hop;
    double sq = 0.0;
    int crossings = 0;
    for (int i = 0; i < win; ++i) {
      sq += static_cast<double>(f[i]) * f[i];
      if (i > 0 && ((f[i - 1] >= 0.0f) != (f[i] >= 0.0f))) ++crossings;
    }
    const double rms = std::sqrt(sq / win);
    const double db = 20.0 * std::log10(std::max(rms, 1e-10));
    energy_sum += std::clamp((db + 60.0) / 60.0, 0.0, 1.0);
    zcr_sum += win > 1 ? static_cast<double>(crossings) / (win - 1) : 0.0;
  }
  const double e = energy_sum / n_frames;
  const double z = zcr_sum / n_frames;

  ArousalEstimate out;
  const double logit = cfg.w_energy * e + cfg.w_zcr * z + cfg.bias;
  out.score = 1.0 / (1.0 + std::exp(-logit));
  out.level = out.score >= cfg.threshold ? ArousalLevel::high : ArousalLevel::low;
  return out;
}

struct EmotionState {
  std::vector<double> distribution;
  int predicted_index = 0;
  std::string predicted;
  ArousalLevel arousal = ArousalLevel::low;
  double arousal_score = 0.0;
  double confidence = 0.0;  // max probability
};

inline int argmax_lowest_tie(const std::vector<double>& v) {
  int best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

/// Runs the recognizer on a precomputed feature tensor plus the arousal
/// estimate of the originating segment.
inline EmotionState classify_features(const FeatureTensor& features,
                                      const ArousalEstimate& arousal,
                                      const nn::NetworkSpec& spec,
                                      const nn::WeightSet<float>& weights,
                                      const EmotionCategories& cats,
                                      nn::Workspace<float>& ws) {
  if (spec.num_classes() != cats.size())
    throw Error(ErrorCode::ShapeMismatch, "category count vs classifier head");
  const auto input = nn::to_tensor<float>(features);
  const auto probs = nn::forward(spec, weights, input, ws);

  EmotionState state;
  state.distribution.assign(probs.begin(), probs.end());
  state.predicted_index = argmax_lowest_tie(state.distribution);
  state.predicted = cats.labels[state.predicted_index];
  state.confidence = state.distribution[state.predicted_index];
  state.arousal = arousal.level;
  state.arousal_score = arousal.score;
  return state;
}

inline EmotionState classify(const AudioSegment& seg,
                             const nn::NetworkSpec& spec,
                             const nn::WeightSet<float>& weights,
                             const EmotionCategories& cats,
                             const ArousalConfig& arousal_cfg = {}) {
  nn::Workspace<float> ws;
  return classify_features(build_input_tensor(seg), estimate_arousal(seg, arousal_cfg),
                           spec, weights, cats, ws);
}

}  // namespace ern
