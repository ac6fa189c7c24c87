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

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace ern {

/// Bounded media control vector spanning audio, visual and text modalities.
struct ContentParameters {
  double tempo = 1.0;            // [0.5, 2.0]
  double volume = 0.5;           // [0, 1]
  double tone_softness = 0.5;    // [0, 1]
  double brightness = 0.5;       // [0, 1]
  double color_warmth = 0.5;     // [0, 1]
  double animation_speed = 0.5;  // [0, 1]
  double sentiment = 0.0;        // [-1, 1]
  double formality = 0.5;        // [0, 1]
  std::optional<std::string> template_id;
};

inline constexpr int kNumParamFields = 8;

struct ParamField {
  const char* name;
  double lo;
  double hi;
  double ContentParameters::* member;

  double range() const { return hi - lo; }
};

inline constexpr std::array<ParamField, kNumParamFields> kParamFields = {{
    {"tempo", 0.5, 2.0, &ContentParameters::tempo},
    {"volume", 0.0, 1.0, &ContentParameters::volume},
    {"tone_softness", 0.0, 1.0, &ContentParameters::tone_softness},
    {"brightness", 0.0, 1.0, &ContentParameters::brightness},
    {"color_warmth", 0.0, 1.0, &ContentParameters::color_warmth},
    {"animation_speed", 0.0, 1.0, &ContentParameters::animation_speed},
    {"sentiment", -1.0, 1.0, &ContentParameters::sentiment},
    {"formality", 0.0, 1.0, &ContentParameters::formality},
}};

inline const ParamField* find_param_field(std::string_view name) {
  for (const auto& f : kParamFields)
    if (name == f.name) return &f;
  return nullptr;
}

inline bool params_in_range(const ContentParameters& p) {
  for (const auto& f : kParamFields) {
    const double v = p.*(f.member);
    if (!std::isfinite(v) || v < f.lo || v > f.hi) return false;
  }
  return true;
}

}  // namespace ern
