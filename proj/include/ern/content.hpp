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
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ern/content_params.hpp"
#include "ern/error.hpp"
#include "ern/policy.hpp"
#include "ern/safety.hpp"

namespace ern {

/// Per-mode parameter defaults plus the template each mode speaks through.
struct ContentConfig {
  std::array<ContentParameters, kNumModes> defaults;

  const ContentParameters& for_mode(ResponseMode m) const {
    return defaults[static_cast<int>(m)];
  }
};

inline constexpr std::string_view kDefaultContentJson = R"({
  "modes": {
    "empathy":  {"tempo": 0.7, "volume": 0.5, "tone_softness": 0.8, "brightness": 0.6, "color_warmth": 0.8, "animation_speed": 0.3, "sentiment": 0.1, "formality": 0.5, "template_id": "tpl_empathy"},
    "soothing": {"tempo": 0.6, "volume": 0.4, "tone_softness": 0.9, "brightness": 0.5, "color_warmth": 0.7, "animation_speed": 0.2, "sentiment": 0.3, "formality": 0.5, "template_id": "tpl_soothing"},
    "play":     {"tempo": 1.0, "volume": 0.7, "tone_softness": 0.5, "brightness": 0.7, "color_warmth": 0.5, "animation_speed": 0.6, "sentiment": 0.6, "formality": 0.3, "template_id": "tpl_play"},
    "amplify":  {"tempo": 1.3, "volume": 0.8, "tone_softness": 0.4, "brightness": 0.9, "color_warmth": 0.6, "animation_speed": 0.8, "sentiment": 0.8, "formality": 0.2, "template_id": "tpl_amplify"}
  }
})";

inline ContentConfig load_content_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("content: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("modes") || !doc["modes"].is_object())
    throw Error(ErrorCode::SchemaError, "content: missing 'modes' object");

  ContentConfig cfg;
  for (int m = 0; m < kNumModes; ++m) {
    const char* name = mode_name(static_cast<ResponseMode>(m));
    if (!doc["modes"].contains(name))
      throw Error(ErrorCode::SchemaError,
                  std::string("content: missing mode ") + name);
    const auto& entry = doc["modes"][name];
    ContentParameters p;
    for (const auto& f : kParamFields) {
      if (!entry.contains(f.name) || !entry[f.name].is_number())
        throw Error(ErrorCode::SchemaError,
                    std::string("content.") + name + ": need number " + f.name);
      const double v = entry[f.name].get<double>();
      if (v < f.lo || v > f.hi)
        throw Error(ErrorCode::BoundOutOfRange,
                    std::string("content.") + name + "." + f.name);
      p.*(f.member) = v;
    }
    if (entry.contains("template_id")) {
      if (!entry["template_id"].is_string())
        throw Error(ErrorCode::SchemaError,
                    std::string("content.") + name + ".template_id");
      p.template_id = entry["template_id"].get<std::string>();
    }
    cfg.defaults[m] = std::move(p);
  }
  return cfg;
}

inline ContentConfig default_content_config() {
  return load_content_config(std::string(kDefaultContentJson));
}

inline const ContentParameters& default_params(ResponseMode mode,
                                               const ContentConfig& cfg) {
  return cfg.for_mode(mode);
}

// ---------------------------------------------------------------------------
// Generator network

namespace content_detail {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Range-mapping output activation; sentiment rides a plain tanh, the rest a
/// logistic scaled onto [lo, hi].
inline double activate(int field, double z) {
  const ParamField& f = kParamFields[field];
  if (std::string_view(f.name) == "sentiment") return std::tanh(z);
  return f.lo + (f.hi - f.lo) * logistic(z);
}

inline double inverse_activate(int field, double v) {
  const ParamField& f = kParamFields[field];
  if (std::string_view(f.name) == "sentiment") return std::atanh(v);
  const double u = (v - f.lo) / (f.hi - f.lo);
  return std::log(u / (1.0 - u));
}

}  // namespace content_detail

/// Two-layer feedforward generator: one-hot mode (plus, for regeneration,
/// the normalized previous parameters and the violation mask) -> hidden ReLU
/// layer -> 8 pre-activations squashed into each parameter's range. Factory
/// initialization routes each mode through one hidden unit so the net
/// reproduces the configured defaults exactly.
struct GeneratorNet {
  int hidden = 32;
  int n_rules = 0;  // violation mask width
  std::vector<double> w_hidden;  // [input_dim][hidden]
  std::vector<double> b_hidden;  // [hidden]
  std::vector<double> w_out;     // [hidden][8]
  std::vector<double> b_out;     // [8]
  std::array<std::optional<std::string>, kNumModes> template_ids;

  int input_dim() const { return kNumModes + kNumParamFields + n_rules; }
};

/// Wires the factory identity: hidden weights zero except a unit diagonal
/// from each mode input to one hidden unit; output weights hold the inverse
/// activation of each default. Defaults sitting exactly on a range endpoint
/// are pulled in by 1e-4 and reported through `warnings`.
inline GeneratorNet init_generator(const ContentConfig& defaults, int n_rules,
                                   std::vector<std::string>* warnings = nullptr) {
  GeneratorNet net;
  net.n_rules = n_rules;
  net.w_hidden.assign(size_t(net.input_dim()) * net.hidden, 0.0);
  net.b_hidden.assign(net.hidden, 0.0);
  net.w_out.assign(size_t(net.hidden) * kNumParamFields, 0.0);
  net.b_out.assign(kNumParamFields, 0.0);

  for (int m = 0; m < kNumModes; ++m) {
    net.w_hidden[size_t(m) * net.hidden + m] = 1.0;  // one-hot routing
    const ContentParameters& d = defaults.defaults[m];
    net.template_ids[m] = d.template_id;
    for (int j = 0; j < kNumParamFields; ++j) {
      const ParamField& f = kParamFields[j];
      double v = d.*(f.member);
      const double eps = 1e-4;
      if (v <= f.lo || v >= f.hi) {
        const double clamped = v <= f.lo ? f.lo + eps : f.hi - eps;
        if (warnings)
          warnings->push_back(std::string(f.name) + " default " +
                              std::to_string(v) + " clamped to " +
                              std::to_string(clamped) + " for " +
                              mode_name(static_cast<ResponseMode>(m)));
        v = clamped;
      }
      net.w_out[size_t(m) * kNumParamFields + j] =
          content_detail::inverse_activate(j, v);
    }
  }
  return net;
}

namespace content_detail {

inline ContentParameters run_net(const GeneratorNet& net,
                                 const std::vector<double>& input,
                                 std::optional<uint64_t> jitter_seed) {
  std::vector<double> hidden(net.hidden, 0.0);
  for (int i = 0; i < net.input_dim(); ++i) {
    if (input[i] == 0.0) continue;
    for (int h = 0; h < net.hidden; ++h)
      hidden[h] += input[i] * net.w_hidden[size_t(i) * net.hidden + h];
  }
  for (int h = 0; h < net.hidden; ++h)
    hidden[h] = std::max(hidden[h] + net.b_hidden[h], 0.0);

  std::array<double, kNumParamFields> z{};
  for (int j = 0; j < kNumParamFields; ++j) z[j] = net.b_out[j];
  for (int h = 0; h < net.hidden; ++h) {
    if (hidden[h] == 0.0) continue;
    for (int j = 0; j < kNumParamFields; ++j)
      z[j] += hidden[h] * net.w_out[size_t(h) * kNumParamFields + j];
  }

  if (jitter_seed) {
    std::mt19937_64 rng(*jitter_seed);
    std::uniform_real_distribution<double> dist(-0.25, 0.25);
    for (int j = 0; j < kNumParamFields; ++j) z[j] += dist(rng);
  }

  ContentParameters p;
  for (int j = 0; j < kNumParamFields; ++j)
    p.*(kParamFields[j].member) = activate(j, z[j]);
  return p;
}

}  // namespace content_detail

/// Forward pass for a fresh generation. With factory weights and no jitter
/// the output equals the configured defaults; jitter perturbs each
/// pre-activation by U(-0.25, 0.25), deterministically per seed.
inline ContentParameters generate(ResponseMode mode, const GeneratorNet& net,
                                  std::optional<uint64_t> jitter_seed = {}) {
  std::vector<double> input(net.input_dim(), 0.0);
  input[static_cast<int>(mode)] = 1.0;
  ContentParameters p = content_detail::run_net(net, input, jitter_seed);
  p.template_id = net.template_ids[static_cast<int>(mode)];
  return p;
}

/// Violation-conditioned regeneration. Attempts below the final one re-run
/// the net with the extended inputs; the final attempt (attempt ==
/// max_iterations - 1) also projects every parameter cited in a threshold
/// violation to bound -/+ 0.05 * range and drops the template on
/// prohibited-expression or age-rating violations.
inline ContentParameters regenerate(ResponseMode mode,
                                    const ContentParameters& previous,
                                    const VerificationResult& violations,
                                    const GeneratorNet& net, int attempt,
                                    int max_iterations,
                                    std::optional<uint64_t> jitter_seed = {}) {
  if (violations.passed)
    throw Error(ErrorCode::NoViolations, "regenerate on a passing result");
  if (attempt < 1)
    throw Error(ErrorCode::UsageError, "attempt must be >= 1");
  if (net.n_rules != static_cast<int>(violations.mask.size()))
    throw Error(ErrorCode::LengthMismatch,
                "violation mask width " + std::to_string(violations.mask.size()) +
                    " vs generator " + std::to_string(net.n_rules));

  std::vector<double> input(net.input_dim(), 0.0);
  input[static_cast<int>(mode)] = 1.0;
  for (int j = 0; j < kNumParamFields; ++j) {
    const ParamField& f = kParamFields[j];
    input[kNumModes + j] = (previous.*(f.member) - f.lo) / (f.hi - f.lo);
  }
  for (int r = 0; r < net.n_rules; ++r)
    input[kNumModes + kNumParamFields + r] = violations.mask[r] ? 1.0 : 0.0;

  ContentParameters p = content_detail::run_net(net, input, jitter_seed);
  p.template_id = previous.template_id;

  if (attempt >= max_iterations - 1) {
    // Deterministic safety projection: clears every previously cited
    // violation, so the loop terminates with safe content whenever only the
    // previous attempt's rules were at stake.
    for (const auto& v : violations.violations) {
      if (!v.bound || v.parameter == kAgeRatingField) {
        p.template_id.reset();  // discrete violations: drop the template
        continue;
      }
      const ParamField* f = find_param_field(v.parameter);
      if (f == nullptr) continue;
      const double margin = 0.05 * f->range();
      const double target = v.observed_value > *v.bound ? *v.bound - margin
                                                        : *v.bound + margin;
      p.*(f->member) = std::clamp(target, f->lo, f->hi);
    }
  }
  return p;
}

}  // namespace ern
