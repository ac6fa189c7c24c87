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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ern/error.hpp"

namespace ern {

enum class ResponseMode { empathy, soothing, play, amplify };
inline constexpr int kNumModes = 4;

inline const char* mode_name(ResponseMode m) {
  switch (m) {
    case ResponseMode::empathy: return "empathy";
    case ResponseMode::soothing: return "soothing";
    case ResponseMode::play: return "play";
    case ResponseMode::amplify: return "amplify";
  }
  return "?";
}

inline std::optional<ResponseMode> mode_from_name(std::string_view s) {
  if (s == "empathy") return ResponseMode::empathy;
  if (s == "soothing") return ResponseMode::soothing;
  if (s == "play") return ResponseMode::play;
  if (s == "amplify") return ResponseMode::amplify;
  return std::nullopt;
}

enum class ArousalLevel { low, high };

inline const char* arousal_name(ArousalLevel a) {
  return a == ArousalLevel::low ? "low" : "high";
}

/// One row of the response policy. Emotion "*" matches anything; arousal
/// may be "low", "high" or "any".
struct PolicyRule {
  std::string emotion;
  std::string arousal;  // low | high | any
  ResponseMode mode = ResponseMode::soothing;
};

/// Ordered first-match-wins mapping from (emotion, arousal) to a response
/// mode; default_mode makes the mapping total.
struct PolicyTable {
  std::vector<PolicyRule> rules;
  ResponseMode default_mode = ResponseMode::soothing;
};

inline ResponseMode decide_mode(const std::string& emotion, ArousalLevel arousal,
                                const PolicyTable& table) {
  const char* level = arousal_name(arousal);
  for (const auto& rule : table.rules) {
    const bool emotion_ok = rule.emotion == "*" || rule.emotion == emotion;
    const bool arousal_ok = rule.arousal == "any" || rule.arousal == level;
    if (emotion_ok && arousal_ok) return rule.mode;
  }
  return table.default_mode;
}

inline constexpr std::string_view kDefaultPolicyJson = R"({
  "rules": [
    {"emotion": "sad",     "arousal": "low",  "mode": "empathy"},
    {"emotion": "sad",     "arousal": "high", "mode": "soothing"},
    {"emotion": "angry",   "arousal": "any",  "mode": "soothing"},
    {"emotion": "neutral", "arousal": "any",  "mode": "play"},
    {"emotion": "happy",   "arousal": "low",  "mode": "play"},
    {"emotion": "happy",   "arousal": "high", "mode": "amplify"}
  ],
  "default_mode": "soothing"
})";

inline PolicyTable load_policy(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("policy: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array())
    throw Error(ErrorCode::SchemaError, "policy: missing 'rules' array");

  PolicyTable table;
  std::vector<std::pair<std::string, std::string>> seen;
  for (size_t i = 0; i < doc["rules"].size(); ++i) {
    const auto& r = doc["rules"][i];
    const std::string where = "policy rules[" + std::to_string(i) + "]";
    if (!r.is_object() || !r.contains("emotion") || !r.contains("arousal") ||
        !r.contains("mode") || !r["emotion"].is_string() ||
        !r["arousal"].is_string() || !r["mode"].is_string())
      throw Error(ErrorCode::SchemaError,
                  where + ": need string fields emotion/arousal/mode");
    PolicyRule rule;
    rule.emotion = r["emotion"].get<std::string>();
    rule.arousal = r["arousal"].get<std::string>();
    if (rule.arousal != "low" && rule.arousal != "high" && rule.arousal != "any")
      throw Error(ErrorCode::SchemaError,
                  where + ".arousal: " + rule.arousal);
    const auto mode = mode_from_name(r["mode"].get<std::string>());
    if (!mode)
      throw Error(ErrorCode::UnknownMode,
                  where + ".mode: " + r["mode"].get<std::string>());
    rule.mode = *mode;

    for (const auto& [e, a] : seen)
      if (e == rule.emotion && a == rule.arousal)
        throw Error(ErrorCode::DuplicateRule,
                    where + ": duplicate (" + e + ", " + a + ")");
    seen.emplace_back(rule.emotion, rule.arousal);
    table.rules.push_back(std::move(rule));
  }

  if (doc.contains("default_mode")) {
    if (!doc["default_mode"].is_string())
      throw Error(ErrorCode::SchemaError, "policy: default_mode");
    const auto mode = mode_from_name(doc["default_mode"].get<std::string>());
    if (!mode)
      throw Error(ErrorCode::UnknownMode,
                  "policy default_mode: " + doc["default_mode"].get<std::string>());
    table.default_mode = *mode;
  }
  return table;
}

inline PolicyTable default_policy() {
  return load_policy(std::string(kDefaultPolicyJson));
}

}  // namespace ern
