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
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ern/content_params.hpp"
#include "ern/error.hpp"

namespace ern {

enum class Profile { child, general, all };

inline const char* profile_name(Profile p) {
  switch (p) {
    case Profile::child: return "child";
    case Profile::general: return "general";
    case Profile::all: return "all";
  }
  return "?";
}

inline std::optional<Profile> profile_from_name(std::string_view s) {
  if (s == "child") return Profile::child;
  if (s == "general") return Profile::general;
  if (s == "all") return Profile::all;
  return std::nullopt;
}

enum class RuleCategory { age_appropriateness, stimulation_level, prohibited_expression };

inline const char* category_name(RuleCategory c) {
  switch (c) {
    case RuleCategory::age_appropriateness: return "age_appropriateness";
    case RuleCategory::stimulation_level: return "stimulation_level";
    case RuleCategory::prohibited_expression: return "prohibited_expression";
  }
  return "?";
}

inline std::optional<RuleCategory> category_from_name(std::string_view s) {
  if (s == "age_appropriateness") return RuleCategory::age_appropriateness;
  if (s == "stimulation_level") return RuleCategory::stimulation_level;
  if (s == "prohibited_expression") return RuleCategory::prohibited_expression;
  return std::nullopt;
}

enum class RuleKind { upper_threshold, lower_threshold, blocklist };

inline const char* kind_name(RuleKind k) {
  switch (k) {
    case RuleKind::upper_threshold: return "upper_threshold";
    case RuleKind::lower_threshold: return "lower_threshold";
    case RuleKind::blocklist: return "blocklist";
  }
  return "?";
}

inline std::optional<RuleKind> kind_from_name(std::string_view s) {
  if (s == "upper_threshold") return RuleKind::upper_threshold;
  if (s == "lower_threshold") return RuleKind::lower_threshold;
  if (s == "blocklist") return RuleKind::blocklist;
  return std::nullopt;
}

/// Age ratings live outside the numeric parameter vector; rules may bound
/// them through this pseudo-field.
inline constexpr std::string_view kAgeRatingField = "template_age_rating";
inline constexpr double kAgeRatingMax = 21.0;

struct SafetyRule {
  std::string id;
  RuleCategory category = RuleCategory::stimulation_level;
  RuleKind kind = RuleKind::upper_threshold;
  std::string parameter;  // content field, or template_age_rating
  double bound = 0.0;
  Profile profile = Profile::all;
};

struct RuleSet {
  std::vector<SafetyRule> rules;
  std::vector<std::string> blocklist;
  Profile active_profile = Profile::child;

  bool rule_active(size_t i) const {
    return rules[i].profile == Profile::all ||
           rules[i].profile == active_profile;
  }
};

struct ContentTemplate {
  std::string id;
  double age_rating = 0.0;
  std::vector<std::string> words;
};

struct TemplateRegistry {
  std::vector<ContentTemplate> templates;

  const ContentTemplate* find(const std::string& id) const {
    for (const auto& t : templates)
      if (t.id == id) return &t;
    return nullptr;
  }
};

struct Violation {
  std::string rule_id;
  RuleCategory category = RuleCategory::stimulation_level;
  std::string parameter;            // violated field (empty for blocklist)
  double observed_value = 0.0;      // threshold rules
  std::string observed_word;        // blocklist rules
  std::optional<double> bound;      // none for blocklist
};

/// Pass/fail plus the aligned violation mask consumed by regeneration.
struct VerificationResult {
  bool passed = true;
  std::vector<Violation> violations;
  std::vector<uint8_t> mask;  // mask[i] == 1 iff rules[i] was violated
};

/// Evaluates every rule active for the profile — no short-circuit, the full
/// mask is part of the contract. Threshold rules compare the named content
/// field (or the template age rating); blocklist rules intersect the
/// template's word list with the ruleset blocklist.
inline VerificationResult verify(const ContentParameters& params,
                                 const RuleSet& rules,
                                 const TemplateRegistry& templates) {
  const ContentTemplate* tpl = nullptr;
  if (params.template_id) {
    tpl = templates.find(*params.template_id);
    if (tpl == nullptr)
      throw Error(ErrorCode::UnknownTemplate, *params.template_id);
  }

  VerificationResult result;
  result.mask.assign(rules.rules.size(), 0);
  for (size_t i = 0; i < rules.rules.size(); ++i) {
    if (!rules.rule_active(i)) continue;
    const SafetyRule& rule = rules.rules[i];
    bool violated = false;
    Violation v;
    v.rule_id = rule.id;
    v.category = rule.category;

    if (rule.kind == RuleKind::blocklist) {
      if (tpl != nullptr) {
        for (const auto& word : tpl->words) {
          if (std::find(rules.blocklist.begin(), rules.blocklist.end(), word) !=
              rules.blocklist.end()) {
            violated = true;
            v.observed_word = word;
            break;
          }
        }
      }
    } else {
      double value = 0.0;
      if (rule.parameter == kAgeRatingField) {
        if (tpl == nullptr) {
          result.mask[i] = 0;
          continue;  // no template, nothing to rate
        }
        value = tpl->age_rating;
      } else if (const ParamField* f = find_param_field(rule.parameter)) {
        value = params.*(f->member);
      } else {
        throw Error(ErrorCode::UnknownParameterField,
                    rule.id + " references '" + rule.parameter + "'");
      }
      if (rule.kind == RuleKind::upper_threshold)
        violated = value > rule.bound;
      else
        violated = value < rule.bound;
      v.parameter = rule.parameter;
      v.observed_value = value;
      v.bound = rule.bound;
    }

    if (violated) {
      result.mask[i] = 1;
      result.violations.push_back(std::move(v));
    }
  }
  result.passed = result.violations.empty();
  return result;
}

inline constexpr std::string_view kDefaultRulesJson = R"({
  "profile_defaults": {"active_profile": "child"},
  "rules": [
    {"id": "stim.volume.child",     "category": "stimulation_level",   "kind": "upper_threshold", "parameter": "volume",          "bound": 0.8,  "profile": "child"},
    {"id": "stim.animation.child",  "category": "stimulation_level",   "kind": "upper_threshold", "parameter": "animation_speed", "bound": 0.8,  "profile": "child"},
    {"id": "stim.brightness.child", "category": "stimulation_level",   "kind": "upper_threshold", "parameter": "brightness",      "bound": 0.9,  "profile": "child"},
    {"id": "stim.tempo.child",      "category": "stimulation_level",   "kind": "upper_threshold", "parameter": "tempo",           "bound": 1.5,  "profile": "child"},
    {"id": "age.sentiment.child",   "category": "age_appropriateness", "kind": "lower_threshold", "parameter": "sentiment",       "bound": -0.5, "profile": "child"},
    {"id": "age.rating.child",      "category": "age_appropriateness", "kind": "upper_threshold", "parameter": "template_age_rating", "bound": 7,  "profile": "child"},
    {"id": "stim.volume.general",   "category": "stimulation_level",   "kind": "upper_threshold", "parameter": "volume",          "bound": 0.95, "profile": "general"},
    {"id": "stim.animation.general","category": "stimulation_level",   "kind": "upper_threshold", "parameter": "animation_speed", "bound": 0.9,  "profile": "general"},
    {"id": "stim.tempo.general",    "category": "stimulation_level",   "kind": "upper_threshold", "parameter": "tempo",           "bound": 2.0,  "profile": "general"},
    {"id": "age.rating.general",    "category": "age_appropriateness", "kind": "upper_threshold", "parameter": "template_age_rating", "bound": 18, "profile": "general"},
    {"id": "prohibited.words",      "category": "prohibited_expression", "kind": "blocklist", "profile": "all"}
  ],
  "blocklist": ["scary", "monster", "nightmare", "violent", "blood", "weapon"]
})";

inline constexpr std::string_view kDefaultTemplatesJson = R"({
  "templates": [
    {"id": "tpl_empathy",  "age_rating": 3, "words": ["hear", "you", "gentle", "here", "comfort"]},
    {"id": "tpl_soothing", "age_rating": 3, "words": ["breathe", "calm", "slow", "safe", "rest"]},
    {"id": "tpl_play",     "age_rating": 5, "words": ["play", "game", "fun", "bounce", "wiggle"]},
    {"id": "tpl_amplify",  "age_rating": 5, "words": ["yay", "awesome", "dance", "shine", "celebrate"]}
  ]
})";

inline RuleSet load_rules(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("rules: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array())
    throw Error(ErrorCode::SchemaError, "rules: missing 'rules' array");

  RuleSet rs;
  if (doc.contains("blocklist")) {
    if (!doc["blocklist"].is_array())
      throw Error(ErrorCode::SchemaError, "rules: blocklist must be an array");
    for (const auto& w : doc["blocklist"]) {
      if (!w.is_string())
        throw Error(ErrorCode::SchemaError, "rules: blocklist entries");
      rs.blocklist.push_back(w.get<std::string>());
    }
  }
  if (doc.contains("profile_defaults")) {
    const auto& pd = doc["profile_defaults"];
    if (!pd.is_object() || !pd.contains("active_profile") ||
        !pd["active_profile"].is_string())
      throw Error(ErrorCode::SchemaError, "rules: profile_defaults");
    const auto p = profile_from_name(pd["active_profile"].get<std::string>());
    if (!p || *p == Profile::all)
      throw Error(ErrorCode::SchemaError,
                  "rules: active_profile must be child or general");
    rs.active_profile = *p;
  }

  for (size_t i = 0; i < doc["rules"].size(); ++i) {
    const auto& r = doc["rules"][i];
    const std::string where = "rules[" + std::to_string(i) + "]";
    if (!r.is_object() || !r.contains("id") || !r["id"].is_string() ||
        !r.contains("category") || !r["category"].is_string() ||
        !r.contains("kind") || !r["kind"].is_string())
      throw Error(ErrorCode::SchemaError, where + ": need id/category/kind");

    SafetyRule rule;
    rule.id = r["id"].get<std::string>();
    const auto cat = category_from_name(r["category"].get<std::string>());
    if (!cat)
      throw Error(ErrorCode::SchemaError,
                  where + ".category: " + r["category"].get<std::string>());
    rule.category = *cat;
    const auto kind = kind_from_name(r["kind"].get<std::string>());
    if (!kind)
      throw Error(ErrorCode::SchemaError,
                  where + ".kind: " + r["kind"].get<std::string>());
    rule.kind = *kind;
    if (r.contains("profile")) {
      if (!r["profile"].is_string())
        throw Error(ErrorCode::SchemaError, where + ".profile");
      const auto p = profile_from_name(r["profile"].get<std::string>());
      if (!p)
        throw Error(ErrorCode::SchemaError,
                    where + ".profile: " + r["profile"].get<std::string>());
      rule.profile = *p;
    }

    if (rule.kind == RuleKind::blocklist) {
      if (rs.blocklist.empty())
        throw Error(ErrorCode::SchemaError,
                    where + ": blocklist rule with empty blocklist");
    } else {
      if (!r.contains("parameter") || !r["parameter"].is_string() ||
          !r.contains("bound") || !r["bound"].is_number())
        throw Error(ErrorCode::SchemaError, where + ": need parameter/bound");
      rule.parameter = r["parameter"].get<std::string>();
      rule.bound = r["bound"].get<double>();
      double lo = 0.0, hi = kAgeRatingMax;
      if (rule.parameter != kAgeRatingField) {
        if (const ParamField* f = find_param_field(rule.parameter)) {
          lo = f->lo;
          hi = f->hi;
        } else {
          lo = 1.0;  // unknown field: surfaced later by verify(); skip range check
          hi = -1.0;
        }
      }
      if (lo <= hi && (rule.bound < lo || rule.bound > hi))
        throw Error(ErrorCode::BoundOutOfRange,
                    rule.id + ": bound " + std::to_string(rule.bound) +
                        " outside [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
    }

    for (const auto& existing : rs.rules)
      if (existing.id == rule.id)
        throw Error(ErrorCode::DuplicateRuleId, rule.id);
    rs.rules.push_back(std::move(rule));
  }
  return rs;
}

inline TemplateRegistry load_templates(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("templates: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("templates") ||
      !doc["templates"].is_array())
    throw Error(ErrorCode::SchemaError, "templates: missing 'templates' array");

  TemplateRegistry reg;
  for (size_t i = 0; i < doc["templates"].size(); ++i) {
    const auto& t = doc["templates"][i];
    const std::string where = "templates[" + std::to_string(i) + "]";
    if (!t.is_object() || !t.contains("id") || !t["id"].is_string() ||
        !t.contains("age_rating") || !t["age_rating"].is_number())
      throw Error(ErrorCode::SchemaError, where + ": need id/age_rating");
    ContentTemplate tpl;
    tpl.id = t["id"].get<std::string>();
    tpl.age_rating = t["age_rating"].get<double>();
    if (tpl.age_rating < 0.0 || tpl.age_rating > kAgeRatingMax)
      throw Error(ErrorCode::BoundOutOfRange, where + ".age_rating");
    if (t.contains("words")) {
      if (!t["words"].is_array())
        throw Error(ErrorCode::SchemaError, where + ".words");
      for (const auto& w : t["words"]) {
        if (!w.is_string())
          throw Error(ErrorCode::SchemaError, where + ".words entries");
        tpl.words.push_back(w.get<std::string>());
      }
    }
    if (reg.find(tpl.id) != nullptr)
      throw Error(ErrorCode::DuplicateRuleId, where + ": duplicate id " + tpl.id);
    reg.templates.push_back(std::move(tpl));
  }
  return reg;
}

inline RuleSet default_rules() { return load_rules(std::string(kDefaultRulesJson)); }
inline TemplateRegistry default_templates() {
  return load_templates(std::string(kDefaultTemplatesJson));
}

}  // namespace ern
