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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ern/audio.hpp"
#include "ern/content.hpp"
#include "ern/emotion.hpp"
#include "ern/error.hpp"
#include "ern/net.hpp"
#include "ern/policy.hpp"
#include "ern/safety.hpp"
#include "ern/synth.hpp"
#include "ern/weights_io.hpp"

namespace ern {

struct ForcedEmotion {
  std::string label;
  ArousalLevel arousal = ArousalLevel::low;
};

struct PipelineConfig {
  int max_iterations = 3;  // K
  bool jitter = false;
  uint64_t seed = 0;
  bool bypass_policy = false;  // fixed mode = play
  bool bypass_safety = false;  // emit unverified, record post-hoc result
  EmotionCategories categories = EmotionCategories::default4();
  ArousalConfig arousal;
  nn::NetworkSpec spec;
  nn::WeightSet<float> weights;
  PolicyTable policy;
  RuleSet rules;
  ContentConfig content;
  TemplateRegistry templates;
  GeneratorNet generator;
  std::optional<ForcedEmotion> forced_emotion;  // test hook, skips the CNN
};

/// Raw inputs for config assembly; empty optionals select shipped defaults.
struct PipelineOptions {
  std::optional<std::string> policy_json;
  std::optional<std::string> rules_json;
  std::optional<std::string> content_json;
  std::optional<std::string> templates_json;
  std::optional<std::string> weights_path;
  std::optional<Profile> profile;  // overrides the ruleset's default
  int max_iterations = 3;
  bool jitter = false;
  uint64_t seed = 0;
  bool bypass_policy = false;
  bool bypass_safety = false;
};

/// Builds and validates a runnable config. Guarantees the fallback invariant:
/// soothing defaults pass the active ruleset, and every mode's template
/// exists, so the safety loop can always terminate with verified content.
inline PipelineConfig load_pipeline_config(const PipelineOptions& opt) {
  if (opt.max_iterations < 1)
    throw Error(ErrorCode::UsageError, "max iterations must be >= 1");

  PipelineConfig cfg;
  cfg.max_iterations = opt.max_iterations;
  cfg.jitter = opt.jitter;
  cfg.seed = opt.seed;
  cfg.bypass_policy = opt.bypass_policy;
  cfg.bypass_safety = opt.bypass_safety;
  cfg.policy = opt.policy_json ? load_policy(*opt.policy_json) : default_policy();
  cfg.rules = opt.rules_json ? load_rules(*opt.rules_json) : default_rules();
  cfg.content = opt.content_json ? load_content_config(*opt.content_json)
                                 : default_content_config();
  cfg.templates = opt.templates_json ? load_templates(*opt.templates_json)
                                     : default_templates();
  if (opt.profile) {
    if (*opt.profile == Profile::all)
      throw Error(ErrorCode::UsageError, "active profile must be child or general");
    cfg.rules.active_profile = *opt.profile;
  }

  cfg.spec = nn::NetworkSpec::classifier(cfg.categories.size());
  if (opt.weights_path) {
    cfg.weights = nn::load_weights(*opt.weights_path, cfg.spec, {64, 8, 1});
    const bool any_i8 =
        std::any_of(cfg.weights.tensors.begin(), cfg.weights.tensors.end(),
                    [](const auto& t) { return t.dtype == nn::Dtype::i8; });
    if (any_i8) cfg.weights = nn::dequantize(cfg.weights);
  } else {
    cfg.weights = nn::build_weights<float>(cfg.spec, {64, 8, 1});
  }

  // config-time validation of the fallback guarantees
  for (int m = 0; m < kNumModes; ++m) {
    const auto& params = cfg.content.defaults[m];
    if (params.template_id &&
        cfg.templates.find(*params.template_id) == nullptr)
      throw Error(ErrorCode::ConfigError,
                  std::string(mode_name(static_cast<ResponseMode>(m))) +
                      " references unknown template " + *params.template_id);
  }
  const auto soothing_check =
      verify(cfg.content.for_mode(ResponseMode::soothing), cfg.rules,
             cfg.templates);
  if (!soothing_check.passed)
    throw Error(ErrorCode::ConfigError,
                "soothing defaults fail the active ruleset; fallback content "
                "would be unsafe");

  cfg.generator =
      init_generator(cfg.content, static_cast<int>(cfg.rules.rules.size()));
  return cfg;
}

struct StageTimings {
  double feature_ms = 0.0;
  double inference_ms = 0.0;
  double policy_ms = 0.0;
  double generation_ms = 0.0;
  double verification_ms = 0.0;
  double total_ms = 0.0;
};

struct PipelineOutput {
  EmotionState emotion;
  ResponseMode mode = ResponseMode::soothing;
  ContentParameters params;
  bool verified = false;
  int attempts_used = 0;
  bool used_fallback = false;
  StageTimings timings;
};

namespace pipeline_detail {

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace pipeline_detail

/// Runs the four agents over one segment: classify, decide mode, generate,
/// verify, regenerating up to K attempts and falling back to soothing
/// defaults on exhaustion. Holds the inference arena, so one instance should
/// process many segments.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {}

  const PipelineConfig& config() const { return cfg_; }

  PipelineOutput process(const AudioSegment& segment) {
    return process(segment, cfg_.seed);
  }

  PipelineOutput process(const AudioSegment& segment, uint64_t run_seed) {
    namespace pd = pipeline_detail;
    PipelineOutput out;
    const auto t_start = pd::Clock::now();

    auto t0 = pd::Clock::now();
    const FeatureTensor features = build_input_tensor(segment);
    out.timings.feature_ms = pd::ms_since(t0);

    t0 = pd::Clock::now();
    if (cfg_.forced_emotion) {
      const int idx = cfg_.categories.index_of(cfg_.forced_emotion->label);
      if (idx < 0)
        throw Error(ErrorCode::ConfigError,
                    "forced emotion label " + cfg_.forced_emotion->label);
      out.emotion.distribution.assign(cfg_.categories.size(), 0.0);
      out.emotion.distribution[idx] = 1.0;
      out.emotion.predicted_index = idx;
      out.emotion.predicted = cfg_.forced_emotion->label;
      out.emotion.arousal = cfg_.forced_emotion->arousal;
      out.emotion.arousal_score =
          cfg_.forced_emotion->arousal == ArousalLevel::high ? 1.0 : 0.0;
      out.emotion.confidence = 1.0;
    } else {
      const ArousalEstimate arousal = estimate_arousal(segment, cfg_.arousal);
      out.emotion = classify_features(features, arousal, cfg_.spec,
                                      cfg_.weights, cfg_.categories, ws_);
    }
    out.timings.inference_ms = pd::ms_since(t0);

    t0 = pd::Clock::now();
    out.mode = cfg_.bypass_policy
                   ? ResponseMode::play
                   : decide_mode(out.emotion.predicted, out.emotion.arousal,
                                 cfg_.policy);
    out.timings.policy_ms = pd::ms_since(t0);

    VerificationResult result;
    for (int k = 0; k < cfg_.max_iterations; ++k) {
      const std::optional<uint64_t> jitter_seed =
          cfg_.jitter ? std::optional<uint64_t>(pd::mix_seed(run_seed, k))
                      : std::nullopt;
      t0 = pd::Clock::now();
      out.params = k == 0 ? generate(out.mode, cfg_.generator, jitter_seed)
                          : regenerate(out.mode, out.params, result,
                                       cfg_.generator, k, cfg_.max_iterations,
                                       jitter_seed);
      out.timings.generation_ms += pd::ms_since(t0);
      out.attempts_used = k + 1;

      t0 = pd::Clock::now();
      result = verify(out.params, cfg_.rules, cfg_.templates);
      out.timings.verification_ms += pd::ms_since(t0);
      if (cfg_.bypass_safety || result.passed) break;
    }

    if (cfg_.bypass_safety) {
      out.verified = result.passed;  // post-hoc record, not enforced
    } else if (result.passed) {
      out.verified = true;
    } else {
      // exhausted: emit default safe content, re-verified
      t0 = pd::Clock::now();
      out.params = cfg_.content.for_mode(ResponseMode::soothing);
      result = verify(out.params, cfg_.rules, cfg_.templates);
      out.timings.verification_ms += pd::ms_since(t0);
      out.used_fallback = true;
      if (!result.passed)
        throw Error(ErrorCode::ConfigError,
                    "fallback content failed verification");
      out.verified = true;
    }

    out.timings.total_ms = pd::ms_since(t_start);
    return out;
  }

 private:
  PipelineConfig cfg_;
  nn::Workspace<float> ws_;
};

inline PipelineOutput process_segment(const AudioSegment& segment,
                                      const PipelineConfig& cfg) {
  Pipeline p(cfg);
  return p.process(segment);
}

// ---------------------------------------------------------------------------
// Batch metrics

struct LatencyStats {
  double mean = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

inline LatencyStats latency_stats(std::vector<double> samples) {
  LatencyStats out;
  if (samples.empty()) return out;
  double sum = 0.0;
  for (double v : samples) sum += v;
  out.mean = sum / static_cast<double>(samples.size());
  std::sort(samples.begin(), samples.end());
  auto rank = [&](double q) {
    const size_t r = static_cast<size_t>(
        std::ceil(q * static_cast<double>(samples.size())));
    return samples[std::min(samples.size() - 1, std::max<size_t>(r, 1) - 1)];
  };
  out.p95 = rank(0.95);
  out.p99 = rank(0.99);
  return out;
}

struct BatchAnnotations {
  std::vector<ResponseMode> modes;              // expected mode per segment
  std::vector<ContentParameters> target_params; // optional, per segment
};

struct RunMetrics {
  size_t n = 0;
  double compliance_rate = 0.0;
  double regeneration_rate = 0.0;  // attempts_used > 1
  double fallback_rate = 0.0;
  std::optional<double> mode_consistency;
  std::optional<std::array<double, kNumParamFields>> param_mae;
  std::optional<double> param_mae_mean;
  LatencyStats feature, inference, policy, generation, verification, total;
};

/// Sequentially processes a batch; per-segment decision seeds derive from
/// the config seed and the segment index.
inline RunMetrics run_batch(const std::vector<AudioSegment>& segments,
                            Pipeline& pipeline,
                            const BatchAnnotations* annotations = nullptr,
                            std::vector<PipelineOutput>* outputs = nullptr) {
  if (annotations != nullptr && !annotations->modes.empty() &&
      annotations->modes.size() != segments.size())
    throw Error(ErrorCode::LengthMismatch, "mode annotations vs segments");
  if (annotations != nullptr && !annotations->target_params.empty() &&
      annotations->target_params.size() != segments.size())
    throw Error(ErrorCode::LengthMismatch, "target params vs segments");

  RunMetrics m;
  m.n = segments.size();
  size_t compliant = 0, regenerated = 0, fallbacks = 0, mode_matches = 0;
  std::array<double, kNumParamFields> mae_sum{};
  std::vector<double> t_feature, t_inference, t_policy, t_generation,
      t_verification, t_total;
  const uint64_t base_seed = pipeline.config().seed;

  for (size_t i = 0; i < segments.size(); ++i) {
    PipelineOutput out =
        pipeline.process(segments[i], pipeline_detail::mix_seed(base_seed, i));
    compliant += out.verified;
    regenerated += out.attempts_used > 1;
    fallbacks += out.used_fallback;
    if (annotations != nullptr && !annotations->modes.empty())
      mode_matches += annotations->modes[i] == out.mode;
    if (annotations != nullptr && !annotations->target_params.empty()) {
      const auto& target = annotations->target_params[i];
      for (int j = 0; j < kNumParamFields; ++j) {
        const auto& f = kParamFields[j];
        mae_sum[j] += std::abs(out.params.*(f.member) - target.*(f.member));
      }
    }
    t_feature.push_back(out.timings.feature_ms);
    t_inference.push_back(out.timings.inference_ms);
    t_policy.push_back(out.timings.policy_ms);
    t_generation.push_back(out.timings.generation_ms);
    t_verification.push_back(out.timings.verification_ms);
    t_total.push_back(out.timings.total_ms);
    if (outputs) outputs->push_back(std::move(out));
  }

  const double n = static_cast<double>(std::max<size_t>(m.n, 1));
  m.compliance_rate = compliant / n;
  m.regeneration_rate = regenerated / n;
  m.fallback_rate = fallbacks / n;
  if (annotations != nullptr && !annotations->modes.empty())
    m.mode_consistency = mode_matches / n;
  if (annotations != nullptr && !annotations->target_params.empty()) {
    std::array<double, kNumParamFields> mae{};
    double total = 0.0;
    for (int j = 0; j < kNumParamFields; ++j) {
      mae[j] = mae_sum[j] / n;
      total += mae[j];
    }
    m.param_mae = mae;
    m.param_mae_mean = total / kNumParamFields;
  }
  m.feature = latency_stats(t_feature);
  m.inference = latency_stats(t_inference);
  m.policy = latency_stats(t_policy);
  m.generation = latency_stats(t_generation);
  m.verification = latency_stats(t_verification);
  m.total = latency_stats(t_total);
  return m;
}

/// Latency measurement over deterministic synthetic segments,
/// single-threaded, warmup runs discarded.
inline RunMetrics run_benchmark(Pipeline& pipeline, int iterations,
                                int warmup) {
  if (iterations < 30)
    throw Error(ErrorCode::UsageError, "benchmark needs >= 30 iterations");
  if (warmup < 0) throw Error(ErrorCode::UsageError, "negative warmup");

  for (int i = 0; i < warmup; ++i) {
    const AudioSegment seg = synth::benchmark_segment(i);
    (void)pipeline.process(seg, pipeline_detail::mix_seed(0xFEED, i));
  }
  std::vector<AudioSegment> segments;
  segments.reserve(iterations);
  for (int i = 0; i < iterations; ++i)
    segments.push_back(synth::benchmark_segment(warmup + i));
  return run_batch(segments, pipeline);
}

// ---------------------------------------------------------------------------
// JSON rendering (machine-readable records)

inline nlohmann::json to_json(const PipelineOutput& out,
                              const EmotionCategories& cats) {
  nlohmann::json dist = nlohmann::json::object();
  for (int i = 0; i < cats.size(); ++i)
    dist[cats.labels[i]] = out.emotion.distribution[i];
  nlohmann::json params;
  for (const auto& f : kParamFields) params[f.name] = out.params.*(f.member);
  params["template_id"] =
      out.params.template_id ? nlohmann::json(*out.params.template_id)
                             : nlohmann::json(nullptr);
  return nlohmann::json{
      {"emotion",
       {{"distribution", dist},
        {"predicted", out.emotion.predicted},
        {"arousal", arousal_name(out.emotion.arousal)},
        {"arousal_score", out.emotion.arousal_score},
        {"confidence", out.emotion.confidence}}},
      {"mode", mode_name(out.mode)},
      {"params", params},
      {"verified", out.verified},
      {"attempts_used", out.attempts_used},
      {"used_fallback", out.used_fallback},
      {"stage_timings_ms",
       {{"feature", out.timings.feature_ms},
        {"inference", out.timings.inference_ms},
        {"policy", out.timings.policy_ms},
        {"generation", out.timings.generation_ms},
        {"verification", out.timings.verification_ms},
        {"total", out.timings.total_ms}}}};
}

inline nlohmann::json to_json(const LatencyStats& s) {
  return {{"mean_ms", s.mean}, {"p95_ms", s.p95}, {"p99_ms", s.p99}};
}

inline nlohmann::json to_json(const RunMetrics& m) {
  nlohmann::json j{{"n", m.n},
                   {"compliance_rate", m.compliance_rate},
                   {"regeneration_rate", m.regeneration_rate},
                   {"fallback_rate", m.fallback_rate},
                   {"latency",
                    {{"feature", to_json(m.feature)},
                     {"inference", to_json(m.inference)},
                     {"policy", to_json(m.policy)},
                     {"generation", to_json(m.generation)},
                     {"verification", to_json(m.verification)},
                     {"total", to_json(m.total)}}}};
  if (m.mode_consistency) j["mode_consistency"] = *m.mode_consistency;
  if (m.param_mae) {
    nlohmann::json mae;
    for (int i = 0; i < kNumParamFields; ++i)
      mae[kParamFields[i].name] = (*m.param_mae)[i];
    j["param_mae"] = mae;
    j["param_mae_mean"] = *m.param_mae_mean;
  }
  return j;
}

}  // namespace ern
