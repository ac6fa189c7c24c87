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
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ern/error.hpp"
#include "ern/net.hpp"

namespace ern::nn {

enum class Optimizer { sgd, adamw };

inline const char* optimizer_name(Optimizer o) {
  return o == Optimizer::sgd ? "sgd" : "adamw";
}

inline Optimizer optimizer_from_name(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adamw") return Optimizer::adamw;
  throw Error(ErrorCode::UsageError, "unknown optimizer: " + s);
}

struct TrainOptions {
  Optimizer optimizer = Optimizer::adamw;
  double lr = 1e-4;
  int epochs = 100;
  int batch_size = 32;
  uint64_t seed = 0;
  int patience = 10;  // early stopping on training accuracy
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double bn_momentum = 0.1;
};

struct LabeledExample {
  Tensor<float> features;
  int label = 0;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  WeightSet<float> weights;  // best-accuracy snapshot
  std::vector<EpochStats> trace;
  int best_epoch = -1;
  double best_accuracy = 0.0;
};

/// Mini-batch training with gradient accumulation; BN uses per-sample batch
/// statistics and feeds the running estimates used at inference time.
/// Deterministic for a fixed seed (single-threaded, seeded shuffling).
inline TrainResult train(const NetworkSpec& spec,
                         const std::vector<LabeledExample>& dataset,
                         const TrainOptions& opts = {}) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "no examples");
  const int num_classes = spec.num_classes();
  for (const auto& ex : dataset)
    if (ex.label < 0 || ex.label >= num_classes)
      throw Error(ErrorCode::ShapeMismatch,
                  "label " + std::to_string(ex.label) + " out of range");

  std::mt19937_64 rng(opts.seed);
  WeightSet<float> weights =
      init_weights<float>(spec, dataset[0].features.shape, rng());

  // Adam moments, allocated only for trainable tensors.
  std::vector<std::vector<float>> m(weights.tensors.size());
  std::vector<std::vector<float>> v(weights.tensors.size());
  for (size_t i = 0; i < weights.tensors.size(); ++i) {
    if (!is_trainable(weights.tensors[i].name)) continue;
    m[i].assign(weights.tensors[i].values.size(), 0.0f);
    v[i].assign(weights.tensors[i].values.size(), 0.0f);
  }

  TrainResult result;
  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), size_t{0});

  long adam_step = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    size_t correct = 0;

    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(opts.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(opts.batch_size));
      WeightSet<float> grad_sum;
      for (size_t s = start; s < end; ++s) {
        const auto& ex = dataset[order[s]];
        auto r = backward(spec, weights, ex.features, ex.label, opts.bn_momentum);
        if (!std::isfinite(r.loss))
          throw Error(ErrorCode::DivergedLoss,
                      "non-finite loss at epoch " + std::to_string(epoch));
        epoch_loss += r.loss;
        const int pred = static_cast<int>(
            std::max_element(r.probs.begin(), r.probs.end()) - r.probs.begin());
        if (pred == ex.label) ++correct;
        if (grad_sum.tensors.empty()) {
          grad_sum = std::move(r.grads);
        } else {
          for (size_t i = 0; i < grad_sum.tensors.size(); ++i)
            for (size_t j = 0; j < grad_sum.tensors[i].values.size(); ++j)
              grad_sum.tensors[i].values[j] += r.grads.tensors[i].values[j];
        }
      }

      const float inv_batch = 1.0f / static_cast<float>(end - start);
      ++adam_step;
      const double bc1 = 1.0 - std::pow(opts.beta1, adam_step);
      const double bc2 = 1.0 - std::pow(opts.beta2, adam_step);
      for (size_t i = 0; i < weights.tensors.size(); ++i) {
        auto& t = weights.tensors[i];
        if (!is_trainable(t.name)) continue;
        const auto& g = grad_sum.at(t.name).values;
        for (size_t j = 0; j < t.values.size(); ++j) {
          const float gj = g[j] * inv_batch;
          if (opts.optimizer == Optimizer::sgd) {
            t.values[j] -= static_cast<float>(opts.lr) * gj;
          } else {
            m[i][j] = static_cast<float>(opts.beta1) * m[i][j] +
                      static_cast<float>(1.0 - opts.beta1) * gj;
            v[i][j] = static_cast<float>(opts.beta2) * v[i][j] +
                      static_cast<float>(1.0 - opts.beta2) * gj * gj;
            const double mhat = m[i][j] / bc1;
            const double vhat = v[i][j] / bc2;
            t.values[j] -= static_cast<float>(
                opts.lr * (mhat / (std::sqrt(vhat) + opts.adam_eps) +
                           opts.weight_decay * t.values[j]));
          }
        }
      }
    }

    EpochStats stats;
    stats.loss = epoch_loss / static_cast<double>(dataset.size());
    stats.accuracy = static_cast<double>(correct) / dataset.size();
    result.trace.push_back(stats);

    if (stats.accuracy > result.best_accuracy || result.best_epoch < 0) {
      result.best_accuracy = stats.accuracy;
      result.best_epoch = epoch;
      result.weights = weights;
    }
    if (epoch - result.best_epoch >= opts.patience) break;
    if (result.best_accuracy >= 1.0 && stats.accuracy >= 1.0) break;
  }
  return result;
}

/// Inference-mode accuracy over a labeled set.
inline double evaluate(const NetworkSpec& spec, const WeightSet<float>& weights,
                       const std::vector<LabeledExample>& dataset) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "no examples");
  Workspace<float> ws;
  size_t correct = 0;
  for (const auto& ex : dataset) {
    const auto p = forward(spec, weights, ex.features, ws);
    const int pred =
        static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    if (pred == ex.label) ++correct;
  }
  return static_cast<double>(correct) / dataset.size();
}

}  // namespace ern::nn
