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
#include <variant>

#include "ern/error.hpp"
#include "ern/net.hpp"

namespace ern::nn {

/// Absorbs each BatchNorm into the convolution immediately before it:
/// kernel[...,co] *= gamma/sqrt(var+eps), bias' = (bias-mean)*that + beta.
/// The BN tensors become the identity transform so the spec stays valid.
inline WeightSet<float> fold_batchnorm(const NetworkSpec& spec,
                                       const WeightSet<float>& weights) {
  WeightSet<float> out = weights;
  int conv_i = 0, bn_i = 0;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    if (std::holds_alternative<Conv2d>(spec.layers[i])) ++conv_i;
    if (!std::holds_alternative<BatchNorm>(spec.layers[i])) continue;
    ++bn_i;
    if (i == 0 || !std::holds_alternative<Conv2d>(spec.layers[i - 1])) continue;

    const auto* bn = std::get_if<BatchNorm>(&spec.layers[i]);
    const std::string bp = "bn" + std::to_string(bn_i);
    const std::string cp = "conv" + std::to_string(conv_i);
    auto& gamma = out.at(bp + ".gamma").values;
    auto& beta = out.at(bp + ".beta").values;
    auto& mean = out.at(bp + ".running_mean").values;
    auto& var = out.at(bp + ".running_var").values;
    auto& kernel = out.at(cp + ".kernel").values;
    auto& bias = out.at(cp + ".bias").values;
    const size_t cout = bias.size();

    for (size_t co = 0; co < cout; ++co) {
      const float scale =
          gamma[co] / std::sqrt(var[co] + static_cast<float>(bn->epsilon));
      for (size_t k = co; k < kernel.size(); k += cout) kernel[k] *= scale;
      bias[co] = (bias[co] - mean[co]) * scale + beta[co];
      gamma[co] = 1.0f;
      beta[co] = 0.0f;
      mean[co] = 0.0f;
      var[co] = 1.0f - static_cast<float>(bn->epsilon);
    }
  }
  return out;
}

/// Per-tensor symmetric INT8: scale = max|w|/127, stored round(w/scale) in
/// [-127, 127]; an all-zero tensor gets scale 1. BN is folded first. The
/// float view holds the dequantized values, so the set drops straight into
/// the float forward path.
inline WeightSet<float> quantize_int8(const NetworkSpec& spec,
                                      const WeightSet<float>& weights) {
  WeightSet<float> out = fold_batchnorm(spec, weights);
  for (auto& t : out.tensors) {
    float amax = 0.0f;
    for (float v : t.values) amax = std::max(amax, std::abs(v));
    t.qscale = amax > 0.0f ? amax / 127.0f : 1.0f;
    t.qvalues.resize(t.values.size());
    for (size_t j = 0; j < t.values.size(); ++j) {
      const long q = std::lround(t.values[j] / t.qscale);
      t.qvalues[j] = static_cast<int8_t>(std::clamp<long>(q, -127, 127));
      t.values[j] = static_cast<float>(t.qvalues[j]) * t.qscale;
    }
    t.dtype = Dtype::i8;
  }
  return out;
}

/// Expands an int8 set back to plain float tensors.
inline WeightSet<float> dequantize(const WeightSet<float>& weights) {
  WeightSet<float> out = weights;
  for (auto& t : out.tensors) {
    if (t.dtype != Dtype::i8) continue;
    t.values.resize(t.qvalues.size());
    for (size_t j = 0; j < t.qvalues.size(); ++j)
      t.values[j] = static_cast<float>(t.qvalues[j]) * t.qscale;
    t.dtype = Dtype::f32;
    t.qscale = 1.0f;
    t.qvalues.clear();
  }
  return out;
}

}  // namespace ern::nn
