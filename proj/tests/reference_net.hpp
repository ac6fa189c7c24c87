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

// Test-only reference forward pass: direct nested loops, no im2col, no shared
// code with the production kernels. Deliberately slow and obvious.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "ern/net.hpp"

namespace ern_testing {

template <typename S>
ern::nn::Tensor<S> reference_conv(const ern::nn::Tensor<S>& in,
                                  const ern::nn::Conv2d& conv,
                                  const std::vector<S>& kernel,
                                  const std::vector<S>& bias) {
  const int oh = (in.shape.h + conv.stride - 1) / conv.stride;
  const int ow = (in.shape.w + conv.stride - 1) / conv.stride;
  const int pad_h = std::max((oh - 1) * conv.stride + conv.kernel_h - in.shape.h, 0) / 2;
  const int pad_w = std::max((ow - 1) * conv.stride + conv.kernel_w - in.shape.w, 0) / 2;
  auto out = ern::nn::Tensor<S>::zeros({oh, ow, conv.out_channels});
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int co = 0; co < conv.out_channels; ++co) {
        S acc = bias[co];
        for (int ky = 0; ky < conv.kernel_h; ++ky)
          for (int kx = 0; kx < conv.kernel_w; ++kx)
            for (int ci = 0; ci < in.shape.c; ++ci) {
              const int iy = oy * conv.stride - pad_h + ky;
              const int ix = ox * conv.stride - pad_w + kx;
              if (iy < 0 || iy >= in.shape.h || ix < 0 || ix >= in.shape.w)
                continue;
              const size_t widx =
                  ((size_t(ky) * conv.kernel_w + kx) * in.shape.c + ci) *
                      conv.out_channels + co;
              acc += in.at(iy, ix, ci) * kernel[widx];
            }
        out.at(oy, ox, co) = acc;
      }
  return out;
}

/// Inference-mode reference forward (BN via running statistics).
template <typename S>
std::vector<S> reference_forward(const ern::nn::NetworkSpec& spec,
                                 const ern::nn::WeightSet<S>& weights,
                                 const ern::nn::Tensor<S>& input) {
  using namespace ern::nn;
  Tensor<S> cur = input;
  int conv_i = 0, bn_i = 0, dense_i = 0;
  std::vector<S> probs;
  for (const Layer& layer : spec.layers) {
    if (const auto* conv = std::get_if<Conv2d>(&layer)) {
      ++conv_i;
      const std::string p = "conv" + std::to_string(conv_i);
      cur = reference_conv(cur, *conv, weights.at(p + ".kernel").values,
                           weights.at(p + ".bias").values);
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
      ++bn_i;
      const std::string p = "bn" + std::to_string(bn_i);
      const auto& gamma = weights.at(p + ".gamma").values;
      const auto& beta = weights.at(p + ".beta").values;
      const auto& mean = weights.at(p + ".running_mean").values;
      const auto& var = weights.at(p + ".running_var").values;
      for (int y = 0; y < cur.shape.h; ++y)
        for (int x = 0; x < cur.shape.w; ++x)
          for (int c = 0; c < cur.shape.c; ++c)
            cur.at(y, x, c) = gamma[c] * (cur.at(y, x, c) - mean[c]) /
                                  std::sqrt(var[c] + static_cast<S>(bn->epsilon)) +
                              beta[c];
    } else if (std::holds_alternative<Relu>(layer)) {
      for (auto& v : cur.v) v = std::max(v, S(0));
    } else if (const auto* pool = std::get_if<MaxPool2d>(&layer)) {
      auto out = Tensor<S>::zeros(
          {cur.shape.h / pool->pool_h, cur.shape.w / pool->pool_w, cur.shape.c});
      for (int oy = 0; oy < out.shape.h; ++oy)
        for (int ox = 0; ox < out.shape.w; ++ox)
          for (int c = 0; c < cur.shape.c; ++c) {
            S best = cur.at(oy * pool->pool_h, ox * pool->pool_w, c);
            for (int py = 0; py < pool->pool_h; ++py)
              for (int px = 0; px < pool->pool_w; ++px)
                best = std::max(best, cur.at(oy * pool->pool_h + py,
                                             ox * pool->pool_w + px, c));
            out.at(oy, ox, c) = best;
          }
      cur = out;
    } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
      auto out = Tensor<S>::zeros({1, 1, cur.shape.c});
      for (int c = 0; c < cur.shape.c; ++c) {
        S acc = S(0);
        for (int y = 0; y < cur.shape.h; ++y)
          for (int x = 0; x < cur.shape.w; ++x) acc += cur.at(y, x, c);
        out.at(0, 0, c) = acc / static_cast<S>(cur.shape.h * cur.shape.w);
      }
      cur = out;
    } else if (const auto* dense = std::get_if<Dense>(&layer)) {
      ++dense_i;
      const std::string p = "dense" + std::to_string(dense_i);
      const auto& w = weights.at(p + ".weight").values;
      const auto& b = weights.at(p + ".bias").values;
      auto out = Tensor<S>::zeros({1, 1, dense->out_features});
      const size_t in_n = cur.shape.count();
      for (int o = 0; o < dense->out_features; ++o) {
        S acc = b[o];
        for (size_t k = 0; k < in_n; ++k)
          acc += cur.v[k] * w[k * dense->out_features + o];
        out.v[o] = acc;
      }
      cur = out;
    } else {  // Softmax
      probs = cur.v;
      S mx = probs[0];
      for (S v : probs) mx = std::max(mx, v);
      S sum = S(0);
      for (S& v : probs) {
        v = std::exp(v - mx);
        sum += v;
      }
      for (S& v : probs) v /= sum;
    }
  }
  return probs;
}

}  // namespace ern_testing
