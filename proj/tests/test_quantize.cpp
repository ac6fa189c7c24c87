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

#include "ern/quantize.hpp"

#include <cmath>
#include <random>

#include "gtest/gtest.h"

namespace {

using namespace ern::nn;

WeightSet<float> random_weights(const NetworkSpec& spec, Shape3 input,
                                uint64_t seed) {
  auto w = init_weights<float>(spec, input, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<float> dist(-0.4f, 0.4f);
  std::uniform_real_distribution<float> pos(0.3f, 1.5f);
  for (auto& t : w.tensors) {
    if (t.name.ends_with(".running_var")) {
      for (auto& v : t.values) v = pos(rng);
    } else if (t.name.ends_with(".kernel") || t.name.ends_with(".weight")) {
      continue;  // keep He init
    } else {
      for (auto& v : t.values) v = dist(rng);
    }
  }
  return w;
}

TEST(Quantize, ScaleAndStoredValuesMatchArithmetic) {
  NetworkSpec spec;
  spec.layers = {Dense{3}};
  WeightSet<float> w;
  NamedTensor<float> t;
  t.name = "dense1.weight";
  t.dims = {1, 3};
  t.values = {0.5f, -1.0f, 0.25f};
  w.tensors.push_back(t);

  const auto q = quantize_int8(spec, w);
  const auto& qt = q.tensors[0];
  EXPECT_FLOAT_EQ(qt.qscale, 1.0f / 127.0f);
  ASSERT_EQ(qt.qvalues.size(), 3u);
  EXPECT_EQ(qt.qvalues[0], 64);  // round(0.5 * 127) = round(63.5)
  EXPECT_EQ(qt.qvalues[1], -127);
  EXPECT_EQ(qt.qvalues[2], 32);  // round(31.75)
}

TEST(Quantize, AllZeroTensorGetsUnitScale) {
  NetworkSpec spec;
  spec.layers = {Dense{2}};
  WeightSet<float> w;
  NamedTensor<float> t;
  t.name = "dense1.weight";
  t.dims = {2, 2};
  t.values = {0.0f, 0.0f, 0.0f, 0.0f};
  w.tensors.push_back(t);
  const auto q = quantize_int8(spec, w);
  EXPECT_FLOAT_EQ(q.tensors[0].qscale, 1.0f);
  for (int8_t v : q.tensors[0].qvalues) EXPECT_EQ(v, 0);
}

TEST(Quantize, PayloadIsQuarterOfFloat) {
  const auto spec = NetworkSpec::classifier(4);
  const auto w = random_weights(spec, {64, 32, 1}, 21);
  const auto q = quantize_int8(spec, w);
  const double ratio = static_cast<double>(q.payload_bytes()) /
                       static_cast<double>(w.payload_bytes());
  EXPECT_LE(ratio, 0.26);
}

TEST(Quantize, FoldedBatchNormPreservesForward) {
  const auto spec = NetworkSpec::classifier(4);
  const auto w = random_weights(spec, {64, 32, 1}, 22);
  const auto folded = fold_batchnorm(spec, w);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (int trial = 0; trial < 10; ++trial) {
    auto input = Tensor<float>::zeros({64, 32, 1});
    for (auto& v : input.v) v = dist(rng);
    const auto a = forward(spec, w, input);
    const auto b = forward(spec, folded, input);
    for (size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-4);
  }
}

TEST(Quantize, DequantizedArgmaxMostlyAgrees) {
  const auto spec = NetworkSpec::classifier(4);
  const auto w = random_weights(spec, {64, 32, 1}, 24);
  const auto q = quantize_int8(spec, w);

  std::mt19937_64 rng(25);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Workspace<float> ws_a, ws_b;
  int agree = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    auto input = Tensor<float>::zeros({64, 32, 1});
    for (auto& v : input.v) v = dist(rng);
    const auto a = forward(spec, w, input, ws_a);
    const auto b = forward(spec, q, input, ws_b);
    const int pa = static_cast<int>(std::max_element(a.begin(), a.end()) - a.begin());
    const int pb = static_cast<int>(std::max_element(b.begin(), b.end()) - b.begin());
    agree += pa == pb;
  }
  EXPECT_GE(agree, trials * 90 / 100);
}

TEST(Quantize, DequantizeRestoresFloatDtype) {
  const auto spec = NetworkSpec::classifier(4);
  const auto q = quantize_int8(spec, random_weights(spec, {64, 32, 1}, 26));
  const auto d = dequantize(q);
  for (size_t i = 0; i < q.tensors.size(); ++i) {
    EXPECT_EQ(d.tensors[i].dtype, Dtype::f32);
    EXPECT_EQ(d.tensors[i].values, q.tensors[i].values);
    EXPECT_TRUE(d.tensors[i].qvalues.empty());
  }
  EXPECT_EQ(d.payload_bytes(), 4 * q.payload_bytes());
}

}  // namespace
