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

#include "ern/train.hpp"

#include <filesystem>
#include <random>

#include "ern/weights_io.hpp"
#include "gtest/gtest.h"

namespace {

using namespace ern::nn;
using ern::Error;
using ern::ErrorCode;

NetworkSpec small_spec(int classes) {
  NetworkSpec spec;
  spec.layers = {Conv2d{4}, BatchNorm{4}, Relu{}, MaxPool2d{2, 2},
                 Conv2d{8}, BatchNorm{8}, Relu{}, GlobalAvgPool{},
                 Dense{classes}, Softmax{}};
  return spec;
}

Tensor<float> random_input(Shape3 shape, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  auto t = Tensor<float>::zeros(shape);
  for (auto& v : t.v) v = dist(rng);
  return t;
}

TEST(Train, MemorizesSingleExample) {
  const auto spec = small_spec(3);
  std::vector<LabeledExample> data;
  data.push_back({random_input({8, 8, 1}, 1), 2});
  TrainOptions opts;
  opts.lr = 1e-2;
  opts.epochs = 50;
  opts.batch_size = 1;
  opts.seed = 5;
  const auto result = train(spec, data, opts);
  EXPECT_DOUBLE_EQ(result.best_accuracy, 1.0);
}

TEST(Train, IdenticalInputsDifferentLabelsCapAtHalf) {
  const auto spec = small_spec(2);
  const auto x = random_input({8, 8, 1}, 2);
  std::vector<LabeledExample> data{{x, 0}, {x, 1}};
  TrainOptions opts;
  opts.lr = 1e-2;
  opts.epochs = 15;
  opts.batch_size = 2;
  opts.patience = 100;
  const auto result = train(spec, data, opts);
  EXPECT_LE(result.best_accuracy, 0.5);
}

TEST(Train, DeterministicGivenSeed) {
  const auto spec = small_spec(3);
  std::vector<LabeledExample> data;
  for (int i = 0; i < 6; ++i)
    data.push_back({random_input({8, 8, 1}, 10 + i), i % 3});
  TrainOptions opts;
  opts.epochs = 3;
  opts.lr = 1e-3;
  opts.seed = 99;
  opts.patience = 100;
  const auto a = train(spec, data, opts);
  const auto b = train(spec, data, opts);

  auto dir = std::filesystem::temp_directory_path() / "ern_train_tests";
  std::filesystem::create_directories(dir);
  const auto pa = dir / "a.ernw";
  const auto pb = dir / "b.ernw";
  save_weights(a.weights, pa.string());
  save_weights(b.weights, pb.string());

  std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
  std::vector<char> ba((std::istreambuf_iterator<char>(fa)), {});
  std::vector<char> bb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_EQ(ba, bb);  // bitwise-identical weight files
}

TEST(Train, EmptyDatasetThrows) {
  const auto spec = small_spec(3);
  std::vector<LabeledExample> data;
  try {
    train(spec, data, {});
    FAIL() << "expected EmptyDataset";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
  }
}

TEST(Train, LabelOutOfRangeThrows) {
  const auto spec = small_spec(3);
  std::vector<LabeledExample> data{{random_input({8, 8, 1}, 3), 7}};
  EXPECT_THROW({ auto r = train(spec, data, {}); }, Error);
}

TEST(Train, TraceRecordsEveryEpoch) {
  const auto spec = small_spec(2);
  std::vector<LabeledExample> data{{random_input({8, 8, 1}, 4), 0},
                                   {random_input({8, 8, 1}, 5), 1}};
  TrainOptions opts;
  opts.epochs = 4;
  opts.lr = 1e-4;
  opts.patience = 100;
  const auto result = train(spec, data, opts);
  EXPECT_GE(result.trace.size(), 1u);
  EXPECT_LE(result.trace.size(), 4u);
  for (const auto& e : result.trace) {
    EXPECT_TRUE(std::isfinite(e.loss));
    EXPECT_GE(e.accuracy, 0.0);
    EXPECT_LE(e.accuracy, 1.0);
  }
}

}  // namespace
