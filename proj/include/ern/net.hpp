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
#include <limits>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ern/dsp.hpp"
#include "ern/error.hpp"

namespace ern::nn {

// ---------------------------------------------------------------------------
// Layer descriptors

struct Conv2d {
  int out_channels = 0;
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;  // padding is always 'same'
};
struct BatchNorm {
  int channels = 0;  // 0 = inferred from the incoming shape
  double epsilon = 1e-5;
};
struct Relu {};
struct MaxPool2d {
  int pool_h = 2;
  int pool_w = 2;
};
struct GlobalAvgPool {};
struct Dense {
  int out_features = 0;
};
struct Softmax {};

using Layer =
    std::variant<Conv2d, BatchNorm, Relu, MaxPool2d, GlobalAvgPool, Dense, Softmax>;

struct NetworkSpec {
  std::vector<Layer> layers;

  /// Three conv blocks, global average pooling, dense classifier head.
  static NetworkSpec classifier(int num_classes) {
    NetworkSpec s;
    s.layers = {Conv2d{32},  BatchNorm{32},  Relu{}, MaxPool2d{2, 2},
                Conv2d{64},  BatchNorm{64},  Relu{}, MaxPool2d{2, 2},
                Conv2d{128}, BatchNorm{128}, Relu{}, GlobalAvgPool{},
                Dense{num_classes}, Softmax{}};
    return s;
  }

  int num_classes() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it)
      if (const auto* d = std::get_if<Dense>(&*it)) return d->out_features;
    return 0;
  }
};

struct Shape3 {
  int h = 0, w = 0, c = 0;
  size_t count() const { return size_t(h) * w * c; }
  bool operator==(const Shape3&) const = default;
};

/// Output spatial size under 'same' padding.
inline int same_out(int in, int stride) { return (in + stride - 1) / stride; }

/// Walks the layer chain; result[0] = input shape, result[i+1] = shape after
/// layer i. Throws ShapeMismatch on an inconsistent chain.
inline void infer_shapes_into(const NetworkSpec& spec, Shape3 input,
                              std::vector<Shape3>& shapes) {
  shapes.clear();
  shapes.push_back(input);
  Shape3 cur = input;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& layer = spec.layers[i];
    if (const auto* conv = std::get_if<Conv2d>(&layer)) {
      if (conv->out_channels <= 0 || conv->kernel_h <= 0 || conv->kernel_w <= 0 ||
          conv->stride <= 0)
        throw Error(ErrorCode::ShapeMismatch, "bad conv descriptor");
      cur = {same_out(cur.h, conv->stride), same_out(cur.w, conv->stride),
             conv->out_channels};
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
      if (bn->channels != 0 && bn->channels != cur.c)
        throw Error(ErrorCode::ShapeMismatch,
                    "batchnorm channels " + std::to_string(bn->channels) +
                        " vs " + std::to_string(cur.c));
    } else if (std::holds_alternative<Relu>(layer)) {
      // shape unchanged
    } else if (const auto* pool = std::get_if<MaxPool2d>(&layer)) {
      const int oh = cur.h / pool->pool_h;
      const int ow = cur.w / pool->pool_w;
      if (oh < 1 || ow < 1)
        throw Error(ErrorCode::ShapeMismatch, "pooling collapses a dimension");
      cur = {oh, ow, cur.c};
    } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
      cur = {1, 1, cur.c};
    } else if (const auto* dense = std::get_if<Dense>(&layer)) {
      if (dense->out_features <= 0)
        throw Error(ErrorCode::ShapeMismatch, "bad dense descriptor");
      cur = {1, 1, dense->out_features};
    } else {  // Softmax
      if (i == 0 || i + 1 != spec.layers.size() ||
          !std::holds_alternative<Dense>(spec.layers[i - 1]))
        throw Error(ErrorCode::ShapeMismatch,
                    "softmax must terminate the network after a dense layer");
    }
    shapes.push_back(cur);
  }
}

inline std::vector<Shape3> infer_shapes(const NetworkSpec& spec, Shape3 input) {
  std::vector<Shape3> shapes;
  infer_shapes_into(spec, input, shapes);
  return shapes;
}

// ---------------------------------------------------------------------------
// Weights

enum class Dtype : uint8_t { f32 = 0, i8 = 1 };

template <typename S>
struct NamedTensor {
  std::string name;
  std::vector<uint32_t> dims;
  Dtype dtype = Dtype::f32;
  float qscale = 1.0f;          // 1.0 for f32 tensors
  std::vector<S> values;        // dequantized view for i8
  std::vector<int8_t> qvalues;  // payload when dtype == i8

  size_t count() const {
    size_t n = 1;
    for (uint32_t d : dims) n *= d;
    return n;
  }
  size_t payload_bytes() const {
    return dtype == Dtype::f32 ? count() * 4 : count();
  }
};

template <typename S>
struct WeightSet {
  std::vector<NamedTensor<S>> tensors;

  NamedTensor<S>* find(const std::string& name) {
    for (auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
  const NamedTensor<S>* find(const std::string& name) const {
    for (auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
  NamedTensor<S>& at(const std::string& name) {
    if (auto* t = find(name)) return *t;
    throw Error(ErrorCode::ShapeMismatch, "missing tensor " + name);
  }
  const NamedTensor<S>& at(const std::string& name) const {
    if (auto* t = find(name)) return *t;
    throw Error(ErrorCode::ShapeMismatch, "missing tensor " + name);
  }
  size_t payload_bytes() const {
    size_t n = 0;
    for (const auto& t : tensors) n += t.payload_bytes();
    return n;
  }
};

/// Running statistics are state, not parameters; the optimizer skips them.
inline bool is_trainable(const std::string& name) {
  return name.find(".running_") == std::string::npos;
}

/// Builds a zero-filled weight set matching the spec (BN gamma = 1,
/// running_var = 1).
template <typename S>
WeightSet<S> build_weights(const NetworkSpec& spec, Shape3 input) {
  const auto shapes = infer_shapes(spec, input);
  WeightSet<S> ws;
  int conv_i = 0, bn_i = 0, dense_i = 0;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const Shape3 in = shapes[i];
    if (const auto* conv = std::get_if<Conv2d>(&spec.layers[i])) {
      ++conv_i;
      const std::string p = "conv" + std::to_string(conv_i);
      NamedTensor<S> k;
      k.name = p + ".kernel";
      k.dims = {uint32_t(conv->kernel_h), uint32_t(conv->kernel_w),
                uint32_t(in.c), uint32_t(conv->out_channels)};
      k.values.assign(k.count(), S(0));
      ws.tensors.push_back(std::move(k));
      NamedTensor<S> b;
      b.name = p + ".bias";
      b.dims = {uint32_t(conv->out_channels)};
      b.values.assign(b.count(), S(0));
      ws.tensors.push_back(std::move(b));
    } else if (std::holds_alternative<BatchNorm>(spec.layers[i])) {
      ++bn_i;
      const std::string p = "bn" + std::to_string(bn_i);
      for (const char* suffix :
           {".gamma", ".beta", ".running_mean", ".running_var"}) {
        NamedTensor<S> t;
        t.name = p + suffix;
        t.dims = {uint32_t(in.c)};
        const bool ones = t.name.ends_with("gamma") || t.name.ends_with("var");
        t.values.assign(t.count(), ones ? S(1) : S(0));
        ws.tensors.push_back(std::move(t));
      }
    } else if (const auto* dense = std::get_if<Dense>(&spec.layers[i])) {
      ++dense_i;
      const std::string p = "dense" + std::to_string(dense_i);
      NamedTensor<S> w;
      w.name = p + ".weight";
      w.dims = {uint32_t(in.count()), uint32_t(dense->out_features)};
      w.values.assign(w.count(), S(0));
      ws.tensors.push_back(std::move(w));
      NamedTensor<S> b;
      b.name = p + ".bias";
      b.dims = {uint32_t(dense->out_features)};
      b.values.assign(b.count(), S(0));
      ws.tensors.push_back(std::move(b));
    }
  }
  return ws;
}

/// He-uniform initialization for conv/dense weights, deterministic per seed.
template <typename S>
WeightSet<S> init_weights(const NetworkSpec& spec, Shape3 input, uint64_t seed) {
  WeightSet<S> ws = build_weights<S>(spec, input);
  std::mt19937_64 rng(seed);
  for (auto& t : ws.tensors) {
    if (!t.name.ends_with(".kernel") && !t.name.ends_with(".weight")) continue;
    size_t fan_in = 1;
    for (size_t d = 0; d + 1 < t.dims.size(); ++d) fan_in *= t.dims[d];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.values) v = static_cast<S>(dist(rng));
  }
  return ws;
}

/// Checks tensor presence and shapes against the spec; throws ShapeMismatch.
template <typename S>
void check_weights(const NetworkSpec& spec, const WeightSet<S>& weights,
                   Shape3 input) {
  const WeightSet<S> expected = build_weights<S>(spec, input);
  for (const auto& t : expected.tensors) {
    const auto* got = weights.find(t.name);
    if (got == nullptr)
      throw Error(ErrorCode::ShapeMismatch, "missing tensor " + t.name);
    if (got->dims != t.dims)
      throw Error(ErrorCode::ShapeMismatch, "tensor " + t.name + " shape");
  }
}

template <typename S, typename T>
WeightSet<T> convert_weights(const WeightSet<S>& in) {
  WeightSet<T> out;
  out.tensors.reserve(in.tensors.size());
  for (const auto& t : in.tensors) {
    NamedTensor<T> nt;
    nt.name = t.name;
    nt.dims = t.dims;
    nt.dtype = t.dtype;
    nt.qscale = t.qscale;
    nt.qvalues = t.qvalues;
    nt.values.assign(t.values.begin(), t.values.end());
    out.tensors.push_back(std::move(nt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter counting

enum class CountMode { table, full };

struct ParamCount {
  std::vector<long> per_layer;  // one entry per weighted layer (conv/bn/dense)
  long total = 0;
};

/// Conv rows count weights + bias. A dense layer feeding the terminal softmax
/// counts the weight matrix only; a standalone dense counts weights + bias.
/// Full mode adds the 4 per-channel BN parameters.
inline ParamCount param_count(const NetworkSpec& spec, CountMode mode,
                              int in_channels = 1) {
  ParamCount out;
  int c = in_channels;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& layer = spec.layers[i];
    if (const auto* conv = std::get_if<Conv2d>(&layer)) {
      out.per_layer.push_back(
          long(conv->kernel_h) * conv->kernel_w * c * conv->out_channels +
          conv->out_channels);
      c = conv->out_channels;
    } else if (std::get_if<BatchNorm>(&layer)) {
      out.per_layer.push_back(mode == CountMode::full ? 4L * c : 0L);
    } else if (const auto* dense = std::get_if<Dense>(&layer)) {
      const bool softmax_head =
          i + 1 < spec.layers.size() &&
          std::holds_alternative<Softmax>(spec.layers[i + 1]);
      long n = long(c) * dense->out_features;
      if (!softmax_head) n += dense->out_features;
      out.per_layer.push_back(n);
      c = dense->out_features;
    }
  }
  for (long n : out.per_layer) out.total += n;
  return out;
}

// ---------------------------------------------------------------------------
// Tensors

template <typename S>
struct Tensor {
  Shape3 shape;
  std::vector<S> v;

  static Tensor zeros(Shape3 s) {
    Tensor t;
    t.shape = s;
    t.v.assign(s.count(), S(0));
    return t;
  }
  S& at(int y, int x, int ch) {
    return v[(size_t(y) * shape.w + x) * shape.c + ch];
  }
  S at(int y, int x, int ch) const {
    return v[(size_t(y) * shape.w + x) * shape.c + ch];
  }
};

template <typename S>
Tensor<S> to_tensor(const FeatureTensor& f) {
  Tensor<S> t;
  t.shape = {f.n_rows, f.n_frames, f.n_channels};
  t.v.assign(f.data.begin(), f.data.end());
  return t;
}

// ---------------------------------------------------------------------------
// Kernels

namespace detail {

// C[M,N] = A[M,K] * B[K,N] + bias (bias may be null)
template <typename S>
void gemm_bias(int m_count, int k_count, int n_count, const S* a, const S* b,
               const S* bias, S* c) {
  for (int m = 0; m < m_count; ++m) {
    S* __restrict crow = c + size_t(m) * n_count;
    if (bias)
      std::copy(bias, bias + n_count, crow);
    else
      std::fill(crow, crow + n_count, S(0));
    const S* arow = a + size_t(m) * k_count;
    for (int k = 0; k < k_count; ++k) {
      const S av = arow[k];
      const S* __restrict brow = b + size_t(k) * n_count;
      for (int n = 0; n < n_count; ++n) crow[n] += av * brow[n];
    }
  }
}

inline int same_pad(int in, int out, int stride, int kernel) {
  return std::max((out - 1) * stride + kernel - in, 0) / 2;
}

// Expands the conv input into [oh*ow, kh*kw*cin] patch rows ('same' padding).
template <typename S>
void im2col(const S* in, Shape3 ishape, const Conv2d& conv, Shape3 out_shape,
            std::vector<S>& col) {
  const int kh = conv.kernel_h, kw = conv.kernel_w, s = conv.stride;
  const int pad_h = same_pad(ishape.h, out_shape.h, s, kh);
  const int pad_w = same_pad(ishape.w, out_shape.w, s, kw);
  const int k_count = kh * kw * ishape.c;
  col.resize(size_t(out_shape.h) * out_shape.w * k_count);
  S* dst = col.data();
  for (int oy = 0; oy < out_shape.h; ++oy) {
    for (int ox = 0; ox < out_shape.w; ++ox) {
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * s - pad_h + ky;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * s - pad_w + kx;
          if (iy >= 0 && iy < ishape.h && ix >= 0 && ix < ishape.w) {
            const S* src = in + (size_t(iy) * ishape.w + ix) * ishape.c;
            std::copy(src, src + ishape.c, dst);
          } else {
            std::fill(dst, dst + ishape.c, S(0));
          }
          dst += ishape.c;
        }
      }
    }
  }
}

template <typename S>
void conv_forward(const S* in, Shape3 ishape, const Conv2d& conv,
                  const S* kernel, const S* bias, Shape3 out_shape,
                  std::vector<S>& col, S* out) {
  im2col(in, ishape, conv, out_shape, col);
  const int m = out_shape.h * out_shape.w;
  const int k = conv.kernel_h * conv.kernel_w * ishape.c;
  gemm_bias(m, k, out_shape.c, col.data(), kernel, bias, out);
}

template <typename S>
void maxpool_forward(const S* in, Shape3 ishape, const MaxPool2d& pool,
                     Shape3 out_shape, S* out, int* argmax) {
  const int c = ishape.c;
  for (int oy = 0; oy < out_shape.h; ++oy) {
    for (int ox = 0; ox < out_shape.w; ++ox) {
      S* dst = out + (size_t(oy) * out_shape.w + ox) * c;
      int* amax = argmax ? argmax + (size_t(oy) * out_shape.w + ox) * c : nullptr;
      for (int ch = 0; ch < c; ++ch) {
        S best = -std::numeric_limits<S>::infinity();
        int best_idx = -1;
        for (int py = 0; py < pool.pool_h; ++py) {
          for (int px = 0; px < pool.pool_w; ++px) {
            const size_t idx =
                (size_t(oy * pool.pool_h + py) * ishape.w + ox * pool.pool_w + px) *
                    c + ch;
            if (in[idx] > best) {
              best = in[idx];
              best_idx = static_cast<int>(idx);
            }
          }
        }
        dst[ch] = best;
        if (amax) amax[ch] = best_idx;
      }
    }
  }
}

template <typename S>
void softmax_inplace(S* v, int n) {
  S mx = v[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  S sum = S(0);
  for (int i = 0; i < n; ++i) {
    v[i] = std::exp(v[i] - mx);
    sum += v[i];
  }
  for (int i = 0; i < n; ++i) v[i] /= sum;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Inference

/// Scratch arena. The first call against a (spec, weights, input shape)
/// binds an execution plan; subsequent calls reuse all buffers and do not
/// allocate. Weights must stay alive and structurally unchanged while bound.
template <typename S>
struct Workspace {
  std::vector<S> col, ping, pong, ch_scale, ch_shift;

  const NetworkSpec* plan_spec = nullptr;
  const WeightSet<S>* plan_weights = nullptr;
  Shape3 plan_input{};
  std::vector<Shape3> shapes;
  struct Binding {
    const S* p0 = nullptr;  // conv kernel / bn gamma / dense weight
    const S* p1 = nullptr;  // conv bias / bn beta / dense bias
    const S* p2 = nullptr;  // bn running mean
    const S* p3 = nullptr;  // bn running var
  };
  std::vector<Binding> bind;
};

namespace detail {

template <typename S>
void bind_plan(const NetworkSpec& spec, const WeightSet<S>& weights,
               Shape3 input, Workspace<S>& ws) {
  infer_shapes_into(spec, input, ws.shapes);
  ws.bind.assign(spec.layers.size(), {});
  int conv_i = 0, bn_i = 0, dense_i = 0;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const Shape3 in = ws.shapes[i];
    auto& b = ws.bind[i];
    if (const auto* conv = std::get_if<Conv2d>(&spec.layers[i])) {
      ++conv_i;
      const std::string p = "conv" + std::to_string(conv_i);
      const auto& kernel = weights.at(p + ".kernel");
      const auto& bias = weights.at(p + ".bias");
      if (kernel.dims != std::vector<uint32_t>{uint32_t(conv->kernel_h),
                                               uint32_t(conv->kernel_w),
                                               uint32_t(in.c),
                                               uint32_t(conv->out_channels)} ||
          bias.dims != std::vector<uint32_t>{uint32_t(conv->out_channels)})
        throw Error(ErrorCode::ShapeMismatch, p);
      b.p0 = kernel.values.data();
      b.p1 = bias.values.data();
    } else if (std::holds_alternative<BatchNorm>(spec.layers[i])) {
      ++bn_i;
      const std::string p = "bn" + std::to_string(bn_i);
      const auto& gamma = weights.at(p + ".gamma");
      if (gamma.dims != std::vector<uint32_t>{uint32_t(in.c)})
        throw Error(ErrorCode::ShapeMismatch, p);
      b.p0 = gamma.values.data();
      b.p1 = weights.at(p + ".beta").values.data();
      b.p2 = weights.at(p + ".running_mean").values.data();
      b.p3 = weights.at(p + ".running_var").values.data();
    } else if (const auto* dense = std::get_if<Dense>(&spec.layers[i])) {
      ++dense_i;
      const std::string p = "dense" + std::to_string(dense_i);
      const auto& w = weights.at(p + ".weight");
      if (w.dims != std::vector<uint32_t>{uint32_t(in.count()),
                                          uint32_t(dense->out_features)})
        throw Error(ErrorCode::ShapeMismatch, p);
      b.p0 = w.values.data();
      b.p1 = weights.at(p + ".bias").values.data();
    }
  }
  ws.plan_spec = &spec;
  ws.plan_weights = &weights;
  ws.plan_input = input;
}

}  // namespace detail

/// Inference forward pass; BN uses running statistics. Writes the terminal
/// softmax probabilities into `out` (size = class count).
template <typename S>
void forward_into(const NetworkSpec& spec, const WeightSet<S>& weights,
                  const Tensor<S>& input, Workspace<S>& ws, std::span<S> out) {
  if (ws.plan_spec != &spec || ws.plan_weights != &weights ||
      !(ws.plan_input == input.shape))
    detail::bind_plan(spec, weights, input.shape, ws);

  const S* cur = input.v.data();
  Shape3 cur_shape = input.shape;
  bool use_ping = true;
  auto next_buf = [&](size_t n) -> S* {
    std::vector<S>& buf = use_ping ? ws.ping : ws.pong;
    buf.resize(n);
    use_ping = !use_ping;
    return buf.data();
  };

  bool produced = false;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const Shape3 out_shape = ws.shapes[i + 1];
    const Layer& layer = spec.layers[i];
    const auto& b = ws.bind[i];
    if (const auto* conv = std::get_if<Conv2d>(&layer)) {
      S* dst = next_buf(out_shape.count());
      detail::conv_forward(cur, cur_shape, *conv, b.p0, b.p1, out_shape, ws.col,
                           dst);
      cur = dst;
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
      ws.ch_scale.resize(cur_shape.c);
      ws.ch_shift.resize(cur_shape.c);
      for (int ch = 0; ch < cur_shape.c; ++ch) {
        const S inv = S(1) / std::sqrt(b.p3[ch] + static_cast<S>(bn->epsilon));
        ws.ch_scale[ch] = b.p0[ch] * inv;
        ws.ch_shift[ch] = b.p1[ch] - b.p2[ch] * b.p0[ch] * inv;
      }
      S* dst = next_buf(out_shape.count());
      const size_t spatial = size_t(cur_shape.h) * cur_shape.w;
      for (size_t s = 0; s < spatial; ++s)
        for (int ch = 0; ch < cur_shape.c; ++ch)
          dst[s * cur_shape.c + ch] =
              cur[s * cur_shape.c + ch] * ws.ch_scale[ch] + ws.ch_shift[ch];
      cur = dst;
    } else if (std::holds_alternative<Relu>(layer)) {
      S* dst = next_buf(out_shape.count());
      for (size_t j = 0; j < out_shape.count(); ++j)
        dst[j] = cur[j] > S(0) ? cur[j] : S(0);
      cur = dst;
    } else if (const auto* pool = std::get_if<MaxPool2d>(&layer)) {
      S* dst = next_buf(out_shape.count());
      detail::maxpool_forward(cur, cur_shape, *pool, out_shape, dst,
                              static_cast<int*>(nullptr));
      cur = dst;
    } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
      S* dst = next_buf(out_shape.count());
      const size_t spatial = size_t(cur_shape.h) * cur_shape.w;
      for (int ch = 0; ch < cur_shape.c; ++ch) {
        S acc = S(0);
        for (size_t s = 0; s < spatial; ++s) acc += cur[s * cur_shape.c + ch];
        dst[ch] = acc / static_cast<S>(spatial);
      }
      cur = dst;
    } else if (std::get_if<Dense>(&layer)) {
      S* dst = next_buf(out_shape.count());
      detail::gemm_bias(1, static_cast<int>(cur_shape.count()), out_shape.c,
                        cur, b.p0, b.p1, dst);
      cur = dst;
    } else {  // Softmax
      if (out.size() != cur_shape.count())
        throw Error(ErrorCode::ShapeMismatch, "probability buffer size");
      std::copy(cur, cur + cur_shape.count(), out.data());
      detail::softmax_inplace(out.data(), static_cast<int>(out.size()));
      produced = true;
    }
    cur_shape = out_shape;
  }

  if (!produced)
    throw Error(ErrorCode::ShapeMismatch, "network must end in softmax");
  for (S p : out)
    if (!std::isfinite(static_cast<double>(p)))
      throw Error(ErrorCode::NonFiniteActivation, "non-finite probability");
}

template <typename S>
std::vector<S> forward(const NetworkSpec& spec, const WeightSet<S>& weights,
                       const Tensor<S>& input, Workspace<S>& ws) {
  std::vector<S> probs(
      static_cast<size_t>(std::max(spec.num_classes(), 1)));
  forward_into(spec, weights, input, ws, std::span<S>(probs));
  return probs;
}

template <typename S>
std::vector<S> forward(const NetworkSpec& spec, const WeightSet<S>& weights,
                       const Tensor<S>& input) {
  Workspace<S> ws;
  return forward(spec, weights, input, ws);
}

// ---------------------------------------------------------------------------
// Training-mode forward + backprop

template <typename S>
struct LayerAux {
  std::vector<S> bn_mean, bn_var, bn_inv_std;  // per channel, batch stats
  std::vector<int> pool_argmax;
};

template <typename S>
struct ForwardTrace {
  std::vector<Tensor<S>> acts;  // acts[0] = input, acts[i+1] = layers[i] output
  std::vector<LayerAux<S>> aux;
  std::vector<S> probs;
};

/// Training-mode forward: BN normalizes with per-call batch statistics
/// (single input; statistics over the spatial axes) and optionally updates
/// running stats with the given momentum.
template <typename S>
void forward_train(const NetworkSpec& spec, WeightSet<S>& weights,
                   const Tensor<S>& input, ForwardTrace<S>& trace,
                   double running_momentum = 0.0) {
  const auto shapes = infer_shapes(spec, input.shape);
  trace.acts.assign(spec.layers.size() + 1, {});
  trace.aux.assign(spec.layers.size(), {});
  trace.acts[0] = input;

  int conv_i = 0, bn_i = 0, dense_i = 0;
  std::vector<S> col;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const Tensor<S>& in = trace.acts[i];
    Tensor<S>& out = trace.acts[i + 1];
    out = Tensor<S>::zeros(shapes[i + 1]);
    const Layer& layer = spec.layers[i];

    if (const auto* conv = std::get_if<Conv2d>(&layer)) {
      ++conv_i;
      const std::string p = "conv" + std::to_string(conv_i);
      detail::conv_forward(in.v.data(), in.shape, *conv,
                           weights.at(p + ".kernel").values.data(),
                           weights.at(p + ".bias").values.data(), out.shape,
                           col, out.v.data());
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
      ++bn_i;
      const std::string p = "bn" + std::to_string(bn_i);
      const auto& gamma = weights.at(p + ".gamma").values;
      const auto& beta = weights.at(p + ".beta").values;
      const int c = in.shape.c;
      const size_t spatial = size_t(in.shape.h) * in.shape.w;
      auto& aux = trace.aux[i];
      aux.bn_mean.assign(c, S(0));
      aux.bn_var.assign(c, S(0));
      aux.bn_inv_std.assign(c, S(0));
      for (size_t s = 0; s < spatial; ++s)
        for (int ch = 0; ch < c; ++ch) aux.bn_mean[ch] += in.v[s * c + ch];
      for (int ch = 0; ch < c; ++ch) aux.bn_mean[ch] /= static_cast<S>(spatial);
      for (size_t s = 0; s < spatial; ++s)
        for (int ch = 0; ch < c; ++ch) {
          const S d = in.v[s * c + ch] - aux.bn_mean[ch];
          aux.bn_var[ch] += d * d;
        }
      for (int ch = 0; ch < c; ++ch) {
        aux.bn_var[ch] /= static_cast<S>(spatial);
        aux.bn_inv_std[ch] =
            S(1) / std::sqrt(aux.bn_var[ch] + static_cast<S>(bn->epsilon));
      }
      for (size_t s = 0; s < spatial; ++s)
        for (int ch = 0; ch < c; ++ch)
          out.v[s * c + ch] = gamma[ch] * (in.v[s * c + ch] - aux.bn_mean[ch]) *
                                  aux.bn_inv_std[ch] +
                              beta[ch];
      if (running_momentum > 0.0) {
        auto& rmean = weights.at(p + ".running_mean").values;
        auto& rvar = weights.at(p + ".running_var").values;
        const S m = static_cast<S>(running_momentum);
        for (int ch = 0; ch < c; ++ch) {
          rmean[ch] = (S(1) - m) * rmean[ch] + m * aux.bn_mean[ch];
          rvar[ch] = (S(1) - m) * rvar[ch] + m * aux.bn_var[ch];
        }
      }
    } else if (std::holds_alternative<Relu>(layer)) {
      for (size_t j = 0; j < in.v.size(); ++j)
        out.v[j] = in.v[j] > S(0) ? in.v[j] : S(0);
    } else if (const auto* pool = std::get_if<MaxPool2d>(&layer)) {
      trace.aux[i].pool_argmax.resize(out.shape.count());
      detail::maxpool_forward(in.v.data(), in.shape, *pool, out.shape,
                              out.v.data(), trace.aux[i].pool_argmax.data());
    } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
      const size_t spatial = size_t(in.shape.h) * in.shape.w;
      for (int ch = 0; ch < in.shape.c; ++ch) {
        S acc = S(0);
        for (size_t s = 0; s < spatial; ++s) acc += in.v[s * in.shape.c + ch];
        out.v[ch] = acc / static_cast<S>(spatial);
      }
    } else if (std::get_if<Dense>(&layer)) {
      ++dense_i;
      const std::string p = "dense" + std::to_string(dense_i);
      detail::gemm_bias(1, static_cast<int>(in.shape.count()), out.shape.c,
                        in.v.data(), weights.at(p + ".weight").values.data(),
                        weights.at(p + ".bias").values.data(), out.v.data());
    } else {  // Softmax
      out.v = in.v;
      detail::softmax_inplace(out.v.data(), static_cast<int>(out.v.size()));
    }
  }
  trace.probs = trace.acts.back().v;
}

template <typename S>
struct BackwardResult {
  WeightSet<S> grads;  // aligned with the weight set; running stats stay zero
  S loss = S(0);
  std::vector<S> probs;
};

/// Cross-entropy backprop through the full chain (BN in batch-stats mode).
template <typename S>
BackwardResult<S> backward(const NetworkSpec& spec, WeightSet<S>& weights,
                           const Tensor<S>& input, int target_class,
                           double running_momentum = 0.0) {
  const int num_classes = spec.num_classes();
  if (target_class < 0 || target_class >= num_classes)
    throw Error(ErrorCode::ShapeMismatch,
                "target class " + std::to_string(target_class));

  ForwardTrace<S> trace;
  forward_train(spec, weights, input, trace, running_momentum);

  BackwardResult<S> result;
  result.probs = trace.probs;
  const S p_target =
      std::max(trace.probs[target_class], std::numeric_limits<S>::min());
  result.loss = -std::log(p_target);
  result.grads = build_weights<S>(spec, input.shape);
  for (auto& t : result.grads.tensors) std::fill(t.values.begin(), t.values.end(), S(0));

  // softmax + cross-entropy: dlogits = p - onehot
  Tensor<S> delta = Tensor<S>::zeros(trace.acts.back().shape);
  for (int j = 0; j < num_classes; ++j)
    delta.v[j] = trace.probs[j] - (j == target_class ? S(1) : S(0));

  int conv_i = 0, bn_i = 0, dense_i = 0;
  for (const Layer& layer : spec.layers) {
    if (std::holds_alternative<Conv2d>(layer)) ++conv_i;
    else if (std::holds_alternative<BatchNorm>(layer)) ++bn_i;
    else if (std::holds_alternative<Dense>(layer)) ++dense_i;
  }

  std::vector<S> col, dcol;
  for (size_t ri = spec.layers.size(); ri-- > 0;) {
    const Layer& layer = spec.layers[ri];
    if (std::holds_alternative<Softmax>(layer))
      continue;  // folded into the initial delta

    const Tensor<S>& in = trace.acts[ri];
    Tensor<S> din = Tensor<S>::zeros(in.shape);

    if (const auto* conv = std::get_if<Conv2d>(&layer)) {
      const std::string p = "conv" + std::to_string(conv_i--);
      const auto& kernel = weights.at(p + ".kernel").values;
      auto& dkernel = result.grads.at(p + ".kernel").values;
      auto& dbias = result.grads.at(p + ".bias").values;
      const Shape3 os = delta.shape;
      const int m_count = os.h * os.w;
      const int k_count = conv->kernel_h * conv->kernel_w * in.shape.c;

      detail::im2col(in.v.data(), in.shape, *conv, os, col);
      // dW[k][n] += col[m][k] * dY[m][n]; db[n] += dY[m][n]
      for (int m = 0; m < m_count; ++m) {
        const S* crow = col.data() + size_t(m) * k_count;
        const S* dyrow = delta.v.data() + size_t(m) * os.c;
        for (int n = 0; n < os.c; ++n) dbias[n] += dyrow[n];
        for (int k = 0; k < k_count; ++k) {
          const S cv = crow[k];
          S* __restrict wrow = dkernel.data() + size_t(k) * os.c;
          for (int n = 0; n < os.c; ++n) wrow[n] += cv * dyrow[n];
        }
      }
      // dcol[m][k] = sum_n dY[m][n] * W[k][n], then scatter back (col2im)
      dcol.assign(size_t(m_count) * k_count, S(0));
      for (int m = 0; m < m_count; ++m) {
        const S* dyrow = delta.v.data() + size_t(m) * os.c;
        S* __restrict drow = dcol.data() + size_t(m) * k_count;
        for (int k = 0; k < k_count; ++k) {
          const S* wrow = kernel.data() + size_t(k) * os.c;
          S acc = S(0);
          for (int n = 0; n < os.c; ++n) acc += dyrow[n] * wrow[n];
          drow[k] = acc;
        }
      }
      const int pad_h = detail::same_pad(in.shape.h, os.h, conv->stride,
                                         conv->kernel_h);
      const int pad_w = detail::same_pad(in.shape.w, os.w, conv->stride,
                                         conv->kernel_w);
      for (int oy = 0; oy < os.h; ++oy) {
        for (int ox = 0; ox < os.w; ++ox) {
          const S* drow = dcol.data() + (size_t(oy) * os.w + ox) * k_count;
          int k = 0;
          for (int ky = 0; ky < conv->kernel_h; ++ky) {
            const int iy = oy * conv->stride - pad_h + ky;
            for (int kx = 0; kx < conv->kernel_w; ++kx) {
              const int ix = ox * conv->stride - pad_w + kx;
              if (iy >= 0 && iy < in.shape.h && ix >= 0 && ix < in.shape.w) {
                S* dst =
                    din.v.data() + (size_t(iy) * in.shape.w + ix) * in.shape.c;
                for (int ch = 0; ch < in.shape.c; ++ch) dst[ch] += drow[k + ch];
              }
              k += in.shape.c;
            }
          }
        }
      }
    } else if (std::holds_alternative<BatchNorm>(layer)) {
      const std::string p = "bn" + std::to_string(bn_i--);
      const auto& gamma = weights.at(p + ".gamma").values;
      auto& dgamma = result.grads.at(p + ".gamma").values;
      auto& dbeta = result.grads.at(p + ".beta").values;
      const auto& aux = trace.aux[ri];
      const int c = in.shape.c;
      const size_t spatial = size_t(in.shape.h) * in.shape.w;
      const S inv_n = S(1) / static_cast<S>(spatial);

      std::vector<S> sum_dy(c, S(0)), sum_dy_xhat(c, S(0));
      for (size_t s = 0; s < spatial; ++s)
        for (int ch = 0; ch < c; ++ch) {
          const S dy = delta.v[s * c + ch];
          const S xhat =
              (in.v[s * c + ch] - aux.bn_mean[ch]) * aux.bn_inv_std[ch];
          sum_dy[ch] += dy;
          sum_dy_xhat[ch] += dy * xhat;
        }
      for (int ch = 0; ch < c; ++ch) {
        dbeta[ch] += sum_dy[ch];
        dgamma[ch] += sum_dy_xhat[ch];
      }
      for (size_t s = 0; s < spatial; ++s)
        for (int ch = 0; ch < c; ++ch) {
          const S dy = delta.v[s * c + ch];
          const S xhat =
              (in.v[s * c + ch] - aux.bn_mean[ch]) * aux.bn_inv_std[ch];
          din.v[s * c + ch] =
              gamma[ch] * aux.bn_inv_std[ch] *
              (dy - inv_n * sum_dy[ch] - xhat * inv_n * sum_dy_xhat[ch]);
        }
    } else if (std::holds_alternative<Relu>(layer)) {
      for (size_t j = 0; j < in.v.size(); ++j)
        din.v[j] = in.v[j] > S(0) ? delta.v[j] : S(0);
    } else if (std::holds_alternative<MaxPool2d>(layer)) {
      const auto& amax = trace.aux[ri].pool_argmax;
      for (size_t j = 0; j < delta.v.size(); ++j) din.v[amax[j]] += delta.v[j];
    } else if (std::holds_alternative<GlobalAvgPool>(layer)) {
      const size_t spatial = size_t(in.shape.h) * in.shape.w;
      const S inv_n = S(1) / static_cast<S>(spatial);
      for (size_t s = 0; s < spatial; ++s)
        for (int ch = 0; ch < in.shape.c; ++ch)
          din.v[s * in.shape.c + ch] = delta.v[ch] * inv_n;
    } else if (std::holds_alternative<Dense>(layer)) {
      const std::string p = "dense" + std::to_string(dense_i--);
      const auto& w = weights.at(p + ".weight").values;
      auto& dw = result.grads.at(p + ".weight").values;
      auto& db = result.grads.at(p + ".bias").values;
      const int in_n = static_cast<int>(in.shape.count());
      const int out_n = delta.shape.c;
      for (int n = 0; n < out_n; ++n) db[n] += delta.v[n];
      for (int k = 0; k < in_n; ++k) {
        const S xv = in.v[k];
        S* __restrict wrow = dw.data() + size_t(k) * out_n;
        const S* wr = w.data() + size_t(k) * out_n;
        S acc = S(0);
        for (int n = 0; n < out_n; ++n) {
          wrow[n] += xv * delta.v[n];
          acc += wr[n] * delta.v[n];
        }
        din.v[k] = acc;
      }
    }
    delta = std::move(din);
  }
  return result;
}

}  // namespace ern::nn
