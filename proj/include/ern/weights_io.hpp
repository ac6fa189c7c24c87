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

// Weight file, little-endian:
//   magic "ERNW" | version u32 = 1 | tensor_count u32
//   per tensor: name_len u16 | name | dtype u8 (0=f32, 1=i8) |
//               quant_scale f32 (1.0 for f32) | rank u8 | dims u32 x rank |
//               raw payload (f32 LE or i8)
//   trailing CRC32 (IEEE, reflected) of all preceding bytes

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ern/error.hpp"
#include "ern/net.hpp"

namespace ern::nn {

inline uint32_t crc32_ieee(const uint8_t* data, size_t n) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t crc = 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

namespace wio_detail {

inline void put_u16(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(x & 0xff);
  v.push_back(x >> 8);
}
inline void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back((x >> (8 * i)) & 0xff);
}
inline void put_f32(std::vector<uint8_t>& v, float x) {
  uint32_t u;
  std::memcpy(&u, &x, 4);
  put_u32(v, u);
}

struct Reader {
  const uint8_t* p;
  size_t n;
  size_t pos = 0;

  void need(size_t k) const {
    if (pos + k > n)
      throw Error(ErrorCode::CorruptHeader, "weight file tensor table overrun");
  }
  uint16_t u16() {
    need(2);
    const uint16_t x = uint16_t(p[pos] | (p[pos + 1] << 8));
    pos += 2;
    return x;
  }
  uint32_t u32() {
    need(4);
    uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= uint32_t(p[pos + i]) << (8 * i);
    pos += 4;
    return x;
  }
  uint8_t u8() {
    need(1);
    return p[pos++];
  }
  float f32() {
    const uint32_t u = u32();
    float x;
    std::memcpy(&x, &u, 4);
    return x;
  }
  std::string str(size_t k) {
    need(k);
    std::string s(reinterpret_cast<const char*>(p + pos), k);
    pos += k;
    return s;
  }
};

}  // namespace wio_detail

inline constexpr uint32_t kWeightFormatVersion = 1;

inline void save_weights(const WeightSet<float>& weights,
                         const std::string& path) {
  namespace wd = wio_detail;
  std::vector<uint8_t> out;
  out.insert(out.end(), {'E', 'R', 'N', 'W'});
  wd::put_u32(out, kWeightFormatVersion);
  wd::put_u32(out, static_cast<uint32_t>(weights.tensors.size()));
  for (const auto& t : weights.tensors) {
    wd::put_u16(out, static_cast<uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    out.push_back(static_cast<uint8_t>(t.dtype));
    wd::put_f32(out, t.dtype == Dtype::f32 ? 1.0f : t.qscale);
    out.push_back(static_cast<uint8_t>(t.dims.size()));
    for (uint32_t d : t.dims) wd::put_u32(out, d);
    if (t.dtype == Dtype::f32) {
      for (float v : t.values) wd::put_f32(out, v);
    } else {
      for (int8_t v : t.qvalues) out.push_back(static_cast<uint8_t>(v));
    }
  }
  wd::put_u32(out, crc32_ieee(out.data(), out.size()));

  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::NotFound, "cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorCode::NotFound, "short write: " + path);
}

inline WeightSet<float> load_weights(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::NotFound, path);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::NotFound, path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());

  if (bytes.size() < 4 || std::memcmp(bytes.data(), "ERNW", 4) != 0)
    throw Error(ErrorCode::BadMagic, path);
  if (bytes.size() < 16)
    throw Error(ErrorCode::ChecksumMismatch, "file too small: " + path);
  const uint32_t stored_crc = uint32_t(bytes[bytes.size() - 4]) |
                              uint32_t(bytes[bytes.size() - 3]) << 8 |
                              uint32_t(bytes[bytes.size() - 2]) << 16 |
                              uint32_t(bytes[bytes.size() - 1]) << 24;
  if (crc32_ieee(bytes.data(), bytes.size() - 4) != stored_crc)
    throw Error(ErrorCode::ChecksumMismatch, path);

  wio_detail::Reader r{bytes.data(), bytes.size() - 4, 4};
  const uint32_t version = r.u32();
  if (version != kWeightFormatVersion)
    throw Error(ErrorCode::VersionMismatch,
                "version " + std::to_string(version));
  const uint32_t count = r.u32();

  WeightSet<float> ws;
  ws.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor<float> t;
    t.name = r.str(r.u16());
    const uint8_t dtype = r.u8();
    if (dtype > 1)
      throw Error(ErrorCode::CorruptHeader, "unknown dtype in " + path);
    t.dtype = static_cast<Dtype>(dtype);
    t.qscale = r.f32();
    const uint8_t rank = r.u8();
    t.dims.resize(rank);
    for (int d = 0; d < rank; ++d) t.dims[d] = r.u32();
    const size_t n = t.count();
    if (t.dtype == Dtype::f32) {
      t.values.resize(n);
      for (size_t j = 0; j < n; ++j) t.values[j] = r.f32();
    } else {
      if (t.qscale <= 0.0f)
        throw Error(ErrorCode::CorruptHeader, "bad quant scale in " + path);
      t.qvalues.resize(n);
      t.values.resize(n);
      for (size_t j = 0; j < n; ++j) {
        t.qvalues[j] = static_cast<int8_t>(r.u8());
        t.values[j] = static_cast<float>(t.qvalues[j]) * t.qscale;
      }
    }
    ws.tensors.push_back(std::move(t));
  }
  return ws;
}

inline WeightSet<float> load_weights(const std::string& path,
                                     const NetworkSpec& spec, Shape3 input) {
  WeightSet<float> ws = load_weights(path);
  check_weights(spec, ws, input);
  return ws;
}

}  // namespace ern::nn
