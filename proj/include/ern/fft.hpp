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

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "ern/error.hpp"

namespace ern {

/// In-place iterative radix-2 Cooley-Tukey FFT. Size must be a power of two.
template <typename S>
void fft_inplace(std::vector<std::complex<S>>& a) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw Error(ErrorCode::UsageError, "FFT size must be a power of two");

  // bit reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    const S ang = static_cast<S>(-2.0 * std::numbers::pi / static_cast<double>(len));
    const std::complex<S> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<S> w(1);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<S> u = a[i + k];
        const std::complex<S> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace ern
