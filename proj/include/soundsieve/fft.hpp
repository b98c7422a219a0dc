// soundsieve/fft.hpp
//
// Minimal power-of-two FFT used by the spectrogram front end. The analysis
// frame length is fixed at 1024 samples, so a plain iterative radix-2
// transform with a precomputed twiddle table is all we need.

// Copyright 2026 SoundSieve Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SOUNDSIEVE_FFT_HPP_
#define SOUNDSIEVE_FFT_HPP_

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "soundsieve/common.hpp"

namespace soundsieve {

class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    if (n < 2 || (n & (n - 1)) != 0) {
      throw ShapeMismatch("FFT size must be a power of two, got " +
                          std::to_string(n));
    }
    twiddles_.resize(n / 2);
    const double step = -2.0 * M_PI / static_cast<double>(n);
    for (std::size_t k = 0; k < n / 2; ++k) {
      twiddles_[k] = {std::cos(step * static_cast<double>(k)),
                      std::sin(step * static_cast<double>(k))};
    }
    bitrev_.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1) << (bits - 1 - b);
      bitrev_[i] = r;
    }
  }

  std::size_t size() const { return n_; }

  // In-place forward DFT.
  void transform(std::vector<std::complex<double>>& a) const {
    if (a.size() != n_) throw ShapeMismatch("FFT buffer size mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
      if (bitrev_[i] > i) std::swap(a[i], a[bitrev_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len >> 1;
      const std::size_t stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          const std::complex<double> w = twiddles_[k * stride];
          const std::complex<double> u = a[start + k];
          const std::complex<double> t = w * a[start + k + half];
          a[start + k] = u + t;
          a[start + k + half] = u - t;
        }
      }
    }
  }

  // Power spectrum |X_k|^2 of a real frame, bins 0 .. n/2 inclusive.
  void power_spectrum(const std::vector<double>& frame,
                      std::vector<double>& power) const {
    if (frame.size() > n_) throw ShapeMismatch("frame longer than FFT size");
    scratch_.assign(n_, {0.0, 0.0});
    for (std::size_t i = 0; i < frame.size(); ++i) scratch_[i] = {frame[i], 0.0};
    transform(scratch_);
    power.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k <= n_ / 2; ++k) power[k] = std::norm(scratch_[k]);
  }

 private:
  std::size_t n_;
  std::vector<std::complex<double>> twiddles_;
  std::vector<std::size_t> bitrev_;
  mutable std::vector<std::complex<double>> scratch_;
};

}  // namespace soundsieve

#endif  // SOUNDSIEVE_FFT_HPP_
