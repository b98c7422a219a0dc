// soundsieve/common.hpp

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

#ifndef SOUNDSIEVE_COMMON_HPP_
#define SOUNDSIEVE_COMMON_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace soundsieve {

// Error category drives the process exit code: usage/config errors exit 1,
// data errors exit 2, numeric failures exit 3.
enum class ErrorKind { kConfig, kData, kNumeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what),
        kind_(kind),
        code_(std::move(code)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& code() const { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

#define SOUNDSIEVE_DEFINE_ERROR(name, kind)                 \
  struct name : Error {                                     \
    explicit name(const std::string& what)                  \
        : Error(ErrorKind::kind, #name, what) {}            \
  }

// audio_io
SOUNDSIEVE_DEFINE_ERROR(MalformedRiff, kData);
SOUNDSIEVE_DEFINE_ERROR(UnsupportedEncoding, kData);
SOUNDSIEVE_DEFINE_ERROR(EmptyData, kData);
// dsp / features
SOUNDSIEVE_DEFINE_ERROR(ClipTooShort, kData);
SOUNDSIEVE_DEFINE_ERROR(InsufficientData, kData);
// tensor / nn
SOUNDSIEVE_DEFINE_ERROR(ShapeMismatch, kData);
SOUNDSIEVE_DEFINE_ERROR(BatchTooSmall, kData);
SOUNDSIEVE_DEFINE_ERROR(UnreachableTargetShape, kData);
SOUNDSIEVE_DEFINE_ERROR(KindMismatch, kData);
// trainer
SOUNDSIEVE_DEFINE_ERROR(TooFewFiles, kData);
SOUNDSIEVE_DEFINE_ERROR(NonFiniteLoss, kNumeric);
// eval
SOUNDSIEVE_DEFINE_ERROR(DegenerateLabels, kData);
SOUNDSIEVE_DEFINE_ERROR(EmptyType, kData);
SOUNDSIEVE_DEFINE_ERROR(MissingFamily, kData);
// cli / pipeline
SOUNDSIEVE_DEFINE_ERROR(MissingDirectory, kData);
SOUNDSIEVE_DEFINE_ERROR(MissingArtifact, kData);
SOUNDSIEVE_DEFINE_ERROR(ConfigError, kConfig);
SOUNDSIEVE_DEFINE_ERROR(IoError, kData);

#undef SOUNDSIEVE_DEFINE_ERROR

// Seeded RNG wrapper. All randomness in the toolkit flows through this class
// so that a fixed seed yields the same bit stream on every platform: the
// mt19937 sequence is pinned by the standard, and the real-valued helpers
// below avoid std::uniform_real_distribution, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : gen_(static_cast<std::mt19937_64::result_type>(seed)) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % n;
  }

  // Seeded Fisher-Yates; used instead of std::shuffle, which is free to
  // consume the generator differently per standard library.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. Indices are split
// into contiguous static chunks, so each index always lands on the same
// worker and output slots never race as long as fn writes only to slot i.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  std::size_t workers = threads < 1 ? 1 : static_cast<std::size_t>(threads);
  if (workers > n) workers = n;
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace soundsieve

#endif  // SOUNDSIEVE_COMMON_HPP_
