// soundsieve/dsp.hpp
//
// Log mel-band energy (MFEC) extraction: Hann-windowed 64 ms frames with 50%
// overlap, power spectrum, 128 triangular mel filters over 0-8 kHz, natural
// log with a 1e-10 energy floor.

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

#ifndef SOUNDSIEVE_DSP_HPP_
#define SOUNDSIEVE_DSP_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "soundsieve/audio.hpp"
#include "soundsieve/common.hpp"
#include "soundsieve/fft.hpp"

namespace soundsieve {

constexpr std::size_t kNumMelBands = 128;
constexpr double kEnergyFloor = 1e-10;
constexpr float kStdFloor = 1e-8f;

// 64 ms analysis frames at 16 kHz with 50% overlap.
struct FrameSpec {
  std::size_t frame_len = 1024;
  std::size_t hop = 512;
  std::size_t fft_size = 1024;
  std::vector<double> window;  // Hann, length frame_len

  FrameSpec() { init(); }

  void init() {
    window.resize(frame_len);
    for (std::size_t i = 0; i < frame_len; ++i) {
      window[i] =
          0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                               static_cast<double>(frame_len));
    }
  }

  // Number of frames fully contained in a signal of `len` samples.
  std::size_t frame_count(std::size_t len) const {
    if (len < frame_len) return 0;
    return (len - frame_len) / hop + 1;
  }
};

inline double hz_to_mel(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Triangular mel filterbank. Filters are tents in mel space with evenly
// spaced, strictly increasing centers; each row is rescaled so its largest
// on-grid weight is exactly 1 (with a 1024-point FFT the continuous apex
// rarely coincides with a bin).
struct MelBank {
  std::size_t n_mels = kNumMelBands;
  double f_min_hz = 0.0;
  double f_max_hz = 8000.0;
  std::vector<double> center_hz;          // n_mels
  std::vector<std::vector<double>> weights;  // n_mels x (fft_size/2 + 1)

  MelBank() { init(1024, kCanonicalRateHz); }
  MelBank(std::size_t n, double fmin, double fmax, std::size_t fft_size,
          int sample_rate_hz)
      : n_mels(n), f_min_hz(fmin), f_max_hz(fmax) {
    init(fft_size, sample_rate_hz);
  }

  void init(std::size_t fft_size, int sample_rate_hz) {
    const std::size_t n_bins = fft_size / 2 + 1;
    const double mel_lo = hz_to_mel(f_min_hz);
    const double mel_hi = hz_to_mel(f_max_hz);
    const double mel_step = (mel_hi - mel_lo) / static_cast<double>(n_mels + 1);

    std::vector<double> bin_mel(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double hz = static_cast<double>(k) * sample_rate_hz /
                        static_cast<double>(fft_size);
      bin_mel[k] = hz_to_mel(hz);
    }

    center_hz.resize(n_mels);
    weights.assign(n_mels, std::vector<double>(n_bins, 0.0));
    for (std::size_t m = 0; m < n_mels; ++m) {
      const double center = mel_lo + mel_step * static_cast<double>(m + 1);
      center_hz[m] = mel_to_hz(center);
      double peak = 0.0;
      for (std::size_t k = 0; k < n_bins; ++k) {
        const double w = 1.0 - std::abs(bin_mel[k] - center) / mel_step;
        if (w > 0.0) {
          weights[m][k] = w;
          peak = std::max(peak, w);
        }
      }
      if (peak <= 0.0) {
        throw ShapeMismatch("mel filter " + std::to_string(m) +
                            " covers no FFT bin");
      }
      for (double& w : weights[m]) w /= peak;
    }
  }
};

// Log mel energies, one row per frame.
struct MelSpectrogram {
  std::size_t n_frames = 0;
  std::size_t n_mels = kNumMelBands;
  std::vector<float> values;  // row-major n_frames x n_mels
  std::string source;

  float at(std::size_t frame, std::size_t mel) const {
    return values[frame * n_mels + mel];
  }
};

// Per-mel-bin standardization statistics, fitted on training data only.
struct NormalizerStats {
  std::vector<float> mean;  // n_mels
  std::vector<float> std;   // n_mels, floored at kStdFloor
};

// Frames the clip (no padding: only frames fully inside the signal), windows,
// takes the power spectrum, applies the mel bank and the floored natural log.
inline MelSpectrogram stft_log_mel(const AudioClip& clip, const FrameSpec& spec,
                                   const MelBank& bank) {
  const std::size_t n_frames = spec.frame_count(clip.samples.size());
  if (n_frames == 0) {
    throw ClipTooShort("clip has " + std::to_string(clip.samples.size()) +
                       " samples, need at least " +
                       std::to_string(spec.frame_len));
  }
  const std::size_t n_bins = spec.fft_size / 2 + 1;

  MelSpectrogram mel;
  mel.n_frames = n_frames;
  mel.n_mels = bank.n_mels;
  mel.values.resize(n_frames * bank.n_mels);
  mel.source = clip.source_path;

  Fft fft(spec.fft_size);
  std::vector<double> frame(spec.frame_len);
  std::vector<double> power;
  for (std::size_t t = 0; t < n_frames; ++t) {
    const float* src = clip.samples.data() + t * spec.hop;
    for (std::size_t i = 0; i < spec.frame_len; ++i) {
      frame[i] = spec.window[i] * static_cast<double>(src[i]);
    }
    fft.power_spectrum(frame, power);
    for (std::size_t m = 0; m < bank.n_mels; ++m) {
      double energy = 0.0;
      const std::vector<double>& w = bank.weights[m];
      for (std::size_t k = 0; k < n_bins; ++k) energy += w[k] * power[k];
      mel.values[t * bank.n_mels + m] =
          static_cast<float>(std::log(std::max(energy, kEnergyFloor)));
    }
  }
  return mel;
}

// Per-bin mean and population standard deviation over all frames of all
// training spectrograms. Two passes with double accumulators, so the result
// does not depend on how the corpus is ordered or chunked.
inline NormalizerStats fit_normalizer(
    const std::vector<const MelSpectrogram*>& spectrograms) {
  std::size_t n_mels = 0;
  std::size_t total_frames = 0;
  for (const MelSpectrogram* s : spectrograms) {
    if (n_mels == 0) n_mels = s->n_mels;
    if (s->n_mels != n_mels) throw ShapeMismatch("mixed mel band counts");
    total_frames += s->n_frames;
  }
  if (total_frames < 2) {
    throw InsufficientData("normalizer needs at least 2 frames, got " +
                           std::to_string(total_frames));
  }

  std::vector<double> sum(n_mels, 0.0), sq(n_mels, 0.0);
  for (const MelSpectrogram* s : spectrograms) {
    for (std::size_t t = 0; t < s->n_frames; ++t) {
      for (std::size_t m = 0; m < n_mels; ++m) {
        sum[m] += s->values[t * n_mels + m];
      }
    }
  }
  NormalizerStats stats;
  stats.mean.resize(n_mels);
  stats.std.resize(n_mels);
  const double inv_n = 1.0 / static_cast<double>(total_frames);
  for (std::size_t m = 0; m < n_mels; ++m) stats.mean[m] = static_cast<float>(sum[m] * inv_n);

  for (const MelSpectrogram* s : spectrograms) {
    for (std::size_t t = 0; t < s->n_frames; ++t) {
      for (std::size_t m = 0; m < n_mels; ++m) {
        const double d = s->values[t * n_mels + m] - stats.mean[m];
        sq[m] += d * d;
      }
    }
  }
  for (std::size_t m = 0; m < n_mels; ++m) {
    stats.std[m] = std::max(static_cast<float>(std::sqrt(sq[m] * inv_n)), kStdFloor);
  }
  return stats;
}

inline NormalizerStats fit_normalizer(const std::vector<MelSpectrogram>& specs) {
  std::vector<const MelSpectrogram*> ptrs;
  ptrs.reserve(specs.size());
  for (const auto& s : specs) ptrs.push_back(&s);
  return fit_normalizer(ptrs);
}

}  // namespace soundsieve

#endif  // SOUNDSIEVE_DSP_HPP_
