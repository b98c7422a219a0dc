// soundsieve/features.hpp
//
// Feature assembly for the two model families. The dense path buffers the
// waveform into overlapping 1 s segments and concatenates 5-frame context
// windows into 640-dim vectors; the conv path slices the full-clip mel
// spectrogram into 128x32 patches with a 3-frame (96 ms) hop.

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

#ifndef SOUNDSIEVE_FEATURES_HPP_
#define SOUNDSIEVE_FEATURES_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "soundsieve/audio.hpp"
#include "soundsieve/common.hpp"
#include "soundsieve/dsp.hpp"

namespace soundsieve {

constexpr std::size_t kBufferLen = 16000;   // 1 s at 16 kHz
constexpr std::size_t kBufferHop = 8000;    // 50% overlap
constexpr std::size_t kContextFrames = 5;
constexpr std::size_t kDenseWidth = kContextFrames * kNumMelBands;  // 640
constexpr std::size_t kPatchFrames = 32;
constexpr std::size_t kPatchHop = 3;        // 3 * 32 ms = 96 ms
constexpr std::size_t kPatchSize = kNumMelBands * kPatchFrames;

enum class FeatureKind { kDenseVectors, kConvPatches };

// A batch of feature rows (dense path) or 1x128x32 patches (conv path),
// with per-row provenance back to the source file.
struct FeatureSet {
  FeatureKind kind = FeatureKind::kDenseVectors;
  std::size_t batch = 0;
  std::vector<float> data;               // row-major, batch x row_width()
  std::vector<std::size_t> file_index;   // length batch

  std::size_t row_width() const {
    return kind == FeatureKind::kDenseVectors ? kDenseWidth : kPatchSize;
  }
  const float* row(std::size_t i) const { return data.data() + i * row_width(); }

  void append(const FeatureSet& other) {
    if (other.kind != kind) throw KindMismatch("appending mixed feature kinds");
    data.insert(data.end(), other.data.begin(), other.data.end());
    file_index.insert(file_index.end(), other.file_index.begin(),
                      other.file_index.end());
    batch += other.batch;
  }
};

// Dense-path features: 1 s buffers with 50% overlap, 30 frames of 128 MFECs
// per buffer, then 26 overlapping 5-frame context windows of width 640.
// Buffers are framed from their own start sample; the 8000-sample buffer hop
// is not a multiple of the 512-sample frame hop, so this is not equivalent to
// windowing one full-clip spectrogram. Dense features are never normalized.
inline FeatureSet dense_feature_vectors(const AudioClip& clip,
                                        const FrameSpec& spec,
                                        const MelBank& bank,
                                        std::size_t file_id = 0) {
  if (clip.samples.size() < kBufferLen) {
    throw ClipTooShort("dense features need >= 1 s of audio, got " +
                       std::to_string(clip.samples.size()) + " samples");
  }
  const std::size_t n_buffers =
      (clip.samples.size() - kBufferLen) / kBufferHop + 1;
  const std::size_t frames_per_buffer = spec.frame_count(kBufferLen);
  const std::size_t windows_per_buffer = frames_per_buffer - kContextFrames + 1;

  FeatureSet out;
  out.kind = FeatureKind::kDenseVectors;
  out.batch = n_buffers * windows_per_buffer;
  out.data.resize(out.batch * kDenseWidth);
  out.file_index.assign(out.batch, file_id);

  AudioClip buffer;
  buffer.sample_rate_hz = clip.sample_rate_hz;
  buffer.source_path = clip.source_path;
  std::size_t row = 0;
  for (std::size_t b = 0; b < n_buffers; ++b) {
    const std::size_t start = b * kBufferHop;
    buffer.samples.assign(clip.samples.begin() + start,
                          clip.samples.begin() + start + kBufferLen);
    const MelSpectrogram mel = stft_log_mel(buffer, spec, bank);
    for (std::size_t w = 0; w < windows_per_buffer; ++w) {
      float* dst = out.data.data() + row * kDenseWidth;
      std::memcpy(dst, mel.values.data() + w * kNumMelBands,
                  kContextFrames * kNumMelBands * sizeof(float));
      ++row;
    }
  }
  return out;
}

// Conv-path patches from an existing spectrogram. When stats are given every
// mel bin is standardized before slicing. Patch p column c is spectrogram
// frame 3p + c; patch layout is channel-major 1 x 128 x 32.
inline FeatureSet conv_patches_from_mel(const MelSpectrogram& mel,
                                        const NormalizerStats* stats,
                                        std::size_t file_id = 0) {
  if (mel.n_frames < kPatchFrames) {
    throw ClipTooShort("conv patches need >= " + std::to_string(kPatchFrames) +
                       " frames, got " + std::to_string(mel.n_frames));
  }
  const std::size_t n_patches = (mel.n_frames - kPatchFrames) / kPatchHop + 1;

  FeatureSet out;
  out.kind = FeatureKind::kConvPatches;
  out.batch = n_patches;
  out.data.resize(n_patches * kPatchSize);
  out.file_index.assign(n_patches, file_id);

  for (std::size_t p = 0; p < n_patches; ++p) {
    float* patch = out.data.data() + p * kPatchSize;
    for (std::size_t m = 0; m < kNumMelBands; ++m) {
      for (std::size_t c = 0; c < kPatchFrames; ++c) {
        float v = mel.at(p * kPatchHop + c, m);
        if (stats != nullptr) v = (v - stats->mean[m]) / stats->std[m];
        patch[m * kPatchFrames + c] = v;
      }
    }
  }
  return out;
}

inline FeatureSet conv_patches(const AudioClip& clip, const FrameSpec& spec,
                               const MelBank& bank,
                               const NormalizerStats* stats,
                               std::size_t file_id = 0) {
  const MelSpectrogram mel = stft_log_mel(clip, spec, bank);
  return conv_patches_from_mel(mel, stats, file_id);
}

// --- Feature cache ---------------------------------------------------------
//
// One file per clip: magic, version, kind, shape, dtype tag, then the
// row-major float32 payload. The conv path caches the raw (un-normalized)
// spectrogram because standardization statistics are fitted later, on the
// training split only.

enum class CacheKind : std::uint32_t { kDenseVectors = 0, kMelSpectrogram = 1 };

struct FeatureCache {
  CacheKind kind = CacheKind::kDenseVectors;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

namespace detail {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError("truncated cache file " + path);
  }
  return read_u32le(b);
}

inline void put_f32_payload(std::ofstream& out, const std::vector<float>& v) {
  static_assert(sizeof(float) == 4);
  for (float f : v) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    unsigned char b[4] = {static_cast<unsigned char>(bits & 0xFF),
                          static_cast<unsigned char>((bits >> 8) & 0xFF),
                          static_cast<unsigned char>((bits >> 16) & 0xFF),
                          static_cast<unsigned char>((bits >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

inline void get_f32_payload(std::ifstream& in, std::size_t count,
                            std::vector<float>& v, const std::string& path) {
  v.resize(count);
  std::vector<unsigned char> raw(count * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size()))) {
    throw IoError("truncated cache payload in " + path);
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = read_u32le(raw.data() + i * 4);
    std::memcpy(&v[i], &bits, 4);
  }
}

constexpr std::uint32_t kDtypeF32LE = 0x4C323366;  // "f32L"

}  // namespace detail

inline void write_feature_cache(const std::string& path,
                                const FeatureCache& cache) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write("SSFC", 4);
  detail::put_u32(out, 1);  // version
  detail::put_u32(out, static_cast<std::uint32_t>(cache.kind));
  detail::put_u32(out, static_cast<std::uint32_t>(cache.dims.size()));
  for (std::uint32_t d : cache.dims) detail::put_u32(out, d);
  detail::put_u32(out, detail::kDtypeF32LE);
  detail::put_f32_payload(out, cache.data);
  if (!out) throw IoError("short write to " + path);
}

inline FeatureCache read_feature_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open cache file " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SSFC", 4) != 0) {
    throw IoError("bad cache magic in " + path);
  }
  const std::uint32_t version = detail::get_u32(in, path);
  if (version != 1) throw IoError("unsupported cache version in " + path);
  FeatureCache cache;
  cache.kind = static_cast<CacheKind>(detail::get_u32(in, path));
  const std::uint32_t rank = detail::get_u32(in, path);
  cache.dims.resize(rank);
  std::size_t count = 1;
  for (std::uint32_t& d : cache.dims) {
    d = detail::get_u32(in, path);
    count *= d;
  }
  if (detail::get_u32(in, path) != detail::kDtypeF32LE) {
    throw IoError("unsupported dtype in " + path);
  }
  detail::get_f32_payload(in, count, cache.data, path);
  return cache;
}

inline MelSpectrogram mel_from_cache(const FeatureCache& cache,
                                     const std::string& source) {
  if (cache.kind != CacheKind::kMelSpectrogram || cache.dims.size() != 2) {
    throw KindMismatch("cache does not hold a mel spectrogram");
  }
  MelSpectrogram mel;
  mel.n_frames = cache.dims[0];
  mel.n_mels = cache.dims[1];
  mel.values = cache.data;
  mel.source = source;
  return mel;
}

}  // namespace soundsieve

#endif  // SOUNDSIEVE_FEATURES_HPP_
