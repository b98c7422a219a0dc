// soundsieve/audio.hpp
//
// RIFF/WAV ingestion. Decodes PCM 16/24/32-bit and IEEE-float data chunks
// into a normalized mono float waveform at the toolkit's canonical 16 kHz.

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

#ifndef SOUNDSIEVE_AUDIO_HPP_
#define SOUNDSIEVE_AUDIO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "soundsieve/common.hpp"

namespace soundsieve {

constexpr int kCanonicalRateHz = 16000;

// Decoded mono waveform. Samples always lie in [-1, 1]; the path is kept for
// provenance in feature sets and score records.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = kCanonicalRateHz;
  std::string source_path;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// Parses a RIFF/WAVE container. Unknown chunks ("LIST", "fact", ...) are
// skipped by their declared size (plus the RIFF pad byte when odd). The fmt
// chunk must carry PCM (code 1, 16/24/32 bit) or IEEE float (code 3, 32 bit).
// Multi-channel data is reduced to mono by the arithmetic channel mean.
inline AudioClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedRiff("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw MalformedRiff("missing RIFF/WAVE header in " + path);
  }

  bool have_fmt = false;
  std::uint16_t format_code = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data_ptr = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t chunk_size = detail::read_u32le(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size()) {
      throw MalformedRiff("truncated chunk '" + std::string(hdr, hdr + 4) +
                          "' in " + path);
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw MalformedRiff("fmt chunk too small in " + path);
      const unsigned char* f = bytes.data() + body;
      format_code = detail::read_u16le(f);
      channels = detail::read_u16le(f + 2);
      rate = detail::read_u32le(f + 4);
      bits = detail::read_u16le(f + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_ptr = bytes.data() + body;
      data_size = chunk_size;
      break;  // fmt is required to precede data in the files we accept
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word aligned
  }

  if (!have_fmt) throw MalformedRiff("no fmt chunk before data in " + path);
  if (data_ptr == nullptr) throw MalformedRiff("no data chunk in " + path);
  if (format_code != 1 && format_code != 3) {
    throw UnsupportedEncoding("format code " + std::to_string(format_code) +
                              " in " + path);
  }
  if (format_code == 1 && bits != 16 && bits != 24 && bits != 32) {
    throw UnsupportedEncoding(std::to_string(bits) + "-bit PCM in " + path);
  }
  if (format_code == 3 && bits != 32) {
    throw UnsupportedEncoding(std::to_string(bits) + "-bit float in " + path);
  }
  if (channels == 0 || rate == 0) throw MalformedRiff("bad fmt fields in " + path);

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n_frames = frame_bytes == 0 ? 0 : data_size / frame_bytes;
  if (n_frames == 0) throw EmptyData("empty data chunk in " + path);

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(rate);
  clip.source_path = path;
  clip.samples.resize(n_frames);

  const double inv_channels = 1.0 / channels;
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    const unsigned char* frame = data_ptr + i * frame_bytes;
    for (std::uint16_t c = 0; c < channels; ++c) {
      const unsigned char* s = frame + c * bytes_per_sample;
      double v;
      if (format_code == 3) {
        float f;
        std::memcpy(&f, s, 4);
        v = f;
      } else if (bits == 16) {
        std::int16_t raw = static_cast<std::int16_t>(s[0] | (s[1] << 8));
        v = raw / 32768.0;
      } else if (bits == 24) {
        std::int32_t raw = s[0] | (s[1] << 8) | (s[2] << 16);
        if (raw & 0x800000) raw |= ~0xFFFFFF;  // sign extend
        v = raw / 8388608.0;
      } else {
        std::int32_t raw;
        std::memcpy(&raw, s, 4);
        v = raw / 2147483648.0;
      }
      acc += v;
    }
    clip.samples[i] =
        static_cast<float>(std::clamp(acc * inv_channels, -1.0, 1.0));
  }
  return clip;
}

// Linear-interpolation resampling to 16 kHz. Identity (same buffer) when the
// clip is already canonical. Output length = round(len * 16000 / input_rate).
inline AudioClip resample_to_16k(const AudioClip& clip) {
  if (clip.sample_rate_hz == kCanonicalRateHz) return clip;
  const std::size_t n_in = clip.samples.size();
  const double ratio =
      static_cast<double>(clip.sample_rate_hz) / kCanonicalRateHz;
  const std::size_t n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * kCanonicalRateHz /
                   clip.sample_rate_hz));

  AudioClip out;
  out.sample_rate_hz = kCanonicalRateHz;
  out.source_path = clip.source_path;
  out.samples.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    std::size_t i0 = static_cast<std::size_t>(pos);
    if (i0 >= n_in - 1) {
      out.samples[i] = clip.samples[n_in - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(i0);
    out.samples[i] = static_cast<float>((1.0 - frac) * clip.samples[i0] +
                                        frac * clip.samples[i0 + 1]);
  }
  return out;
}

// Writes a 16-bit PCM mono WAV. Used by the synthetic fixture generator;
// values are scaled by 32768 and clamped to the int16 range, which keeps the
// write -> load_wav round trip within 1/32768.
inline void write_wav_pcm16(const std::string& path,
                            const std::vector<float>& samples,
                            int sample_rate_hz) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);

  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * 2);
  auto put_u32 = [&out](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  auto put_u16 = [&out](std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 2);
  };

  out.write("RIFF", 4);
  put_u32(36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(static_cast<std::uint32_t>(sample_rate_hz));
  put_u32(static_cast<std::uint32_t>(sample_rate_hz) * 2);
  put_u16(2);
  put_u16(16);
  out.write("data", 4);
  put_u32(data_size);
  for (float s : samples) {
    long q = std::lround(std::clamp(s, -1.0f, 1.0f) * 32768.0f);
    q = std::clamp(q, -32768L, 32767L);
    put_u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  if (!out) throw IoError("short write to " + path);
}

}  // namespace soundsieve

#endif  // SOUNDSIEVE_AUDIO_HPP_
