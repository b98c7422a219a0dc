// soundsieve/models.hpp
//
// The two autoencoder architectures, per-sample reconstruction error, and
// checkpoint serialization.
//
// Dense AE: 640 -> 4 x (dense 512 + BN + ReLU) -> dense 8 -> 4 x (dense 512 +
// BN + ReLU) -> dense 640. Bottleneck and output layers are linear: the
// targets are log energies, which are negative, so an output ReLU could
// never reconstruct them.
//
// Conv AE: 1x128x32 input; five same-padded conv blocks with filters
// (32, 64, 128, 256, 512), kernels (5, 5, 5, 3, 3) and (mel, time) strides
// (2,1), (2,1), (2,2), (2,2), (2,2), giving the activation chain
// (32,64,32) -> (64,32,32) -> (128,16,16) -> (256,8,8) -> (512,4,4).
// A valid 4x4 conv with 40 filters produces the flat 40-dim latent; the
// decoder inflates it with a dense layer back to 512x4x4 and mirrors the
// encoder with five transposed conv blocks (the last one linear), each told
// the exact encoder activation shape it must restore.

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

#ifndef SOUNDSIEVE_MODELS_HPP_
#define SOUNDSIEVE_MODELS_HPP_

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "soundsieve/common.hpp"
#include "soundsieve/dsp.hpp"
#include "soundsieve/features.hpp"
#include "soundsieve/nn.hpp"

namespace soundsieve {

enum class ModelFamily { kDense, kConv };

inline const char* family_name(ModelFamily f) {
  return f == ModelFamily::kDense ? "dense" : "conv";
}

inline ModelFamily family_from_name(const std::string& s) {
  if (s == "dense") return ModelFamily::kDense;
  if (s == "conv") return ModelFamily::kConv;
  throw ConfigError("unknown model family '" + s + "'");
}

constexpr std::size_t kDenseInputDim = kDenseWidth;     // 640
constexpr std::size_t kDenseHidden = 512;
constexpr std::size_t kDenseLatent = 8;
constexpr std::size_t kConvLatent = 40;

// Encoder activation chain for the canonical 1x128x32 input, including the
// input itself: (channels, height, width).
constexpr std::array<std::array<std::size_t, 3>, 6> kConvChain = {{
    {1, 128, 32},
    {32, 64, 32},
    {64, 32, 32},
    {128, 16, 16},
    {256, 8, 8},
    {512, 4, 4},
}};
constexpr std::array<std::size_t, 5> kConvKernels = {5, 5, 5, 3, 3};
constexpr std::array<std::array<std::size_t, 2>, 5> kConvStrides = {{
    {2, 1}, {2, 1}, {2, 2}, {2, 2}, {2, 2},
}};

template <typename S>
struct Autoencoder {
  ModelFamily family = ModelFamily::kDense;
  std::uint64_t seed = 0;
  Sequential<S> net;

  TensorPtr<S> forward(const TensorPtr<S>& x, Mode mode) const {
    return net.forward(x, mode);
  }
  std::vector<NamedTensor<S>> parameters() const { return net.parameters(); }
  std::vector<NamedBuffer<S>> buffers() const { return net.buffers(); }

  // Parameter + buffer values by name; used for best-epoch snapshots and
  // checkpointing.
  std::map<std::string, std::vector<S>> state_dict() const {
    std::map<std::string, std::vector<S>> state;
    for (const auto& p : parameters()) state[p.name] = p.tensor->value;
    for (const auto& b : buffers()) state[b.name] = *b.buffer;
    return state;
  }

  void load_state_dict(const std::map<std::string, std::vector<S>>& state) {
    std::size_t used = 0;
    for (const auto& p : parameters()) {
      auto it = state.find(p.name);
      if (it == state.end() || it->second.size() != p.tensor->numel()) {
        throw ShapeMismatch("state missing parameter " + p.name);
      }
      p.tensor->value = it->second;
      ++used;
    }
    for (const auto& b : buffers()) {
      auto it = state.find(b.name);
      if (it == state.end() || it->second.size() != b.buffer->size()) {
        throw ShapeMismatch("state missing buffer " + b.name);
      }
      *b.buffer = it->second;
      ++used;
    }
    if (used != state.size()) {
      throw ShapeMismatch("state holds tensors the architecture does not");
    }
  }
};

template <typename S>
Autoencoder<S> build_dense_ae(std::uint64_t seed) {
  Rng rng(seed);
  Autoencoder<S> model;
  model.family = ModelFamily::kDense;
  model.seed = seed;

  auto block = [&](const std::string& name, std::size_t in, std::size_t out) {
    model.net.add(name, std::make_unique<DenseLayer<S>>(in, out, rng));
    model.net.add(name + ".bn", std::make_unique<BatchNormLayer<S>>(out));
    model.net.add(name + ".relu", std::make_unique<ReluLayer<S>>());
  };

  block("enc0", kDenseInputDim, kDenseHidden);
  block("enc1", kDenseHidden, kDenseHidden);
  block("enc2", kDenseHidden, kDenseHidden);
  block("enc3", kDenseHidden, kDenseHidden);
  model.net.add("bottleneck", std::make_unique<DenseLayer<S>>(
                                  kDenseHidden, kDenseLatent, rng));
  block("dec0", kDenseLatent, kDenseHidden);
  block("dec1", kDenseHidden, kDenseHidden);
  block("dec2", kDenseHidden, kDenseHidden);
  block("dec3", kDenseHidden, kDenseHidden);
  model.net.add("output", std::make_unique<DenseLayer<S>>(
                              kDenseHidden, kDenseInputDim, rng));
  return model;
}

template <typename S>
Autoencoder<S> build_conv_ae(std::uint64_t seed) {
  Rng rng(seed);
  Autoencoder<S> model;
  model.family = ModelFamily::kConv;
  model.seed = seed;

  // Assert the encoder chain before building anything: every stage must land
  // exactly on the recorded activation shape, otherwise the mirrored decoder
  // could not reproduce the input extent.
  for (std::size_t i = 0; i < 5; ++i) {
    const auto g = detail::conv_geometry(
        kConvChain[i][0], kConvChain[i][1], kConvChain[i][2],
        kConvChain[i + 1][0], kConvKernels[i], kConvKernels[i],
        kConvStrides[i][0], kConvStrides[i][1], detail::PadMode::kSame);
    if (g.out_h != kConvChain[i + 1][1] || g.out_w != kConvChain[i + 1][2]) {
      throw ShapeMismatch("conv encoder stage " + std::to_string(i) +
                          " yields " + std::to_string(g.out_h) + "x" +
                          std::to_string(g.out_w));
    }
  }

  for (std::size_t i = 0; i < 5; ++i) {
    const std::string name = "enc" + std::to_string(i);
    model.net.add(name, std::make_unique<Conv2dLayer<S>>(
                            kConvChain[i][0], kConvChain[i + 1][0],
                            kConvKernels[i], kConvStrides[i][0],
                            kConvStrides[i][1], detail::PadMode::kSame, rng));
    model.net.add(name + ".bn",
                  std::make_unique<BatchNormLayer<S>>(kConvChain[i + 1][0]));
    model.net.add(name + ".relu", std::make_unique<ReluLayer<S>>());
  }

  // Valid conv over the full 4x4 extent: the only reading of "40 filters"
  // that makes the latent exactly 40-dimensional. Linear, like the dense
  // bottleneck.
  model.net.add("bottleneck",
                std::make_unique<Conv2dLayer<S>>(
                    kConvChain[5][0], kConvLatent, kConvChain[5][1], 1, 1,
                    detail::PadMode::kValid, rng));
  model.net.add("bottleneck.flatten", std::make_unique<ReshapeLayer<S>>(
                                          std::vector<std::size_t>{kConvLatent}));

  const std::size_t inflate_dim =
      kConvChain[5][0] * kConvChain[5][1] * kConvChain[5][2];
  model.net.add("inflate",
                std::make_unique<DenseLayer<S>>(kConvLatent, inflate_dim, rng));
  model.net.add("inflate.bn", std::make_unique<BatchNormLayer<S>>(inflate_dim));
  model.net.add("inflate.relu", std::make_unique<ReluLayer<S>>());
  model.net.add("inflate.reshape",
                std::make_unique<ReshapeLayer<S>>(std::vector<std::size_t>{
                    kConvChain[5][0], kConvChain[5][1], kConvChain[5][2]}));

  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t enc = 4 - i;  // mirrored encoder stage
    const std::string name = "dec" + std::to_string(i);
    model.net.add(name, std::make_unique<ConvTranspose2dLayer<S>>(
                            kConvChain[enc + 1][0], kConvChain[enc][0],
                            kConvKernels[enc], kConvStrides[enc][0],
                            kConvStrides[enc][1], kConvChain[enc][1],
                            kConvChain[enc][2], rng));
    if (i < 4) {
      model.net.add(name + ".bn",
                    std::make_unique<BatchNormLayer<S>>(kConvChain[enc][0]));
      model.net.add(name + ".relu", std::make_unique<ReluLayer<S>>());
    }
  }
  return model;
}

template <typename S>
Autoencoder<S> build_model(ModelFamily family, std::uint64_t seed) {
  return family == ModelFamily::kDense ? build_dense_ae<S>(seed)
                                       : build_conv_ae<S>(seed);
}

// Per-row (dense) or per-patch (conv) mean squared reconstruction error in
// inference mode. Forward passes run in bounded chunks.
template <typename S>
std::vector<double> reconstruction_error(const Autoencoder<S>& model,
                                         const FeatureSet& batch) {
  const bool dense_kind = batch.kind == FeatureKind::kDenseVectors;
  if ((model.family == ModelFamily::kDense) != dense_kind) {
    throw KindMismatch("feature kind does not match model family");
  }
  const std::size_t width = batch.row_width();
  const std::size_t chunk_rows = dense_kind ? 256 : 16;

  std::vector<double> errors(batch.batch);
  for (std::size_t start = 0; start < batch.batch; start += chunk_rows) {
    const std::size_t rows = std::min(chunk_rows, batch.batch - start);
    auto x = dense_kind
                 ? make_tensor<S>({rows, width})
                 : make_tensor<S>({rows, std::size_t{1}, kNumMelBands,
                                   kPatchFrames});
    for (std::size_t i = 0; i < rows * width; ++i) {
      x->value[i] = static_cast<S>(batch.data[start * width + i]);
    }
    const TensorPtr<S> y = model.forward(x, Mode::kInfer);
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      const S* xv = x->value.data() + r * width;
      const S* yv = y->value.data() + r * width;
      for (std::size_t i = 0; i < width; ++i) {
        const double d = static_cast<double>(yv[i]) - static_cast<double>(xv[i]);
        acc += d * d;
      }
      errors[start + r] = acc / static_cast<double>(width);
    }
  }
  return errors;
}

// --- Checkpoint --------------------------------------------------------------
//
// Binary layout (all integers little-endian u32):
//   "ASDK" | version | n_meta | { klen key vlen value }*
//          | n_tensors | { nlen name rank dims[rank] float32 payload }*
// The normalizer, when present, rides along as the reserved tensor names
// "normalizer.mean" / "normalizer.std".

struct CheckpointMeta {
  std::string machine_type;
  int epoch = 0;
  double best_val_loss = 0.0;
  std::uint64_t seed = 0;
};

struct ModelCheckpoint {
  ModelFamily family = ModelFamily::kDense;
  CheckpointMeta meta;
  std::map<std::string, std::vector<float>> tensors;  // params + buffers
  std::optional<NormalizerStats> normalizer;
};

namespace detail {

inline void ck_put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t ck_get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError("truncated checkpoint " + path);
  }
  return read_u32le(b);
}

inline void ck_put_str(std::ofstream& out, const std::string& s) {
  ck_put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string ck_get_str(std::ifstream& in, const std::string& path) {
  const std::uint32_t len = ck_get_u32(in, path);
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw IoError("truncated checkpoint " + path);
  return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path,
                            const ModelCheckpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write("ASDK", 4);
  detail::ck_put_u32(out, 1);

  char loss_buf[40];
  std::snprintf(loss_buf, sizeof loss_buf, "%.17g", ckpt.meta.best_val_loss);
  const std::vector<std::pair<std::string, std::string>> meta = {
      {"arch", family_name(ckpt.family)},
      {"machine_type", ckpt.meta.machine_type},
      {"epoch", std::to_string(ckpt.meta.epoch)},
      {"best_val_loss", loss_buf},
      {"seed", std::to_string(ckpt.meta.seed)},
  };
  detail::ck_put_u32(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    detail::ck_put_str(out, k);
    detail::ck_put_str(out, v);
  }

  std::uint32_t n_tensors = static_cast<std::uint32_t>(ckpt.tensors.size());
  if (ckpt.normalizer) n_tensors += 2;
  detail::ck_put_u32(out, n_tensors);
  auto write_tensor = [&out](const std::string& name,
                             const std::vector<std::uint32_t>& dims,
                             const std::vector<float>& payload) {
    detail::ck_put_str(out, name);
    detail::ck_put_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (std::uint32_t d : dims) detail::ck_put_u32(out, d);
    detail::put_f32_payload(out, payload);
  };
  for (const auto& [name, payload] : ckpt.tensors) {
    write_tensor(name, {static_cast<std::uint32_t>(payload.size())}, payload);
  }
  if (ckpt.normalizer) {
    write_tensor("normalizer.mean",
                 {static_cast<std::uint32_t>(ckpt.normalizer->mean.size())},
                 ckpt.normalizer->mean);
    write_tensor("normalizer.std",
                 {static_cast<std::uint32_t>(ckpt.normalizer->std.size())},
                 ckpt.normalizer->std);
  }
  if (!out) throw IoError("short write to " + path);
}

inline ModelCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "ASDK", 4) != 0) {
    throw IoError("bad checkpoint magic in " + path);
  }
  if (detail::ck_get_u32(in, path) != 1) {
    throw IoError("unsupported checkpoint version in " + path);
  }

  std::map<std::string, std::string> meta;
  const std::uint32_t n_meta = detail::ck_get_u32(in, path);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = detail::ck_get_str(in, path);
    meta[k] = detail::ck_get_str(in, path);
  }

  ModelCheckpoint ckpt;
  ckpt.family = family_from_name(meta.at("arch"));
  ckpt.meta.machine_type = meta.count("machine_type") ? meta.at("machine_type") : "";
  ckpt.meta.epoch = meta.count("epoch") ? std::stoi(meta.at("epoch")) : 0;
  ckpt.meta.best_val_loss =
      meta.count("best_val_loss") ? std::stod(meta.at("best_val_loss")) : 0.0;
  ckpt.meta.seed = meta.count("seed") ? std::stoull(meta.at("seed")) : 0;

  std::vector<float> mean, stddev;
  const std::uint32_t n_tensors = detail::ck_get_u32(in, path);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = detail::ck_get_str(in, path);
    const std::uint32_t rank = detail::ck_get_u32(in, path);
    std::size_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) count *= detail::ck_get_u32(in, path);
    std::vector<float> payload;
    detail::get_f32_payload(in, count, payload, path);
    if (name == "normalizer.mean") {
      mean = std::move(payload);
    } else if (name == "normalizer.std") {
      stddev = std::move(payload);
    } else {
      ckpt.tensors[name] = std::move(payload);
    }
  }
  if (!mean.empty()) {
    ckpt.normalizer = NormalizerStats{std::move(mean), std::move(stddev)};
  }
  return ckpt;
}

// Builds the architecture named by the checkpoint and fills every parameter
// and buffer; the checkpoint must cover the declared set exactly.
template <typename S = float>
Autoencoder<S> model_from_checkpoint(const ModelCheckpoint& ckpt) {
  Autoencoder<S> model = build_model<S>(ckpt.family, ckpt.meta.seed);
  std::map<std::string, std::vector<S>> state;
  for (const auto& [name, payload] : ckpt.tensors) {
    state[name] = std::vector<S>(payload.begin(), payload.end());
  }
  model.load_state_dict(state);
  return model;
}

inline ModelCheckpoint checkpoint_from_model(
    const Autoencoder<float>& model,
    const std::optional<NormalizerStats>& normalizer, CheckpointMeta meta) {
  ModelCheckpoint ckpt;
  ckpt.family = model.family;
  ckpt.meta = std::move(meta);
  for (const auto& [name, values] : model.state_dict()) ckpt.tensors[name] = values;
  ckpt.normalizer = normalizer;
  return ckpt;
}

}  // namespace soundsieve

#endif  // SOUNDSIEVE_MODELS_HPP_
