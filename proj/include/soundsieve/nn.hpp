// soundsieve/nn.hpp
//
// Layer objects over the autograd ops, a sequential container, seeded Glorot
// initialization, and the Adam optimizer.

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

#ifndef SOUNDSIEVE_NN_HPP_
#define SOUNDSIEVE_NN_HPP_

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "soundsieve/common.hpp"
#include "soundsieve/ops.hpp"
#include "soundsieve/tensor.hpp"

namespace soundsieve {

template <typename S>
struct NamedTensor {
  std::string name;
  TensorPtr<S> tensor;
};

template <typename S>
struct NamedBuffer {
  std::string name;
  std::vector<S>* buffer;
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
template <typename S>
void glorot_init(Rng& rng, std::size_t fan_in, std::size_t fan_out,
                 Tensor<S>& w) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (S& v : w.value) v = static_cast<S>(rng.uniform(-limit, limit));
}

template <typename S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual TensorPtr<S> forward(const TensorPtr<S>& x, Mode mode) = 0;
  virtual void collect_params(const std::string& prefix,
                              std::vector<NamedTensor<S>>& out) {}
  virtual void collect_buffers(const std::string& prefix,
                               std::vector<NamedBuffer<S>>& out) {}
};

template <typename S>
class DenseLayer : public Layer<S> {
 public:
  DenseLayer(std::size_t in, std::size_t out, Rng& rng) {
    weight_ = make_tensor<S>({in, out}, true);
    bias_ = make_tensor<S>({out}, true);
    glorot_init(rng, in, out, *weight_);
  }

  TensorPtr<S> forward(const TensorPtr<S>& x, Mode) override {
    return dense(x, weight_, bias_);
  }

  void collect_params(const std::string& prefix,
                      std::vector<NamedTensor<S>>& out) override {
    out.push_back({prefix + ".weight", weight_});
    out.push_back({prefix + ".bias", bias_});
  }

 private:
  TensorPtr<S> weight_, bias_;
};

template <typename S>
class Conv2dLayer : public Layer<S> {
 public:
  Conv2dLayer(std::size_t in_c, std::size_t out_c, std::size_t kernel,
              std::size_t stride_h, std::size_t stride_w, detail::PadMode pad,
              Rng& rng)
      : stride_h_(stride_h), stride_w_(stride_w), pad_(pad) {
    weight_ = make_tensor<S>({out_c, in_c, kernel, kernel}, true);
    bias_ = make_tensor<S>({out_c}, true);
    glorot_init(rng, in_c * kernel * kernel, out_c * kernel * kernel, *weight_);
  }

  TensorPtr<S> forward(const TensorPtr<S>& x, Mode) override {
    return conv2d(x, weight_, bias_, stride_h_, stride_w_, pad_);
  }

  void collect_params(const std::string& prefix,
                      std::vector<NamedTensor<S>>& out) override {
    out.push_back({prefix + ".weight", weight_});
    out.push_back({prefix + ".bias", bias_});
  }

 private:
  TensorPtr<S> weight_, bias_;
  std::size_t stride_h_, stride_w_;
  detail::PadMode pad_;
};

template <typename S>
class ConvTranspose2dLayer : public Layer<S> {
 public:
  ConvTranspose2dLayer(std::size_t in_c, std::size_t out_c, std::size_t kernel,
                       std::size_t stride_h, std::size_t stride_w,
                       std::size_t target_h, std::size_t target_w, Rng& rng)
      : stride_h_(stride_h),
        stride_w_(stride_w),
        target_h_(target_h),
        target_w_(target_w) {
    weight_ = make_tensor<S>({in_c, out_c, kernel, kernel}, true);
    bias_ = make_tensor<S>({out_c}, true);
    glorot_init(rng, in_c * kernel * kernel, out_c * kernel * kernel, *weight_);
  }

  TensorPtr<S> forward(const TensorPtr<S>& x, Mode) override {
    return conv_transpose2d(x, weight_, bias_, stride_h_, stride_w_, target_h_,
                            target_w_);
  }

  void collect_params(const std::string& prefix,
                      std::vector<NamedTensor<S>>& out) override {
    out.push_back({prefix + ".weight", weight_});
    out.push_back({prefix + ".bias", bias_});
  }

 private:
  TensorPtr<S> weight_, bias_;
  std::size_t stride_h_, stride_w_;
  std::size_t target_h_, target_w_;
};

template <typename S>
class BatchNormLayer : public Layer<S> {
 public:
  explicit BatchNormLayer(std::size_t channels)
      : running_mean_(channels, S(0)), running_var_(channels, S(1)) {
    gamma_ = make_tensor<S>({channels}, true);
    beta_ = make_tensor<S>({channels}, true);
    for (S& v : gamma_->value) v = S(1);
  }

  TensorPtr<S> forward(const TensorPtr<S>& x, Mode mode) override {
    return batch_norm(x, gamma_, beta_, &running_mean_, &running_var_, mode);
  }

  void collect_params(const std::string& prefix,
                      std::vector<NamedTensor<S>>& out) override {
    out.push_back({prefix + ".gamma", gamma_});
    out.push_back({prefix + ".beta", beta_});
  }

  void collect_buffers(const std::string& prefix,
                       std::vector<NamedBuffer<S>>& out) override {
    out.push_back({prefix + ".running_mean", &running_mean_});
    out.push_back({prefix + ".running_var", &running_var_});
  }

 private:
  TensorPtr<S> gamma_, beta_;
  std::vector<S> running_mean_, running_var_;
};

template <typename S>
class ReluLayer : public Layer<S> {
 public:
  TensorPtr<S> forward(const TensorPtr<S>& x, Mode) override { return relu(x); }
};

// Reshapes everything after the batch dimension.
template <typename S>
class ReshapeLayer : public Layer<S> {
 public:
  explicit ReshapeLayer(std::vector<std::size_t> dims_after_batch)
      : dims_(std::move(dims_after_batch)) {}

  TensorPtr<S> forward(const TensorPtr<S>& x, Mode) override {
    std::vector<std::size_t> shape{x->shape[0]};
    shape.insert(shape.end(), dims_.begin(), dims_.end());
    return reshape(x, std::move(shape));
  }

 private:
  std::vector<std::size_t> dims_;
};

template <typename S>
class Sequential {
 public:
  void add(const std::string& name, std::unique_ptr<Layer<S>> layer) {
    layers_.emplace_back(name, std::move(layer));
  }

  TensorPtr<S> forward(TensorPtr<S> x, Mode mode) const {
    for (const auto& [name, layer] : layers_) x = layer->forward(x, mode);
    return x;
  }

  std::vector<NamedTensor<S>> parameters() const {
    std::vector<NamedTensor<S>> out;
    for (const auto& [name, layer] : layers_) layer->collect_params(name, out);
    return out;
  }

  std::vector<NamedBuffer<S>> buffers() const {
    std::vector<NamedBuffer<S>> out;
    for (const auto& [name, layer] : layers_) layer->collect_buffers(name, out);
    return out;
  }

  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer<S>>>> layers_;
};

// Standard bias-corrected Adam. The update is elementwise, so one fused step
// over a concatenation of tensors equals per-tensor steps.
template <typename S>
class Adam {
 public:
  explicit Adam(std::vector<TensorPtr<S>> params, S lr = S(0.001),
                S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8))
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
        eps_(eps) {
    moments_m_.reserve(params_.size());
    moments_v_.reserve(params_.size());
    for (const auto& p : params_) {
      moments_m_.emplace_back(p->numel(), S(0));
      moments_v_.emplace_back(p->numel(), S(0));
    }
  }

  long step_count() const { return step_count_; }

  void zero_grad() {
    for (const auto& p : params_) p->zero_grad();
  }

  void step() {
    ++step_count_;
    const S bc1 = S(1) - static_cast<S>(
        std::pow(static_cast<double>(beta1_), static_cast<double>(step_count_)));
    const S bc2 = S(1) - static_cast<S>(
        std::pow(static_cast<double>(beta2_), static_cast<double>(step_count_)));
    for (std::size_t t = 0; t < params_.size(); ++t) {
      Tensor<S>& p = *params_[t];
      if (p.grad.size() != p.value.size()) continue;  // no gradient this step
      std::vector<S>& m = moments_m_[t];
      std::vector<S>& v = moments_v_[t];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const S g = p.grad[i];
        m[i] = beta1_ * m[i] + (S(1) - beta1_) * g;
        v[i] = beta2_ * v[i] + (S(1) - beta2_) * g * g;
        const S m_hat = m[i] / bc1;
        const S v_hat = v[i] / bc2;
        p.value[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
      }
    }
  }

 private:
  std::vector<TensorPtr<S>> params_;
  std::vector<std::vector<S>> moments_m_, moments_v_;
  S lr_, beta1_, beta2_, eps_;
  long step_count_ = 0;
};

}  // namespace soundsieve

#endif  // SOUNDSIEVE_NN_HPP_
