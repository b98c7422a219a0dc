// soundsieve/ops.hpp
//
// Differentiable operations on Tensor graphs. Convolutions follow the
// cross-correlation convention (no kernel flip) and are lowered to im2col +
// matmul; transposed convolution is the exact adjoint of conv2d, with its
// padding derived from the mirrored encoder activation shape.

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

#ifndef SOUNDSIEVE_OPS_HPP_
#define SOUNDSIEVE_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "soundsieve/common.hpp"
#include "soundsieve/tensor.hpp"

namespace soundsieve {
namespace detail {

// c[M,N] += a[M,K] * b[K,N]. The k-innermost saxpy form keeps the inner loop
// contiguous in both b and c so the compiler can vectorize it.
template <typename S>
void mm_acc(std::size_t m_dim, std::size_t k_dim, std::size_t n_dim,
            const S* a, const S* b, S* c) {
  for (std::size_t i = 0; i < m_dim; ++i) {
    S* ci = c + i * n_dim;
    const S* ai = a + i * k_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const S aik = ai[k];
      const S* bk = b + k * n_dim;
      for (std::size_t j = 0; j < n_dim; ++j) ci[j] += aik * bk[j];
    }
  }
}

// c[M,K] += a[M,N] * b[K,N]^T  (dot-product form; rows of a and b contiguous)
template <typename S>
void mm_acc_abt(std::size_t m_dim, std::size_t n_dim, std::size_t k_dim,
                const S* a, const S* b, S* c) {
  for (std::size_t i = 0; i < m_dim; ++i) {
    const S* ai = a + i * n_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const S* bk = b + k * n_dim;
      S acc = S(0);
      for (std::size_t j = 0; j < n_dim; ++j) acc += ai[j] * bk[j];
      c[i * k_dim + k] += acc;
    }
  }
}

// c[K,N] += a[M,K]^T * b[M,N]
template <typename S>
void mm_acc_atb(std::size_t m_dim, std::size_t k_dim, std::size_t n_dim,
                const S* a, const S* b, S* c) {
  for (std::size_t i = 0; i < m_dim; ++i) {
    const S* ai = a + i * k_dim;
    const S* bi = b + i * n_dim;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const S aik = ai[k];
      S* ck = c + k * n_dim;
      for (std::size_t j = 0; j < n_dim; ++j) ck[j] += aik * bi[j];
    }
  }
}

struct ConvGeom {
  std::size_t in_c, in_h, in_w;
  std::size_t out_c, out_h, out_w;
  std::size_t kh, kw;
  std::size_t stride_h, stride_w;
  long pad_top, pad_left;

  std::size_t col_rows() const { return in_c * kh * kw; }
  std::size_t col_cols() const { return out_h * out_w; }
};

enum class PadMode { kSame, kValid };

inline ConvGeom conv_geometry(std::size_t in_c, std::size_t in_h,
                              std::size_t in_w, std::size_t out_c,
                              std::size_t kh, std::size_t kw,
                              std::size_t stride_h, std::size_t stride_w,
                              PadMode pad) {
  ConvGeom g{};
  g.in_c = in_c;
  g.in_h = in_h;
  g.in_w = in_w;
  g.out_c = out_c;
  g.kh = kh;
  g.kw = kw;
  g.stride_h = stride_h;
  g.stride_w = stride_w;
  if (pad == PadMode::kSame) {
    g.out_h = (in_h + stride_h - 1) / stride_h;
    g.out_w = (in_w + stride_w - 1) / stride_w;
    const long pad_h = std::max<long>(
        0, static_cast<long>((g.out_h - 1) * stride_h + kh) - static_cast<long>(in_h));
    const long pad_w = std::max<long>(
        0, static_cast<long>((g.out_w - 1) * stride_w + kw) - static_cast<long>(in_w));
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    if (in_h < kh || in_w < kw) {
      throw ShapeMismatch("valid conv: kernel larger than input");
    }
    g.out_h = (in_h - kh) / stride_h + 1;
    g.out_w = (in_w - kw) / stride_w + 1;
    g.pad_top = 0;
    g.pad_left = 0;
  }
  return g;
}

// Unrolls one sample's receptive fields into col[in_c*kh*kw, out_h*out_w].
template <typename S>
void im2col(const ConvGeom& g, const S* x, S* col) {
  const std::size_t cols = g.col_cols();
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        S* row = col + ((c * g.kh + ki) * g.kw + kj) * cols;
        for (std::size_t p = 0; p < g.out_h; ++p) {
          const long i = static_cast<long>(p * g.stride_h) - g.pad_top +
                         static_cast<long>(ki);
          S* dst = row + p * g.out_w;
          if (i < 0 || i >= static_cast<long>(g.in_h)) {
            std::fill(dst, dst + g.out_w, S(0));
            continue;
          }
          const S* src = x + (c * g.in_h + static_cast<std::size_t>(i)) * g.in_w;
          for (std::size_t q = 0; q < g.out_w; ++q) {
            const long j = static_cast<long>(q * g.stride_w) - g.pad_left +
                           static_cast<long>(kj);
            dst[q] = (j < 0 || j >= static_cast<long>(g.in_w))
                         ? S(0)
                         : src[static_cast<std::size_t>(j)];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds col entries back onto the image grid.
template <typename S>
void col2im_acc(const ConvGeom& g, const S* col, S* x) {
  const std::size_t cols = g.col_cols();
  for (std::size_t c = 0; c < g.in_c; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const S* row = col + ((c * g.kh + ki) * g.kw + kj) * cols;
        for (std::size_t p = 0; p < g.out_h; ++p) {
          const long i = static_cast<long>(p * g.stride_h) - g.pad_top +
                         static_cast<long>(ki);
          if (i < 0 || i >= static_cast<long>(g.in_h)) continue;
          S* dst_row = x + (c * g.in_h + static_cast<std::size_t>(i)) * g.in_w;
          const S* src = row + p * g.out_w;
          for (std::size_t q = 0; q < g.out_w; ++q) {
            const long j = static_cast<long>(q * g.stride_w) - g.pad_left +
                           static_cast<long>(kj);
            if (j >= 0 && j < static_cast<long>(g.in_w)) {
              dst_row[static_cast<std::size_t>(j)] += src[q];
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

// --- Dense -----------------------------------------------------------------

// y[B, out] = x[B, in] * w[in, out] + b[out]; b may be null.
template <typename S>
TensorPtr<S> dense(const TensorPtr<S>& x, const TensorPtr<S>& w,
                   const TensorPtr<S>& b) {
  if (x->shape.size() != 2 || w->shape.size() != 2 ||
      x->shape[1] != w->shape[0]) {
    throw ShapeMismatch("dense: " + shape_str(x->shape) + " x " +
                        shape_str(w->shape));
  }
  const std::size_t batch = x->shape[0], in = x->shape[1], out = w->shape[1];
  if (b && (b->shape.size() != 1 || b->shape[0] != out)) {
    throw ShapeMismatch("dense bias: " + shape_str(b->shape));
  }

  auto y = make_tensor<S>({batch, out});
  detail::mm_acc(batch, in, out, x->value.data(), w->value.data(),
                 y->value.data());
  if (b) {
    for (std::size_t i = 0; i < batch; ++i) {
      S* row = y->value.data() + i * out;
      for (std::size_t j = 0; j < out; ++j) row[j] += b->value[j];
    }
  }

  y->requires_grad = x->requires_grad || w->requires_grad ||
                     (b && b->requires_grad);
  y->parents = b ? std::vector<TensorPtr<S>>{x, w, b}
                 : std::vector<TensorPtr<S>>{x, w};
  if (y->requires_grad) {
    TensorPtr<S> xp = x, wp = w, bp = b;
    y->backward_fn = [xp, wp, bp, batch, in, out](Tensor<S>& node) {
      const S* dy = node.grad.data();
      if (xp->requires_grad) {
        xp->ensure_grad();
        detail::mm_acc_abt(batch, out, in, dy, wp->value.data(),
                           xp->grad.data());
      }
      if (wp->requires_grad) {
        wp->ensure_grad();
        detail::mm_acc_atb(batch, in, out, xp->value.data(), dy,
                           wp->grad.data());
      }
      if (bp && bp->requires_grad) {
        bp->ensure_grad();
        for (std::size_t i = 0; i < batch; ++i) {
          const S* row = dy + i * out;
          for (std::size_t j = 0; j < out; ++j) bp->grad[j] += row[j];
        }
      }
    };
  }
  return y;
}

// --- Conv2d ------------------------------------------------------------------

// x[B, C, H, W], w[O, C, kh, kw], b[O] (optional). Same-padding output is
// ceil(H/sh) x ceil(W/sw); valid padding uses no zero fill.
template <typename S>
TensorPtr<S> conv2d(const TensorPtr<S>& x, const TensorPtr<S>& w,
                    const TensorPtr<S>& b, std::size_t stride_h,
                    std::size_t stride_w,
                    detail::PadMode pad = detail::PadMode::kSame) {
  if (x->shape.size() != 4 || w->shape.size() != 4 ||
      x->shape[1] != w->shape[1]) {
    throw ShapeMismatch("conv2d: " + shape_str(x->shape) + " with kernel " +
                        shape_str(w->shape));
  }
  const std::size_t batch = x->shape[0];
  const detail::ConvGeom g =
      detail::conv_geometry(x->shape[1], x->shape[2], x->shape[3], w->shape[0],
                            w->shape[2], w->shape[3], stride_h, stride_w, pad);
  if (b && (b->shape.size() != 1 || b->shape[0] != g.out_c)) {
    throw ShapeMismatch("conv2d bias: " + shape_str(b->shape));
  }

  auto y = make_tensor<S>({batch, g.out_c, g.out_h, g.out_w});
  const std::size_t in_size = g.in_c * g.in_h * g.in_w;
  const std::size_t out_size = g.out_c * g.out_h * g.out_w;
  const std::size_t cols = g.col_cols();

  std::vector<S> col(g.col_rows() * cols);
  for (std::size_t n = 0; n < batch; ++n) {
    detail::im2col(g, x->value.data() + n * in_size, col.data());
    S* yn = y->value.data() + n * out_size;
    detail::mm_acc(g.out_c, g.col_rows(), cols, w->value.data(), col.data(),
                   yn);
    if (b) {
      for (std::size_t o = 0; o < g.out_c; ++o) {
        S* plane = yn + o * cols;
        const S bias = b->value[o];
        for (std::size_t p = 0; p < cols; ++p) plane[p] += bias;
      }
    }
  }

  y->requires_grad = x->requires_grad || w->requires_grad ||
                     (b && b->requires_grad);
  y->parents = b ? std::vector<TensorPtr<S>>{x, w, b}
                 : std::vector<TensorPtr<S>>{x, w};
  if (y->requires_grad) {
    TensorPtr<S> xp = x, wp = w, bp = b;
    y->backward_fn = [xp, wp, bp, g, batch, in_size, out_size](Tensor<S>& node) {
      const std::size_t cols = g.col_cols();
      std::vector<S> col(g.col_rows() * cols);
      if (xp->requires_grad) xp->ensure_grad();
      if (wp->requires_grad) wp->ensure_grad();
      if (bp && bp->requires_grad) bp->ensure_grad();
      for (std::size_t n = 0; n < batch; ++n) {
        const S* dyn = node.grad.data() + n * out_size;
        if (wp->requires_grad) {
          detail::im2col(g, xp->value.data() + n * in_size, col.data());
          detail::mm_acc_abt(g.out_c, cols, g.col_rows(), dyn, col.data(),
                             wp->grad.data());
        }
        if (xp->requires_grad) {
          std::fill(col.begin(), col.end(), S(0));
          detail::mm_acc_atb(g.out_c, g.col_rows(), cols, wp->value.data(),
                             dyn, col.data());
          detail::col2im_acc(g, col.data(),
                             xp->grad.data() + n * in_size);
        }
        if (bp && bp->requires_grad) {
          for (std::size_t o = 0; o < g.out_c; ++o) {
            const S* plane = dyn + o * cols;
            S acc = S(0);
            for (std::size_t p = 0; p < cols; ++p) acc += plane[p];
            bp->grad[o] += acc;
          }
        }
      }
    };
  }
  return y;
}

// --- Transposed conv2d -------------------------------------------------------

// x[B, I, Hi, Wi], w[I, O, kh, kw], b[O] (optional). The output spatial size
// is pinned to (target_h, target_w): the layer is the adjoint of the
// same-padded conv2d that maps the target shape onto the input shape, so
// ceil(target/stride) must equal the input extent.
template <typename S>
TensorPtr<S> conv_transpose2d(const TensorPtr<S>& x, const TensorPtr<S>& w,
                              const TensorPtr<S>& b, std::size_t stride_h,
                              std::size_t stride_w, std::size_t target_h,
                              std::size_t target_w) {
  if (x->shape.size() != 4 || w->shape.size() != 4 ||
      x->shape[1] != w->shape[0]) {
    throw ShapeMismatch("conv_transpose2d: " + shape_str(x->shape) +
                        " with kernel " + shape_str(w->shape));
  }
  const std::size_t batch = x->shape[0];
  const std::size_t in_h = x->shape[2], in_w = x->shape[3];
  if ((target_h + stride_h - 1) / stride_h != in_h ||
      (target_w + stride_w - 1) / stride_w != in_w) {
    throw UnreachableTargetShape(
        "target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
        " does not stride down to " + std::to_string(in_h) + "x" +
        std::to_string(in_w));
  }
  const std::size_t out_c = w->shape[1];
  if (b && (b->shape.size() != 1 || b->shape[0] != out_c)) {
    throw ShapeMismatch("conv_transpose2d bias: " + shape_str(b->shape));
  }

  // Geometry of the mirrored conv: target -> input.
  const detail::ConvGeom g = detail::conv_geometry(
      out_c, target_h, target_w, x->shape[1], w->shape[2], w->shape[3],
      stride_h, stride_w, detail::PadMode::kSame);

  auto y = make_tensor<S>({batch, out_c, target_h, target_w});
  const std::size_t in_size = x->shape[1] * in_h * in_w;
  const std::size_t out_size = out_c * target_h * target_w;
  const std::size_t cols = g.col_cols();  // == in_h * in_w

  std::vector<S> col(g.col_rows() * cols);
  for (std::size_t n = 0; n < batch; ++n) {
    // col = w^T_mat * x_mat, then scatter back onto the target grid.
    std::fill(col.begin(), col.end(), S(0));
    detail::mm_acc_atb(x->shape[1], g.col_rows(), cols, w->value.data(),
                       x->value.data() + n * in_size, col.data());
    S* yn = y->value.data() + n * out_size;
    detail::col2im_acc(g, col.data(), yn);
    if (b) {
      for (std::size_t o = 0; o < out_c; ++o) {
        S* plane = yn + o * target_h * target_w;
        const S bias = b->value[o];
        for (std::size_t p = 0; p < target_h * target_w; ++p) plane[p] += bias;
      }
    }
  }

  y->requires_grad = x->requires_grad || w->requires_grad ||
                     (b && b->requires_grad);
  y->parents = b ? std::vector<TensorPtr<S>>{x, w, b}
                 : std::vector<TensorPtr<S>>{x, w};
  if (y->requires_grad) {
    TensorPtr<S> xp = x, wp = w, bp = b;
    const std::size_t in_c = x->shape[1];
    y->backward_fn = [xp, wp, bp, g, batch, in_size, out_size, in_c,
                      out_c](Tensor<S>& node) {
      const std::size_t cols = g.col_cols();
      std::vector<S> col(g.col_rows() * cols);
      if (xp->requires_grad) xp->ensure_grad();
      if (wp->requires_grad) wp->ensure_grad();
      if (bp && bp->requires_grad) bp->ensure_grad();
      for (std::size_t n = 0; n < batch; ++n) {
        const S* dyn = node.grad.data() + n * out_size;
        if (xp->requires_grad || wp->requires_grad) {
          detail::im2col(g, dyn, col.data());
        }
        if (xp->requires_grad) {
          // dx = forward pass of the mirrored conv applied to dy.
          detail::mm_acc(in_c, g.col_rows(), cols, wp->value.data(),
                         col.data(), xp->grad.data() + n * in_size);
        }
        if (wp->requires_grad) {
          detail::mm_acc_abt(in_c, cols, g.col_rows(),
                             xp->value.data() + n * in_size, col.data(),
                             wp->grad.data());
        }
        if (bp && bp->requires_grad) {
          const std::size_t plane_size = node.numel() / batch / out_c;
          for (std::size_t o = 0; o < out_c; ++o) {
            const S* plane = dyn + o * plane_size;
            S acc = S(0);
            for (std::size_t p = 0; p < plane_size; ++p) acc += plane[p];
            bp->grad[o] += acc;
          }
        }
      }
    };
  }
  return y;
}

// --- Batch norm --------------------------------------------------------------

enum class Mode { kTrain, kInfer };

// Per-channel batch normalization over [B, C] or [B, C, H, W]. In train mode
// the batch statistics normalize and the running buffers (owned by the
// caller) are updated in place with momentum 0.9; in infer mode the running
// buffers normalize and the op is a per-channel affine map.
template <typename S>
TensorPtr<S> batch_norm(const TensorPtr<S>& x, const TensorPtr<S>& gamma,
                        const TensorPtr<S>& beta, std::vector<S>* running_mean,
                        std::vector<S>* running_var, Mode mode,
                        S eps = S(1e-5), S momentum = S(0.9)) {
  if (x->shape.size() != 2 && x->shape.size() != 4) {
    throw ShapeMismatch("batch_norm input rank: " + shape_str(x->shape));
  }
  const std::size_t batch = x->shape[0];
  const std::size_t channels = x->shape[1];
  const std::size_t spatial = x->numel() / (batch * channels);
  if (gamma->numel() != channels || beta->numel() != channels ||
      running_mean->size() != channels || running_var->size() != channels) {
    throw ShapeMismatch("batch_norm parameter width mismatch");
  }
  if (mode == Mode::kTrain && batch < 2) {
    throw BatchTooSmall("batch_norm training needs batch >= 2, got " +
                        std::to_string(batch));
  }

  const std::size_t n_stat = batch * spatial;
  auto y = make_tensor<S>(x->shape);

  std::vector<S> mean(channels), inv_std(channels);
  auto channel_ptr = [&](const std::vector<S>& buf, std::size_t n,
                         std::size_t c) {
    return buf.data() + (n * channels + c) * spatial;
  };

  if (mode == Mode::kTrain) {
    for (std::size_t c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const S* p = channel_ptr(x->value, n, c);
        for (std::size_t s = 0; s < spatial; ++s) sum += p[s];
      }
      const double mu = sum / static_cast<double>(n_stat);
      double var_acc = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        const S* p = channel_ptr(x->value, n, c);
        for (std::size_t s = 0; s < spatial; ++s) {
          const double d = p[s] - mu;
          var_acc += d * d;
        }
      }
      const double var = var_acc / static_cast<double>(n_stat);
      mean[c] = static_cast<S>(mu);
      inv_std[c] = static_cast<S>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      (*running_mean)[c] =
          momentum * (*running_mean)[c] + (S(1) - momentum) * static_cast<S>(mu);
      (*running_var)[c] =
          momentum * (*running_var)[c] + (S(1) - momentum) * static_cast<S>(var);
    }
  } else {
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = (*running_mean)[c];
      inv_std[c] = S(1) / std::sqrt((*running_var)[c] + eps);
    }
  }

  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const S* p = channel_ptr(x->value, n, c);
      S* q = y->value.data() + (n * channels + c) * spatial;
      const S m = mean[c], is = inv_std[c], gm = gamma->value[c],
              bt = beta->value[c];
      for (std::size_t s = 0; s < spatial; ++s) q[s] = gm * (p[s] - m) * is + bt;
    }
  }

  y->requires_grad =
      x->requires_grad || gamma->requires_grad || beta->requires_grad;
  y->parents = {x, gamma, beta};
  if (y->requires_grad) {
    TensorPtr<S> xp = x, gp = gamma, bp = beta;
    const bool train = mode == Mode::kTrain;
    y->backward_fn = [xp, gp, bp, mean, inv_std, batch, channels, spatial,
                      n_stat, train](Tensor<S>& node) {
      if (xp->requires_grad) xp->ensure_grad();
      if (gp->requires_grad) gp->ensure_grad();
      if (bp->requires_grad) bp->ensure_grad();
      const S inv_n = S(1) / static_cast<S>(n_stat);
      for (std::size_t c = 0; c < channels; ++c) {
        const S m = mean[c], is = inv_std[c], gm = gp->value[c];
        // Channel reductions: sum dy and sum dy * xhat.
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t n = 0; n < batch; ++n) {
          const S* xv = xp->value.data() + (n * channels + c) * spatial;
          const S* dy = node.grad.data() + (n * channels + c) * spatial;
          for (std::size_t s = 0; s < spatial; ++s) {
            sum_dy += dy[s];
            sum_dy_xhat += dy[s] * (xv[s] - m) * is;
          }
        }
        if (gp->requires_grad) gp->grad[c] += static_cast<S>(sum_dy_xhat);
        if (bp->requires_grad) bp->grad[c] += static_cast<S>(sum_dy);
        if (!xp->requires_grad) continue;
        const S mean_dy = static_cast<S>(sum_dy) * inv_n;
        const S mean_dy_xhat = static_cast<S>(sum_dy_xhat) * inv_n;
        for (std::size_t n = 0; n < batch; ++n) {
          const S* xv = xp->value.data() + (n * channels + c) * spatial;
          const S* dy = node.grad.data() + (n * channels + c) * spatial;
          S* dx = xp->grad.data() + (n * channels + c) * spatial;
          if (train) {
            for (std::size_t s = 0; s < spatial; ++s) {
              const S xhat = (xv[s] - m) * is;
              dx[s] += gm * is * (dy[s] - mean_dy - xhat * mean_dy_xhat);
            }
          } else {
            for (std::size_t s = 0; s < spatial; ++s) dx[s] += gm * is * dy[s];
          }
        }
      }
    };
  }
  return y;
}

// --- Elementwise and shape ops ----------------------------------------------

template <typename S>
TensorPtr<S> relu(const TensorPtr<S>& x) {
  auto y = make_tensor<S>(x->shape);
  for (std::size_t i = 0; i < x->numel(); ++i) {
    y->value[i] = x->value[i] > S(0) ? x->value[i] : S(0);
  }
  y->requires_grad = x->requires_grad;
  y->parents = {x};
  if (y->requires_grad) {
    TensorPtr<S> xp = x;
    y->backward_fn = [xp](Tensor<S>& node) {
      xp->ensure_grad();
      // Subgradient at exactly 0 is taken as 0.
      for (std::size_t i = 0; i < node.numel(); ++i) {
        if (xp->value[i] > S(0)) xp->grad[i] += node.grad[i];
      }
    };
  }
  return y;
}

template <typename S>
TensorPtr<S> reshape(const TensorPtr<S>& x, std::vector<std::size_t> shape) {
  if (numel_of(shape) != x->numel()) {
    throw ShapeMismatch("reshape " + shape_str(x->shape) + " -> " +
                        shape_str(shape));
  }
  auto y = make_tensor<S>(std::move(shape));
  y->value = x->value;
  y->requires_grad = x->requires_grad;
  y->parents = {x};
  if (y->requires_grad) {
    TensorPtr<S> xp = x;
    y->backward_fn = [xp](Tensor<S>& node) {
      xp->ensure_grad();
      for (std::size_t i = 0; i < node.numel(); ++i) {
        xp->grad[i] += node.grad[i];
      }
    };
  }
  return y;
}

// Mean over all elements of the squared difference.
template <typename S>
TensorPtr<S> mse_loss(const TensorPtr<S>& pred, const TensorPtr<S>& target) {
  if (pred->shape != target->shape) {
    throw ShapeMismatch("mse_loss: " + shape_str(pred->shape) + " vs " +
                        shape_str(target->shape));
  }
  auto loss = make_tensor<S>({std::size_t{1}});
  double acc = 0.0;
  for (std::size_t i = 0; i < pred->numel(); ++i) {
    const double d = static_cast<double>(pred->value[i]) - target->value[i];
    acc += d * d;
  }
  loss->value[0] = static_cast<S>(acc / static_cast<double>(pred->numel()));

  loss->requires_grad = pred->requires_grad || target->requires_grad;
  loss->parents = {pred, target};
  if (loss->requires_grad) {
    TensorPtr<S> pp = pred, tp = target;
    loss->backward_fn = [pp, tp](Tensor<S>& node) {
      const S scale = node.grad[0] * S(2) / static_cast<S>(pp->numel());
      if (pp->requires_grad) {
        pp->ensure_grad();
        for (std::size_t i = 0; i < pp->numel(); ++i) {
          pp->grad[i] += scale * (pp->value[i] - tp->value[i]);
        }
      }
      if (tp->requires_grad) {
        tp->ensure_grad();
        for (std::size_t i = 0; i < tp->numel(); ++i) {
          tp->grad[i] -= scale * (pp->value[i] - tp->value[i]);
        }
      }
    };
  }
  return loss;
}

}  // namespace soundsieve

#endif  // SOUNDSIEVE_OPS_HPP_
