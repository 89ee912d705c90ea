#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "detkit/errors.hpp"
#include "detkit/tensor.hpp"

// Per-sample layer kernels for the desk-scale harness. Activations are
// (channels, length) tensors; the batch loop lives in the trainer and
// accumulates gradients sequentially in ascending sample order so a run
// is bit-reproducible. Every backward distributes gradients through
// explicit loops in fixed index order; there is no scatter.

namespace detkit {

template <typename T>
T gelu_tanh(T x) {
  const T c0 = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  const T c1 = static_cast<T>(0.044715);
  return static_cast<T>(0.5) * x *
         (static_cast<T>(1) + std::tanh(c0 * (x + c1 * x * x * x)));
}

template <typename T>
T gelu_tanh_grad(T x) {
  const T c0 = static_cast<T>(0.7978845608028654);
  const T c1 = static_cast<T>(0.044715);
  const T u = c0 * (x + c1 * x * x * x);
  const T th = std::tanh(u);
  const T sech2 = static_cast<T>(1) - th * th;
  return static_cast<T>(0.5) * (static_cast<T>(1) + th) +
         static_cast<T>(0.5) * x * sech2 * c0 *
             (static_cast<T>(1) + static_cast<T>(3) * c1 * x * x);
}

template <typename T>
Tensor<T> gelu_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = gelu_tanh(x[i]);
  return y;
}

template <typename T>
Tensor<T> gelu_backward(const Tensor<T>& x, const Tensor<T>& gy) {
  Tensor<T> gx = x;
  for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = gy[i] * gelu_tanh_grad(x[i]);
  return gx;
}

// ---------------------------------------------------------------------------
// Conv1d, stride 1 or 2, zero padding k/2, no bias. w: (c_out, c_in, k).

template <typename T>
std::size_t conv1d_out_len(std::size_t len, std::size_t k, std::size_t stride) {
  return (len + 2 * (k / 2) - k) / stride + 1;
}

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& w,
                         std::size_t stride) {
  if (stride != 1 && stride != 2) throw spec_error("conv1d: stride must be 1 or 2");
  const std::size_t c_in = x.extent(0), len = x.extent(1);
  const std::size_t c_out = w.extent(0), k = w.extent(2);
  if (w.extent(1) != c_in) throw dimension_error("conv1d: channel mismatch");
  const std::size_t pad = k / 2;
  const std::size_t out_len = conv1d_out_len<T>(len, k, stride);

  Tensor<T> y({c_out, out_len});
  for (std::size_t oc = 0; oc < c_out; ++oc)
    for (std::size_t t = 0; t < out_len; ++t) {
      T acc{0};
      for (std::size_t ic = 0; ic < c_in; ++ic)
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t src =
              static_cast<std::ptrdiff_t>(t * stride + kk) -
              static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
          acc += w[oc * c_in * k + ic * k + kk] *
                 x.at(ic, static_cast<std::size_t>(src));
        }
      y.at(oc, t) = acc;
    }
  return y;
}

/// Returns the input gradient; accumulates parameter gradients into gw.
template <typename T>
Tensor<T> conv1d_backward(const Tensor<T>& x, const Tensor<T>& w,
                          std::size_t stride, const Tensor<T>& gy,
                          Tensor<T>& gw) {
  const std::size_t c_in = x.extent(0), len = x.extent(1);
  const std::size_t c_out = w.extent(0), k = w.extent(2);
  const std::size_t pad = k / 2;
  const std::size_t out_len = gy.extent(1);

  Tensor<T> gx({c_in, len});
  for (std::size_t oc = 0; oc < c_out; ++oc)
    for (std::size_t t = 0; t < out_len; ++t) {
      const T g = gy.at(oc, t);
      for (std::size_t ic = 0; ic < c_in; ++ic)
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t src =
              static_cast<std::ptrdiff_t>(t * stride + kk) -
              static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
          gw[oc * c_in * k + ic * k + kk] +=
              g * x.at(ic, static_cast<std::size_t>(src));
          gx.at(ic, static_cast<std::size_t>(src)) +=
              g * w[oc * c_in * k + ic * k + kk];
        }
    }
  return gx;
}

// ---------------------------------------------------------------------------
// Linear, no bias. w: (out, in); x: flat (in).

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const Tensor<T>& w) {
  const std::size_t in = x.numel(), out = w.extent(0);
  if (w.extent(1) != in) throw dimension_error("linear: width mismatch");
  Tensor<T> y({out});
  for (std::size_t o = 0; o < out; ++o) {
    T acc{0};
    for (std::size_t i = 0; i < in; ++i) acc += w.at(o, i) * x[i];
    y[o] = acc;
  }
  return y;
}

template <typename T>
Tensor<T> linear_backward(const Tensor<T>& x, const Tensor<T>& w,
                          const Tensor<T>& gy, Tensor<T>& gw) {
  const std::size_t in = x.numel(), out = w.extent(0);
  Tensor<T> gx({in});
  for (std::size_t o = 0; o < out; ++o) {
    const T g = gy[o];
    for (std::size_t i = 0; i < in; ++i) {
      gw.at(o, i) += g * x[i];
      gx[i] += g * w.at(o, i);
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Adaptive average pooling to a fixed output length. Window i covers
// [floor(i*L/O), ceil((i+1)*L/O)); the backward distributes the upstream
// gradient uniformly over each window with an explicit per-window loop.

inline std::size_t adaptive_window_start(std::size_t i, std::size_t in_len,
                                         std::size_t out_len) {
  return i * in_len / out_len;
}

inline std::size_t adaptive_window_end(std::size_t i, std::size_t in_len,
                                       std::size_t out_len) {
  return ((i + 1) * in_len + out_len - 1) / out_len;
}

template <typename T>
Tensor<T> adaptive_avg_pool_forward(const Tensor<T>& x, std::size_t out_len) {
  const std::size_t c = x.extent(0), len = x.extent(1);
  if (out_len < 1 || out_len > len)
    throw dimension_error("adaptive pool: bad output length");
  Tensor<T> y({c, out_len});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < out_len; ++i) {
      const std::size_t lo = adaptive_window_start(i, len, out_len);
      const std::size_t hi = adaptive_window_end(i, len, out_len);
      T acc{0};
      for (std::size_t t = lo; t < hi; ++t) acc += x.at(ch, t);
      y.at(ch, i) = acc / static_cast<T>(hi - lo);
    }
  return y;
}

template <typename T>
Tensor<T> adaptive_avg_pool_backward(const Tensor<T>& x, std::size_t out_len,
                                     const Tensor<T>& gy) {
  const std::size_t c = x.extent(0), len = x.extent(1);
  Tensor<T> gx({c, len});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < out_len; ++i) {
      const std::size_t lo = adaptive_window_start(i, len, out_len);
      const std::size_t hi = adaptive_window_end(i, len, out_len);
      const T share = gy.at(ch, i) / static_cast<T>(hi - lo);
      for (std::size_t t = lo; t < hi; ++t) gx.at(ch, t) += share;
    }
  return gx;
}

// ---------------------------------------------------------------------------
// Global average + max pooling concatenation: (C, L) -> (2C). Max ties
// route the gradient to the lowest index.

template <typename T>
Tensor<T> global_avg_max_forward(const Tensor<T>& x) {
  const std::size_t c = x.extent(0), len = x.extent(1);
  Tensor<T> y({2 * c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    T acc{0};
    T best = x.at(ch, 0);
    for (std::size_t t = 0; t < len; ++t) {
      acc += x.at(ch, t);
      if (x.at(ch, t) > best) best = x.at(ch, t);
    }
    y[ch] = acc / static_cast<T>(len);
    y[c + ch] = best;
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_max_backward(const Tensor<T>& x, const Tensor<T>& gy) {
  const std::size_t c = x.extent(0), len = x.extent(1);
  Tensor<T> gx({c, len});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T avg_share = gy[ch] / static_cast<T>(len);
    std::size_t arg = 0;
    for (std::size_t t = 1; t < len; ++t)
      if (x.at(ch, t) > x.at(ch, arg)) arg = t;
    for (std::size_t t = 0; t < len; ++t) gx.at(ch, t) += avg_share;
    gx.at(ch, arg) += gy[c + ch];
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Residual block: y = x + conv2(gelu(conv1(x))), conv2 fixup-scaled at
// init (branch_last). Stride 1, widths preserved.

template <typename T>
struct ResidualBlockCache {
  Tensor<T> x, h1, h1a;
};

template <typename T>
Tensor<T> residual_block_forward(const Tensor<T>& x, const Tensor<T>& w1,
                                 const Tensor<T>& w2,
                                 ResidualBlockCache<T>& cache) {
  cache.x = x;
  cache.h1 = conv1d_forward(x, w1, 1);
  cache.h1a = gelu_forward(cache.h1);
  Tensor<T> branch = conv1d_forward(cache.h1a, w2, 1);
  Tensor<T> y = x;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += branch[i];
  return y;
}

template <typename T>
Tensor<T> residual_block_backward(const ResidualBlockCache<T>& cache,
                                  const Tensor<T>& w1, const Tensor<T>& w2,
                                  const Tensor<T>& gy, Tensor<T>& gw1,
                                  Tensor<T>& gw2) {
  Tensor<T> g_h1a = conv1d_backward(cache.h1a, w2, 1, gy, gw2);
  Tensor<T> g_h1 = gelu_backward(cache.h1, g_h1a);
  Tensor<T> gx = conv1d_backward(cache.x, w1, 1, g_h1, gw1);
  for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i];
  return gx;
}

}  // namespace detkit
