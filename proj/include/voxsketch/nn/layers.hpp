#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "voxsketch/nn/tensor.hpp"

namespace voxsketch::nn {

/// Learnable parameter with its gradient and Adam moments.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value, grad, m, v;

  Param() = default;
  Param(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    value.assign(count, T(0));
    grad.assign(count, T(0));
    m.assign(count, T(0));
    v.assign(count, T(0));
  }
  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

namespace detail {

// All convolutions are 4x4, stride 2, padding 1: output pixel (oy, ox) reads
// input rows 2*oy-1 .. 2*oy+2.
constexpr int kK = 4;

/// (N, C, H, W) image -> (C*16, N*Ho*Wo) columns.
template <typename T>
void im2col(const Tensor<T>& x, std::vector<T>& cols) {
  const int ho = x.h / 2, wo = x.w / 2;
  const std::size_t ncols = static_cast<std::size_t>(x.n) * ho * wo;
  cols.assign(static_cast<std::size_t>(x.c) * kK * kK * ncols, T(0));
  for (int c = 0; c < x.c; ++c)
    for (int ky = 0; ky < kK; ++ky)
      for (int kx = 0; kx < kK; ++kx) {
        T* row = cols.data() + ((static_cast<std::size_t>(c) * kK + ky) * kK + kx) * ncols;
        for (int b = 0; b < x.n; ++b) {
          const T* src = x.data.data() + x.index(b, c, 0, 0);
          T* dst = row + static_cast<std::size_t>(b) * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = 2 * oy - 1 + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = 2 * ox - 1 + kx;
              if (ix >= 0 && ix < x.w) dst[oy * wo + ox] = src[iy * x.w + ix];
            }
          }
        }
      }
}

/// Adjoint of im2col: scatter-add columns into an (N, C, H, W) image.
template <typename T>
void col2im(const std::vector<T>& cols, Tensor<T>& x) {
  const int ho = x.h / 2, wo = x.w / 2;
  const std::size_t ncols = static_cast<std::size_t>(x.n) * ho * wo;
  for (int c = 0; c < x.c; ++c)
    for (int ky = 0; ky < kK; ++ky)
      for (int kx = 0; kx < kK; ++kx) {
        const T* row = cols.data() + ((static_cast<std::size_t>(c) * kK + ky) * kK + kx) * ncols;
        for (int b = 0; b < x.n; ++b) {
          T* dst = x.data.data() + x.index(b, c, 0, 0);
          const T* src = row + static_cast<std::size_t>(b) * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = 2 * oy - 1 + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = 2 * ox - 1 + kx;
              if (ix >= 0 && ix < x.w) dst[iy * x.w + ix] += src[oy * wo + ox];
            }
          }
        }
      }
}

/// (N, C, H, W) <-> (C, N*H*W).
template <typename T>
void to_channel_major(const Tensor<T>& x, std::vector<T>& out) {
  const std::size_t p = x.plane(), ncols = static_cast<std::size_t>(x.n) * p;
  out.resize(static_cast<std::size_t>(x.c) * ncols);
  for (int b = 0; b < x.n; ++b)
    for (int c = 0; c < x.c; ++c)
      std::copy_n(x.data.begin() + x.index(b, c, 0, 0), p, out.begin() + c * ncols + b * p);
}

template <typename T>
void from_channel_major(const std::vector<T>& in, Tensor<T>& x) {
  const std::size_t p = x.plane(), ncols = static_cast<std::size_t>(x.n) * p;
  for (int b = 0; b < x.n; ++b)
    for (int c = 0; c < x.c; ++c)
      std::copy_n(in.begin() + c * ncols + b * p, p, x.data.begin() + x.index(b, c, 0, 0));
}

}  // namespace detail

// --- convolution ---------------------------------------------------------------------------

template <typename T>
struct ConvCache {
  std::vector<T> cols;
  int in_n = 0, in_c = 0, in_h = 0, in_w = 0;
};

/// 4x4 stride-2 convolution; halves the resolution.
template <typename T>
struct Conv2d {
  int in_ch = 0, out_ch = 0;
  Param<T> weight;  // (out, in*16)
  Param<T> bias;    // (out), empty when unused
  bool has_bias = false;

  Conv2d() = default;
  Conv2d(const std::string& name, int in, int out, bool with_bias)
      : in_ch(in), out_ch(out), weight(name + ".weight", {out, in, 4, 4}), has_bias(with_bias) {
    if (with_bias) bias = Param<T>(name + ".bias", {out});
  }

  Tensor<T> forward(const Tensor<T>& x, ConvCache<T>* cache) const {
    if (x.c != in_ch) throw Error("conv: expected " + std::to_string(in_ch) + " channels, got " + std::to_string(x.c));
    if (x.h % 2 || x.w % 2 || x.h < 2 || x.w < 2) throw Error("conv: input size must be even, got " + x.shape_string());
    std::vector<T> local;
    std::vector<T>& cols = cache ? cache->cols : local;
    detail::im2col(x, cols);
    const int ho = x.h / 2, wo = x.w / 2;
    const Eigen::Index ncols = static_cast<Eigen::Index>(x.n) * ho * wo;
    std::vector<T> out(static_cast<std::size_t>(out_ch) * ncols);
    MapMat<T> y(out.data(), out_ch, ncols);
    y.noalias() = ConstMapMat<T>(weight.value.data(), out_ch, in_ch * 16) *
                  ConstMapMat<T>(cols.data(), in_ch * 16, ncols);
    if (has_bias)
      for (int c = 0; c < out_ch; ++c) y.row(c).array() += bias.value[c];
    Tensor<T> result(x.n, out_ch, ho, wo);
    detail::from_channel_major(out, result);
    if (cache) {
      cache->in_n = x.n;
      cache->in_c = x.c;
      cache->in_h = x.h;
      cache->in_w = x.w;
    }
    return result;
  }

  Tensor<T> backward(const Tensor<T>& gy, const ConvCache<T>& cache) {
    std::vector<T> g;
    detail::to_channel_major(gy, g);
    const Eigen::Index ncols = static_cast<Eigen::Index>(gy.n) * gy.h * gy.w;
    ConstMapMat<T> G(g.data(), out_ch, ncols);
    ConstMapMat<T> cols(cache.cols.data(), in_ch * 16, ncols);
    MapMat<T>(weight.grad.data(), out_ch, in_ch * 16).noalias() += G * cols.transpose();
    if (has_bias)
      for (int c = 0; c < out_ch; ++c) bias.grad[c] += G.row(c).sum();
    std::vector<T> dcols(static_cast<std::size_t>(in_ch) * 16 * ncols);
    MapMat<T>(dcols.data(), in_ch * 16, ncols).noalias() =
        ConstMapMat<T>(weight.value.data(), out_ch, in_ch * 16).transpose() * G;
    Tensor<T> gx(cache.in_n, cache.in_c, cache.in_h, cache.in_w);
    detail::col2im(dcols, gx);
    return gx;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> p{&weight};
    if (has_bias) p.push_back(&bias);
    return p;
  }
};

template <typename T>
struct DeconvCache {
  std::vector<T> x_cm;  // input in channel-major layout
  int in_n = 0, in_h = 0, in_w = 0;
};

/// 4x4 stride-2 transposed convolution; doubles the resolution. It is the
/// adjoint of Conv2d with the same weight layout read as (in, out*16).
template <typename T>
struct ConvTranspose2d {
  int in_ch = 0, out_ch = 0;
  Param<T> weight;  // (in, out*16)
  Param<T> bias;
  bool has_bias = false;

  ConvTranspose2d() = default;
  ConvTranspose2d(const std::string& name, int in, int out, bool with_bias)
      : in_ch(in), out_ch(out), weight(name + ".weight", {in, out, 4, 4}), has_bias(with_bias) {
    if (with_bias) bias = Param<T>(name + ".bias", {out});
  }

  Tensor<T> forward(const Tensor<T>& x, DeconvCache<T>* cache) const {
    if (x.c != in_ch)
      throw Error("deconv: expected " + std::to_string(in_ch) + " channels, got " + std::to_string(x.c));
    std::vector<T> local;
    std::vector<T>& xcm = cache ? cache->x_cm : local;
    detail::to_channel_major(x, xcm);
    const Eigen::Index ncols = static_cast<Eigen::Index>(x.n) * x.h * x.w;
    std::vector<T> cols(static_cast<std::size_t>(out_ch) * 16 * ncols);
    MapMat<T>(cols.data(), out_ch * 16, ncols).noalias() =
        ConstMapMat<T>(weight.value.data(), in_ch, out_ch * 16).transpose() *
        ConstMapMat<T>(xcm.data(), in_ch, ncols);
    Tensor<T> y(x.n, out_ch, 2 * x.h, 2 * x.w);
    detail::col2im(cols, y);
    if (has_bias)
      for (int b = 0; b < y.n; ++b)
        for (int c = 0; c < out_ch; ++c) {
          T* p = y.data.data() + y.index(b, c, 0, 0);
          for (std::size_t i = 0; i < y.plane(); ++i) p[i] += bias.value[c];
        }
    if (cache) {
      cache->in_n = x.n;
      cache->in_h = x.h;
      cache->in_w = x.w;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const DeconvCache<T>& cache) {
    std::vector<T> gcols;
    detail::im2col(gy, gcols);
    const Eigen::Index ncols = static_cast<Eigen::Index>(cache.in_n) * cache.in_h * cache.in_w;
    ConstMapMat<T> G(gcols.data(), out_ch * 16, ncols);
    ConstMapMat<T> X(cache.x_cm.data(), in_ch, ncols);
    MapMat<T>(weight.grad.data(), in_ch, out_ch * 16).noalias() += X * G.transpose();
    if (has_bias)
      for (int b = 0; b < gy.n; ++b)
        for (int c = 0; c < out_ch; ++c) {
          const T* p = gy.data.data() + gy.index(b, c, 0, 0);
          T s = 0;
          for (std::size_t i = 0; i < gy.plane(); ++i) s += p[i];
          bias.grad[c] += s;
        }
    std::vector<T> gx_cm(static_cast<std::size_t>(in_ch) * ncols);
    MapMat<T>(gx_cm.data(), in_ch, ncols).noalias() =
        ConstMapMat<T>(weight.value.data(), in_ch, out_ch * 16) * G;
    Tensor<T> gx(cache.in_n, in_ch, cache.in_h, cache.in_w);
    detail::from_channel_major(gx_cm, gx);
    return gx;
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> p{&weight};
    if (has_bias) p.push_back(&bias);
    return p;
  }
};

// --- batch normalization -------------------------------------------------------------------

template <typename T>
struct BatchNormCache {
  std::vector<T> xhat;
  std::vector<T> inv_std;
  int n = 0, h = 0, w = 0;
};

template <typename T>
struct BatchNorm2d {
  int channels = 0;
  T momentum = T(0.1);
  T eps = T(1e-5);
  Param<T> gamma, beta;
  std::vector<T> running_mean, running_var;

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int ch)
      : channels(ch), gamma(name + ".gamma", {ch}), beta(name + ".beta", {ch}),
        running_mean(ch, T(0)), running_var(ch, T(1)) {
    std::fill(gamma.value.begin(), gamma.value.end(), T(1));
  }

  /// Training mode uses batch statistics and updates the running averages
  /// (when `update_running`); inference mode uses the running averages.
  Tensor<T> forward(const Tensor<T>& x, bool training, BatchNormCache<T>* cache, bool update_running = true) {
    if (!training) return infer(x);
    Tensor<T> y(x.n, x.c, x.h, x.w);
    const std::size_t p = x.plane();
    const double m = static_cast<double>(x.n) * p;
    if (cache) {
      cache->xhat.resize(x.size());
      cache->inv_std.resize(channels);
      cache->n = x.n;
      cache->h = x.h;
      cache->w = x.w;
    }
    for (int c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (int b = 0; b < x.n; ++b) {
        const T* src = x.data.data() + x.index(b, c, 0, 0);
        for (std::size_t i = 0; i < p; ++i) sum += src[i];
      }
      const double mean = sum / m;
      double sq = 0.0;
      for (int b = 0; b < x.n; ++b) {
        const T* src = x.data.data() + x.index(b, c, 0, 0);
        for (std::size_t i = 0; i < p; ++i) sq += (src[i] - mean) * (src[i] - mean);
      }
      const double var = sq / m;
      const T inv = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      for (int b = 0; b < x.n; ++b) {
        const std::size_t base = x.index(b, c, 0, 0);
        for (std::size_t i = 0; i < p; ++i) {
          const T xh = (x.data[base + i] - static_cast<T>(mean)) * inv;
          if (cache) cache->xhat[base + i] = xh;
          y.data[base + i] = gamma.value[c] * xh + beta.value[c];
        }
      }
      if (cache) cache->inv_std[c] = inv;
      if (update_running) {
        const double unbiased = m > 1.0 ? sq / (m - 1.0) : var;
        running_mean[c] = static_cast<T>((1.0 - momentum) * running_mean[c] + momentum * mean);
        running_var[c] = static_cast<T>((1.0 - momentum) * running_var[c] + momentum * unbiased);
      }
    }
    return y;
  }

  Tensor<T> infer(const Tensor<T>& x) const {
    Tensor<T> y(x.n, x.c, x.h, x.w);
    const std::size_t p = x.plane();
    for (int c = 0; c < channels; ++c) {
      const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + static_cast<double>(eps)));
      const T scale = gamma.value[c] * inv, shift = beta.value[c] - running_mean[c] * scale;
      for (int b = 0; b < x.n; ++b) {
        const std::size_t base = x.index(b, c, 0, 0);
        for (std::size_t i = 0; i < p; ++i) y.data[base + i] = x.data[base + i] * scale + shift;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const BatchNormCache<T>& cache) {
    Tensor<T> gx(gy.n, gy.c, gy.h, gy.w);
    const std::size_t p = gy.plane();
    const double m = static_cast<double>(gy.n) * p;
    for (int c = 0; c < channels; ++c) {
      double sg = 0.0, sgx = 0.0;
      for (int b = 0; b < gy.n; ++b) {
        const std::size_t base = gy.index(b, c, 0, 0);
        for (std::size_t i = 0; i < p; ++i) {
          sg += gy.data[base + i];
          sgx += gy.data[base + i] * cache.xhat[base + i];
        }
      }
      gamma.grad[c] += static_cast<T>(sgx);
      beta.grad[c] += static_cast<T>(sg);
      const double k = static_cast<double>(gamma.value[c]) * cache.inv_std[c] / m;
      for (int b = 0; b < gy.n; ++b) {
        const std::size_t base = gy.index(b, c, 0, 0);
        for (std::size_t i = 0; i < p; ++i)
          gx.data[base + i] = static_cast<T>(k * (m * gy.data[base + i] - sg - cache.xhat[base + i] * sgx));
      }
    }
    return gx;
  }

  std::vector<Param<T>*> params() { return {&gamma, &beta}; }
};

// --- pointwise -----------------------------------------------------------------------------

/// Rectifier with negative slope (0 for the plain ReLU). The backward pass
/// uses the sign of the stored output, which equals the sign of the input.
template <typename T>
void leaky_relu_inplace(Tensor<T>& x, T slope) {
  for (T& v : x.data)
    if (v < T(0)) v *= slope;
}

template <typename T>
void leaky_relu_backward_inplace(Tensor<T>& g, const Tensor<T>& y, T slope) {
  for (std::size_t i = 0; i < g.data.size(); ++i)
    if (y.data[i] < T(0) || (slope == T(0) && y.data[i] == T(0))) g.data[i] *= slope;
}

/// Inverted dropout: survivors are scaled by 1 / (1 - rate).
template <typename T>
void dropout_inplace(Tensor<T>& x, T rate, Rng& rng, std::vector<std::uint8_t>& mask) {
  mask.resize(x.size());
  const T scale = T(1) / (T(1) - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng.uniform() >= static_cast<double>(rate);
    x.data[i] = mask[i] ? x.data[i] * scale : T(0);
  }
}

template <typename T>
void dropout_backward_inplace(Tensor<T>& g, T rate, const std::vector<std::uint8_t>& mask) {
  const T scale = T(1) / (T(1) - rate);
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = mask[i] ? g.data[i] * scale : T(0);
}

// --- paired softmax ------------------------------------------------------------------------

/// Occupancy probability of slice d from channels (2d empty, 2d+1 occupied).
template <typename T>
inline T occupied_probability(T empty_logit, T occupied_logit) {
  const T d = empty_logit - occupied_logit;
  return d >= T(0) ? std::exp(-d) / (T(1) + std::exp(-d)) : T(1) / (T(1) + std::exp(d));
}

/// Mean two-way cross-entropy over all voxels. `labels` is (N, D, H, W)
/// with 0 = empty, 1 = occupied; logits are (N, 2D, H, W). Writes the
/// gradient into `grad` when non-null.
template <typename T>
double softmax_cross_entropy(const Tensor<T>& logits, const std::vector<std::uint8_t>& labels, Tensor<T>* grad) {
  const int slices = logits.c / 2;
  if (logits.c % 2 || labels.size() != static_cast<std::size_t>(logits.n) * slices * logits.plane())
    throw Error("loss: logits " + logits.shape_string() + " do not match labels");
  if (grad) *grad = Tensor<T>(logits.n, logits.c, logits.h, logits.w);
  const std::size_t p = logits.plane();
  const double count = static_cast<double>(labels.size());
  double total = 0.0;
  for (int b = 0; b < logits.n; ++b)
    for (int d = 0; d < slices; ++d) {
      const T* e = logits.data.data() + logits.index(b, 2 * d, 0, 0);
      const T* o = logits.data.data() + logits.index(b, 2 * d + 1, 0, 0);
      const std::uint8_t* lab = labels.data() + (static_cast<std::size_t>(b) * slices + d) * p;
      for (std::size_t i = 0; i < p; ++i) {
        // -log softmax of the true class, via softplus of the logit gap.
        const double gap = lab[i] ? static_cast<double>(e[i]) - o[i] : static_cast<double>(o[i]) - e[i];
        total += gap > 0 ? gap + std::log1p(std::exp(-gap)) : std::log1p(std::exp(gap));
        if (grad) {
          const double po = static_cast<double>(occupied_probability(e[i], o[i]));
          const double go = (po - (lab[i] ? 1.0 : 0.0)) / count;
          grad->data[grad->index(b, 2 * d + 1, 0, 0) + i] = static_cast<T>(go);
          grad->data[grad->index(b, 2 * d, 0, 0) + i] = static_cast<T>(-go);
        }
      }
    }
  return total / count;
}

}  // namespace voxsketch::nn
