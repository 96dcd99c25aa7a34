#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "voxsketch/common.hpp"

namespace voxsketch::nn {

/// Dense NCHW tensor.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t index(int b, int ch, int y, int x) const {
    return ((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x;
  }
  T& at(int b, int ch, int y, int x) { return data[index(b, ch, y, x)]; }
  T at(int b, int ch, int y, int x) const { return data[index(b, ch, y, x)]; }
  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  std::string shape_string() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

/// Channel concatenation of equal-sized tensors.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw Error("concat: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
  const std::size_t pa = a.c * a.plane(), pb = b.c * b.plane();
  for (int i = 0; i < a.n; ++i) {
    std::copy_n(a.data.begin() + i * pa, pa, out.data.begin() + i * (pa + pb));
    std::copy_n(b.data.begin() + i * pb, pb, out.data.begin() + i * (pa + pb) + pa);
  }
  return out;
}

/// Inverse of concat_channels for gradients: splits off the first `ca` channels.
template <typename T>
void split_channels(const Tensor<T>& g, int ca, Tensor<T>& ga, Tensor<T>& gb) {
  ga = Tensor<T>(g.n, ca, g.h, g.w);
  gb = Tensor<T>(g.n, g.c - ca, g.h, g.w);
  const std::size_t pa = ga.c * g.plane(), pb = gb.c * g.plane();
  for (int i = 0; i < g.n; ++i) {
    std::copy_n(g.data.begin() + i * (pa + pb), pa, ga.data.begin() + i * pa);
    std::copy_n(g.data.begin() + i * (pa + pb) + pa, pb, gb.data.begin() + i * pb);
  }
}

}  // namespace voxsketch::nn
