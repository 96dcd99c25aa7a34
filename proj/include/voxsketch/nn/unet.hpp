#pragma once

#include <memory>
#include <vector>

#include "voxsketch/common.hpp"
#include "voxsketch/nn/layers.hpp"
#include "voxsketch/nn/spec.hpp"

namespace voxsketch::nn {

/// Per-call state of a training forward pass, consumed by backward().
template <typename T>
struct Workspace {
  std::vector<ConvCache<T>> enc_conv;
  std::vector<BatchNormCache<T>> enc_bn;
  std::vector<Tensor<T>> enc_out;
  std::vector<DeconvCache<T>> dec_conv;
  std::vector<BatchNormCache<T>> dec_bn;
  std::vector<std::vector<std::uint8_t>> dec_drop;
  std::vector<Tensor<T>> dec_out;
  int injected_channels = 0;
  bool dropout = false;
};

/// U-net encoder-decoder. The single-view and updater variants differ only
/// in the extra input channels after encoder layer `inject_after`.
template <typename T>
class UNet {
 public:
  explicit UNet(NetworkSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const int L = static_cast<int>(spec_.encoder_channels.size());
    const int M = static_cast<int>(spec_.decoder_channels.size());
    for (int i = 0; i < L; ++i) {
      const std::string name = "enc" + std::to_string(i);
      enc_.emplace_back(name, spec_.encoder_input_channels(i), spec_.encoder_channels[i], false);
      enc_bn_.emplace_back(name + ".bn", i > 0 ? spec_.encoder_channels[i] : 0);
    }
    for (int j = 0; j < M; ++j) {
      const std::string name = "dec" + std::to_string(j);
      const bool last = j == M - 1;
      dec_.emplace_back(name, spec_.decoder_input_channels(j), spec_.decoder_channels[j], last);
      dec_bn_.emplace_back(name + ".bn", last ? 0 : spec_.decoder_channels[j]);
    }
  }

  const NetworkSpec& spec() const { return spec_; }

  /// Kernels ~ N(0, 0.02); batch-norm scale 1, shift 0; biases 0.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (auto* p : params()) {
      if (p->name.ends_with(".weight"))
        for (T& v : p->value) v = static_cast<T>(rng.normal() * 0.02);
      else if (p->name.ends_with(".gamma"))
        std::fill(p->value.begin(), p->value.end(), T(1));
      else
        std::fill(p->value.begin(), p->value.end(), T(0));
      std::fill(p->m.begin(), p->m.end(), T(0));
      std::fill(p->v.begin(), p->v.end(), T(0));
    }
    for (auto* bn : batch_norms()) {
      std::fill(bn->running_mean.begin(), bn->running_mean.end(), T(0));
      std::fill(bn->running_var.begin(), bn->running_var.end(), T(1));
    }
  }

  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (std::size_t i = 0; i < enc_.size(); ++i) {
      for (auto* p : enc_[i].params()) out.push_back(p);
      if (i > 0)
        for (auto* p : enc_bn_[i].params()) out.push_back(p);
    }
    for (std::size_t j = 0; j < dec_.size(); ++j) {
      for (auto* p : dec_[j].params()) out.push_back(p);
      if (j + 1 < dec_.size())
        for (auto* p : dec_bn_[j].params()) out.push_back(p);
    }
    return out;
  }
  std::vector<const Param<T>*> params() const {
    std::vector<const Param<T>*> out;
    for (auto* p : const_cast<UNet*>(this)->params()) out.push_back(p);
    return out;
  }

  std::vector<BatchNorm2d<T>*> batch_norms() {
    std::vector<BatchNorm2d<T>*> out;
    for (std::size_t i = 1; i < enc_bn_.size(); ++i) out.push_back(&enc_bn_[i]);
    for (std::size_t j = 0; j + 1 < dec_bn_.size(); ++j) out.push_back(&dec_bn_[j]);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  /// Training-mode pass: batch statistics, running averages updated, and
  /// dropout when `dropout_rng` is non-null. Returns (N, 2D, D, D) logits.
  Tensor<T> forward_train(const Tensor<T>& x, const Tensor<T>* injected, Rng* dropout_rng,
                          Workspace<T>& ws, bool update_running = true) {
    check_inputs(x, injected);
    const int L = static_cast<int>(enc_.size()), M = static_cast<int>(dec_.size());
    ws.enc_conv.resize(L);
    ws.enc_bn.resize(L);
    ws.enc_out.resize(L);
    ws.dec_conv.resize(M);
    ws.dec_bn.resize(M);
    ws.dec_drop.resize(M);
    ws.dec_out.resize(M);
    ws.injected_channels = injected ? injected->c : 0;
    ws.dropout = dropout_rng != nullptr;
    const T slope = static_cast<T>(spec_.leaky_slope);
    for (int i = 0; i < L; ++i) {
      Tensor<T> z;
      if (i == 0)
        z = enc_[i].forward(x, &ws.enc_conv[i]);
      else if (injected && i == spec_.inject_after + 1)
        z = enc_[i].forward(concat_channels(ws.enc_out[i - 1], *injected), &ws.enc_conv[i]);
      else
        z = enc_[i].forward(ws.enc_out[i - 1], &ws.enc_conv[i]);
      if (i > 0) z = enc_bn_[i].forward(z, true, &ws.enc_bn[i], update_running);
      leaky_relu_inplace(z, slope);
      ws.enc_out[i] = std::move(z);
    }
    const T rate = static_cast<T>(spec_.dropout_rate);
    for (int j = 0; j < M; ++j) {
      Tensor<T> z = dec_[j].forward(decoder_input(j, ws.enc_out, ws.dec_out), &ws.dec_conv[j]);
      if (j == M - 1) return z;
      z = dec_bn_[j].forward(z, true, &ws.dec_bn[j], update_running);
      if (dropout_rng && j < spec_.decoder_dropout) dropout_inplace(z, rate, *dropout_rng, ws.dec_drop[j]);
      leaky_relu_inplace(z, T(0));
      ws.dec_out[j] = std::move(z);
    }
    return {};
  }

  /// Accumulates parameter gradients for the logits gradient `g`. Returns
  /// the gradient with respect to the input drawing; the injected-channel
  /// gradient goes to `injected_grad` when non-null.
  Tensor<T> backward(const Tensor<T>& g_logits, Workspace<T>& ws, Tensor<T>* injected_grad = nullptr) {
    const int L = static_cast<int>(enc_.size()), M = static_cast<int>(dec_.size());
    const T slope = static_cast<T>(spec_.leaky_slope);
    const T rate = static_cast<T>(spec_.dropout_rate);
    std::vector<Tensor<T>> enc_grad(L);
    auto add_enc_grad = [&](int i, Tensor<T>&& g) {
      if (enc_grad[i].data.empty()) {
        enc_grad[i] = std::move(g);
      } else {
        for (std::size_t k = 0; k < g.size(); ++k) enc_grad[i].data[k] += g.data[k];
      }
    };
    Tensor<T> g = g_logits;
    for (int j = M - 1; j >= 0; --j) {
      if (j < M - 1) {
        leaky_relu_backward_inplace(g, ws.dec_out[j], T(0));
        if (ws.dropout && j < spec_.decoder_dropout) dropout_backward_inplace(g, rate, ws.dec_drop[j]);
        g = dec_bn_[j].backward(g, ws.dec_bn[j]);
      }
      Tensor<T> gin = dec_[j].backward(g, ws.dec_conv[j]);
      if (j == 0) {
        add_enc_grad(L - 1, std::move(gin));
      } else {
        const int s = spec_.skip_sources[j - 1];
        if (s >= 0) {
          Tensor<T> gd, gs;
          split_channels(gin, spec_.decoder_channels[j - 1], gd, gs);
          add_enc_grad(s, std::move(gs));
          g = std::move(gd);
        } else {
          g = std::move(gin);
        }
      }
    }
    Tensor<T> gx;
    for (int i = L - 1; i >= 0; --i) {
      Tensor<T> gi = std::move(enc_grad[i]);
      leaky_relu_backward_inplace(gi, ws.enc_out[i], slope);
      if (i > 0) gi = enc_bn_[i].backward(gi, ws.enc_bn[i]);
      Tensor<T> gin = enc_[i].backward(gi, ws.enc_conv[i]);
      if (i == 0) {
        gx = std::move(gin);
      } else if (ws.injected_channels > 0 && i == spec_.inject_after + 1) {
        Tensor<T> ga, gb;
        split_channels(gin, spec_.encoder_channels[i - 1], ga, gb);
        add_enc_grad(i - 1, std::move(ga));
        if (injected_grad) *injected_grad = std::move(gb);
      } else {
        add_enc_grad(i - 1, std::move(gin));
      }
    }
    return gx;
  }

  /// Inference-mode logits: running statistics, no dropout. Safe to call
  /// concurrently on a shared instance.
  Tensor<T> infer_logits(const Tensor<T>& x, const Tensor<T>* injected = nullptr) const {
    check_inputs(x, injected);
    const int L = static_cast<int>(enc_.size()), M = static_cast<int>(dec_.size());
    const T slope = static_cast<T>(spec_.leaky_slope);
    std::vector<Tensor<T>> enc_out(L), dec_out(M);
    for (int i = 0; i < L; ++i) {
      Tensor<T> z;
      if (i == 0)
        z = enc_[i].forward(x, nullptr);
      else if (injected && i == spec_.inject_after + 1)
        z = enc_[i].forward(concat_channels(enc_out[i - 1], *injected), nullptr);
      else
        z = enc_[i].forward(enc_out[i - 1], nullptr);
      if (i > 0) z = enc_bn_[i].infer(z);
      leaky_relu_inplace(z, slope);
      enc_out[i] = std::move(z);
    }
    for (int j = 0; j < M; ++j) {
      Tensor<T> z = dec_[j].forward(decoder_input(j, enc_out, dec_out), nullptr);
      if (j == M - 1) return z;
      z = dec_bn_[j].infer(z);
      leaky_relu_inplace(z, T(0));
      dec_out[j] = std::move(z);
    }
    return {};
  }

  /// Occupancy probabilities (N, D, D, D) from paired-channel softmax.
  Tensor<T> infer(const Tensor<T>& x, const Tensor<T>* injected = nullptr) const {
    return occupancy(infer_logits(x, injected));
  }

  static Tensor<T> occupancy(const Tensor<T>& logits) {
    Tensor<T> out(logits.n, logits.c / 2, logits.h, logits.w);
    const std::size_t p = logits.plane();
    for (int b = 0; b < logits.n; ++b)
      for (int d = 0; d < out.c; ++d) {
        const T* e = logits.data.data() + logits.index(b, 2 * d, 0, 0);
        const T* o = logits.data.data() + logits.index(b, 2 * d + 1, 0, 0);
        T* dst = out.data.data() + out.index(b, d, 0, 0);
        for (std::size_t i = 0; i < p; ++i) dst[i] = occupied_probability(e[i], o[i]);
      }
    return out;
  }

  // Layer access for serialization and tests.
  std::vector<Conv2d<T>>& encoder() { return enc_; }
  std::vector<ConvTranspose2d<T>>& decoder() { return dec_; }

 private:
  void check_inputs(const Tensor<T>& x, const Tensor<T>* injected) const {
    const int r = spec_.input_resolution;
    if (x.c != spec_.input_channels || x.h != r || x.w != r || x.n < 1)
      throw Error("network: input " + x.shape_string() + " does not match " + std::to_string(spec_.input_channels) +
                  "x" + std::to_string(r) + "x" + std::to_string(r));
    if (spec_.updater) {
      if (!injected) throw Error("network: updater requires an injected prediction");
      const int ir = spec_.encoder_resolution(spec_.inject_after);
      if (injected->n != x.n || injected->c != spec_.slices || injected->h != ir || injected->w != ir)
        throw Error("network: injected prediction " + injected->shape_string() + " expected " +
                    std::to_string(x.n) + "x" + std::to_string(spec_.slices) + "x" + std::to_string(ir) + "x" +
                    std::to_string(ir));
    } else if (injected) {
      throw Error("network: single-view network takes no injected prediction");
    }
  }

  Tensor<T> decoder_input(int j, const std::vector<Tensor<T>>& enc_out, const std::vector<Tensor<T>>& dec_out) const {
    if (j == 0) return enc_out.back();
    const int s = spec_.skip_sources[j - 1];
    return s >= 0 ? concat_channels(dec_out[j - 1], enc_out[s]) : dec_out[j - 1];
  }

  NetworkSpec spec_;
  std::vector<Conv2d<T>> enc_;
  std::vector<BatchNorm2d<T>> enc_bn_;
  std::vector<ConvTranspose2d<T>> dec_;
  std::vector<BatchNorm2d<T>> dec_bn_;
};

}  // namespace voxsketch::nn
