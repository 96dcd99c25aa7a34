#pragma once

#include <cmath>
#include <vector>

#include "voxsketch/common.hpp"
#include "voxsketch/nn/layers.hpp"

namespace voxsketch::nn {

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 2e-4;

  void validate() const {
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
      throw Error("adam: betas must lie in (0, 1)");
    if (!(lr > 0.0)) throw Error("adam: learning rate must be positive");
    if (!(eps > 0.0)) throw Error("adam: epsilon must be positive");
  }
};

/// One bias-corrected Adam update at step t >= 1. Gradients are left untouched.
template <typename T>
void adam_step(const std::vector<Param<T>*>& params, const AdamConfig& cfg, long t) {
  if (t < 1) throw Error("adam: step index must be >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (Param<T>* p : params)
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double g = p->grad[i];
      const double m = cfg.beta1 * p->m[i] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * p->v[i] + (1.0 - cfg.beta2) * g * g;
      p->m[i] = static_cast<T>(m);
      p->v[i] = static_cast<T>(v);
      p->value[i] -= static_cast<T>(cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps));
    }
}

}  // namespace voxsketch::nn
