#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "strokegan/model.hpp"

namespace strokegan {

struct AdamHyper {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam step on a flat parameter block; `step` is the 1-based update
/// count after this update.
template <typename T>
void adam_update(std::span<T> weights, std::span<const T> grads, std::span<T> m, std::span<T> v, std::uint64_t step,
                 double lr, const AdamHyper& h) {
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double g = grads[i];
    const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * g;
    const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + h.eps);
    weights[i] = static_cast<T>(weights[i] - update);
  }
}

/// Adam moments for one parameter tree.
template <typename Params>
struct AdamState {
  Params m;
  Params v;
  std::uint64_t step = 0;

  static AdamState like(const Params& p) { return {zeros_like(p), zeros_like(p), 0}; }

  template <typename T>
  void apply(Params& params, const Params& grads, double lr, const AdamHyper& h) {
    ++step;
    std::vector<Tensor<T>*> w, mm, vv;
    std::vector<const Tensor<T>*> g;
    params.visit([&](const std::string&, Tensor<T>& t) { w.push_back(&t); });
    m.visit([&](const std::string&, Tensor<T>& t) { mm.push_back(&t); });
    v.visit([&](const std::string&, Tensor<T>& t) { vv.push_back(&t); });
    grads.visit([&](const std::string&, const Tensor<T>& t) { g.push_back(&t); });
    for (std::size_t i = 0; i < w.size(); ++i) {
      adam_update<T>(w[i]->values(), g[i]->values(), mm[i]->values(), vv[i]->values(), step, lr, h);
    }
  }
};

}  // namespace strokegan
