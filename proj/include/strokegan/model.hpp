#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "strokegan/nn/unit.hpp"

namespace strokegan {

using nn::Activation;
using nn::ConvSpec;
using nn::ConvUnit;
using nn::ConvUnitCache;
using nn::Mode;

inline constexpr std::size_t kStrokeDims = 32;
inline constexpr std::size_t kResidualBlocks = 9;
inline constexpr std::size_t kDiscriminatorHidden = 6;

/// Width of the first layer of each network; every other width is a fixed
/// multiple of it (generator 1×, 2×; discriminator 1×, 2×, 4×, 8×, 8×, 8×).
struct ModelShape {
  std::size_t generator_base = 64;
  std::size_t discriminator_base = 64;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

// ---------------------------------------------------------------------------
// Generator: 2 strided convs, 9 residual blocks of 2 convs, 2 transposed convs.

template <typename T>
struct ResidualBlock {
  ConvUnit<T> first;
  ConvUnit<T> second;
};

template <typename T>
struct GeneratorParams {
  std::array<ConvUnit<T>, 2> down;
  std::array<ResidualBlock<T>, kResidualBlocks> blocks;
  ConvUnit<T> up;
  ConvUnit<T> out;

  static GeneratorParams make(std::size_t base) {
    GeneratorParams g;
    const std::size_t wide = 2 * base;
    g.down[0] = ConvUnit<T>::make({1, base, 4, 2, 1}, false, true, Activation::Relu);
    g.down[1] = ConvUnit<T>::make({base, wide, 4, 2, 1}, false, true, Activation::Relu);
    for (auto& b : g.blocks) {
      b.first = ConvUnit<T>::make({wide, wide, 3, 1, 1}, false, true, Activation::Relu);
      b.second = ConvUnit<T>::make({wide, wide, 3, 1, 1}, false, true, Activation::None);
    }
    g.up = ConvUnit<T>::make({wide, base, 4, 2, 1}, true, true, Activation::Relu);
    g.out = ConvUnit<T>::make({base, 1, 4, 2, 1}, true, false, Activation::Tanh);
    return g;
  }

  template <typename Self, typename F>
  static void visit_units(Self& self, F&& f) {
    f("down0", self.down[0]);
    f("down1", self.down[1]);
    for (std::size_t i = 0; i < kResidualBlocks; ++i) {
      f("res" + std::to_string(i) + ".a", self.blocks[i].first);
      f("res" + std::to_string(i) + ".b", self.blocks[i].second);
    }
    f("up0", self.up);
    f("up1", self.out);
  }

  /// Trainable tensors in a fixed order: (name, tensor).
  template <typename F>
  void visit(F&& f) {
    visit_units(*this, [&](const std::string& name, auto& u) { u.visit(name, f); });
  }
  template <typename F>
  void visit(F&& f) const {
    visit_units(*this, [&](const std::string& name, const auto& u) { u.visit(name, f); });
  }
  /// Batch-norm running statistics.
  template <typename F>
  void visit_buffers(F&& f) {
    visit_units(*this, [&](const std::string& name, auto& u) { u.visit_buffers(name, f); });
  }
  template <typename F>
  void visit_buffers(F&& f) const {
    visit_units(*this, [&](const std::string& name, const auto& u) { u.visit_buffers(name, f); });
  }

  std::size_t conv_layer_count() const {
    std::size_t n = 0;
    visit_units(*this, [&](const std::string&, const auto&) { ++n; });
    return n;
  }
};

template <typename T>
struct GeneratorTrace {
  std::array<ConvUnitCache<T>, 2> down;
  std::array<std::array<ConvUnitCache<T>, 2>, kResidualBlocks> blocks;
  ConvUnitCache<T> up;
  ConvUnitCache<T> out;
};

inline void require_generator_input(const std::vector<std::size_t>& shape) {
  if (shape.size() != 4 || shape[1] != 1 || shape[2] % 4 != 0 || shape[3] % 4 != 0 || shape[2] < 4 ||
      shape[3] < 4) {
    throw Error(ErrorKind::ShapeMismatch,
                "generator expects B×1×H×W with H, W divisible by 4, got " + Tensor<float>::describe(shape));
  }
}

/// Training mode updates batch-norm running statistics; pass `trace` to keep
/// the activations needed by `generator_backward`.
template <typename T>
Tensor<T> generator_forward(GeneratorParams<T>& g, const Tensor<T>& x, Mode mode,
                            std::type_identity_t<GeneratorTrace<T>>* trace = nullptr) {
  require_generator_input(x.shape());
  Tensor<T> h = nn::unit_forward(g.down[0], x, mode, trace ? &trace->down[0] : nullptr);
  h = nn::unit_forward(g.down[1], h, mode, trace ? &trace->down[1] : nullptr);
  for (std::size_t i = 0; i < kResidualBlocks; ++i) {
    Tensor<T> r = nn::unit_forward(g.blocks[i].first, h, mode, trace ? &trace->blocks[i][0] : nullptr);
    r = nn::unit_forward(g.blocks[i].second, r, mode, trace ? &trace->blocks[i][1] : nullptr);
    nn::add_inplace(r, h);
    h = std::move(r);
  }
  h = nn::unit_forward(g.up, h, mode, trace ? &trace->up : nullptr);
  return nn::unit_forward(g.out, h, mode, trace ? &trace->out : nullptr);
}

/// Inference-mode forward pass; never mutates the parameters.
template <typename T>
Tensor<T> generator_forward(const GeneratorParams<T>& g, const Tensor<T>& x) {
  return generator_forward<T>(const_cast<GeneratorParams<T>&>(g), x, Mode::Inference, nullptr);
}

template <typename T>
Tensor<T> generator_backward(const GeneratorParams<T>& g, const GeneratorTrace<T>& trace, const Tensor<T>& dy,
                             GeneratorParams<T>& grads) {
  Tensor<T> d = nn::unit_backward(g.out, trace.out, dy, grads.out);
  d = nn::unit_backward(g.up, trace.up, d, grads.up);
  for (std::size_t i = kResidualBlocks; i-- > 0;) {
    Tensor<T> skip = d;
    d = nn::unit_backward(g.blocks[i].second, trace.blocks[i][1], d, grads.blocks[i].second);
    d = nn::unit_backward(g.blocks[i].first, trace.blocks[i][0], d, grads.blocks[i].first);
    nn::add_inplace(d, skip);
  }
  d = nn::unit_backward(g.down[1], trace.down[1], d, grads.down[1]);
  return nn::unit_backward(g.down[0], trace.down[0], d, grads.down[0]);
}

// ---------------------------------------------------------------------------
// Discriminator: 6 hidden convs (3 stride-2 4×4, then 3 stride-1 3×3), then a
// realism head (conv → 1 channel, sigmoid) and a stroke head (conv → 32
// channels, global average pool, sigmoid). For an H×W input the realism map is
// (H/8)×(W/8).

template <typename T>
struct DiscriminatorParams {
  std::array<ConvUnit<T>, kDiscriminatorHidden> hidden;
  ConvUnit<T> realism;
  ConvUnit<T> stroke;

  static DiscriminatorParams make(std::size_t base) {
    DiscriminatorParams d;
    const std::array<std::size_t, kDiscriminatorHidden> widths{base, 2 * base, 4 * base, 8 * base, 8 * base, 8 * base};
    std::size_t in = 1;
    for (std::size_t i = 0; i < kDiscriminatorHidden; ++i) {
      const ConvSpec spec = i < 3 ? ConvSpec{in, widths[i], 4, 2, 1} : ConvSpec{in, widths[i], 3, 1, 1};
      d.hidden[i] = ConvUnit<T>::make(spec, false, true, Activation::Leaky);
      in = widths[i];
    }
    d.realism = ConvUnit<T>::make({in, 1, 3, 1, 1}, false, false, Activation::Sigmoid);
    d.stroke = ConvUnit<T>::make({in, kStrokeDims, 3, 1, 1}, false, false, Activation::None);
    return d;
  }

  template <typename Self, typename F>
  static void visit_units(Self& self, F&& f) {
    for (std::size_t i = 0; i < kDiscriminatorHidden; ++i) f("hidden" + std::to_string(i), self.hidden[i]);
    f("realism", self.realism);
    f("stroke", self.stroke);
  }
  template <typename F>
  void visit(F&& f) {
    visit_units(*this, [&](const std::string& name, auto& u) { u.visit(name, f); });
  }
  template <typename F>
  void visit(F&& f) const {
    visit_units(*this, [&](const std::string& name, const auto& u) { u.visit(name, f); });
  }
  template <typename F>
  void visit_buffers(F&& f) {
    visit_units(*this, [&](const std::string& name, auto& u) { u.visit_buffers(name, f); });
  }
  template <typename F>
  void visit_buffers(F&& f) const {
    visit_units(*this, [&](const std::string& name, const auto& u) { u.visit_buffers(name, f); });
  }
};

/// Realism-map size for an input side length, by conv arithmetic over the
/// stride plan.
template <typename T>
std::size_t realism_map_size(const DiscriminatorParams<T>& d, std::size_t side) {
  for (const auto& u : d.hidden) side = u.out_size(side);
  return d.realism.out_size(side);
}

template <typename T>
struct DiscriminatorOutput {
  Tensor<T> realism;  // B×1×h×w, values in (0, 1)
  Tensor<T> stroke;   // B×32, values in (0, 1)
};

template <typename T>
struct DiscriminatorTrace {
  std::array<ConvUnitCache<T>, kDiscriminatorHidden> hidden;
  ConvUnitCache<T> realism;
  ConvUnitCache<T> stroke;
  std::vector<std::size_t> stroke_map_shape;
  Tensor<T> stroke_out;
};

template <typename T>
DiscriminatorOutput<T> discriminator_forward(DiscriminatorParams<T>& d, const Tensor<T>& x, Mode mode,
                                             std::type_identity_t<DiscriminatorTrace<T>>* trace = nullptr) {
  if (x.rank() != 4 || x.dim(1) != 1) {
    throw Error(ErrorKind::ShapeMismatch, "discriminator expects B×1×H×W, got " + x.describe());
  }
  if (realism_map_size(d, x.dim(2)) == 0 || realism_map_size(d, x.dim(3)) == 0) {
    throw Error(ErrorKind::ShapeMismatch, "discriminator input too small: " + x.describe());
  }
  Tensor<T> h = x;
  for (std::size_t i = 0; i < kDiscriminatorHidden; ++i) {
    h = nn::unit_forward(d.hidden[i], h, mode, trace ? &trace->hidden[i] : nullptr);
  }
  DiscriminatorOutput<T> out;
  out.realism = nn::unit_forward(d.realism, h, mode, trace ? &trace->realism : nullptr);
  Tensor<T> map = nn::unit_forward(d.stroke, h, mode, trace ? &trace->stroke : nullptr);
  out.stroke = nn::sigmoid(nn::global_avg_pool(map));
  if (trace) {
    trace->stroke_map_shape = map.shape();
    trace->stroke_out = out.stroke;
  }
  return out;
}

template <typename T>
DiscriminatorOutput<T> discriminator_forward(const DiscriminatorParams<T>& d, const Tensor<T>& x) {
  return discriminator_forward<T>(const_cast<DiscriminatorParams<T>&>(d), x, Mode::Inference, nullptr);
}

/// Either upstream gradient may be empty, meaning that head does not
/// contribute to the loss.
template <typename T>
Tensor<T> discriminator_backward(const DiscriminatorParams<T>& d, const DiscriminatorTrace<T>& trace,
                                 const Tensor<T>& d_realism, const Tensor<T>& d_stroke,
                                 DiscriminatorParams<T>& grads) {
  Tensor<T> g;
  if (!d_realism.empty()) g = nn::unit_backward(d.realism, trace.realism, d_realism, grads.realism);
  if (!d_stroke.empty()) {
    Tensor<T> pooled = nn::sigmoid_backward(trace.stroke_out, d_stroke);
    Tensor<T> map_grad = nn::global_avg_pool_backward(trace.stroke_map_shape, pooled);
    Tensor<T> gs = nn::unit_backward(d.stroke, trace.stroke, map_grad, grads.stroke);
    if (g.empty()) {
      g = std::move(gs);
    } else {
      nn::add_inplace(g, gs);
    }
  }
  if (g.empty()) g = Tensor<T>(trace.realism.input.shape());
  for (std::size_t i = kDiscriminatorHidden; i-- > 0;) {
    g = nn::unit_backward(d.hidden[i], trace.hidden[i], g, grads.hidden[i]);
  }
  return g;
}

// ---------------------------------------------------------------------------

/// Same structure as `params` with every trainable tensor zeroed; used as a
/// gradient accumulator.
template <typename Params>
Params zeros_like(const Params& params) {
  Params z = params;
  z.visit([](const std::string&, auto& t) { t.fill(0); });
  return z;
}

template <typename Params>
std::size_t parameter_count(const Params& params) {
  std::size_t n = 0;
  params.visit([&](const std::string&, const auto& t) { n += t.size(); });
  return n;
}

template <typename T>
struct ModelParams {
  GeneratorParams<T> generator;
  DiscriminatorParams<T> discriminator;
};

/// Conv weights ~ N(0, 0.02²), norm scales 1, biases 0. Deterministic in
/// `seed`.
template <typename T>
ModelParams<T> init_params(std::uint64_t seed, const ModelShape& shape = {}) {
  ModelParams<T> m{GeneratorParams<T>::make(shape.generator_base),
                   DiscriminatorParams<T>::make(shape.discriminator_base)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto init = [&](const std::string& name, Tensor<T>& t) {
    if (name.ends_with(".weight")) {
      for (auto& v : t.values()) v = static_cast<T>(normal(rng));
    }
  };
  m.generator.visit(init);
  m.discriminator.visit(init);
  return m;
}

}  // namespace strokegan
