#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "strokegan/tensor.hpp"

namespace strokegan {

/// Clamp applied inside every log of the adversarial terms.
inline constexpr double kLogEps = 1e-7;

struct LossWeights {
  double lambda_cyc = 1.0;
  double lambda_stroke = 1.0;
  double lambda_fs3 = 1.0;

  void validate() const {
    for (double w : {lambda_cyc, lambda_stroke, lambda_fs3}) {
      if (!std::isfinite(w) || w < 0.0) throw Error(ErrorKind::InvalidConfig, "loss weights must be finite and >= 0");
    }
  }
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// A scalar loss and its gradient with respect to one input.
template <typename T>
struct LossGrad {
  double value = 0.0;
  Tensor<T> grad;
};

namespace detail {

template <typename T>
void require_probabilities(const Tensor<T>& t, const char* what) {
  for (T v : t.values()) {
    if (!(v >= T(0) && v <= T(1))) {
      throw Error(ErrorKind::DomainError, std::string(what) + " has value outside (0, 1): " + std::to_string(v));
    }
  }
}

inline double clamp_prob(double v) { return std::clamp(v, kLogEps, 1.0 - kLogEps); }
inline bool clamped(double v) { return v < kLogEps || v > 1.0 - kLogEps; }

/// Neumaier-compensated running sum.
class Accumulator {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

/// E[log d_real] + E[log(1 − d_fake)], expectations taken over batch and patch
/// positions. The discriminator ascends this value.
template <typename T>
double adversarial_loss(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
  detail::require_probabilities(d_real, "d_real");
  detail::require_probabilities(d_fake, "d_fake");
  if (d_real.empty() || d_fake.empty()) throw Error(ErrorKind::ShapeMismatch, "empty realism map");
  detail::Accumulator real, fake;
  for (T v : d_real.values()) real.add(std::log(detail::clamp_prob(v)));
  for (T v : d_fake.values()) fake.add(std::log(1.0 - detail::clamp_prob(v)));
  return real.value() / static_cast<double>(d_real.size()) + fake.value() / static_cast<double>(d_fake.size());
}

/// Discriminator objective −L_adv (minimized) with gradients for both maps.
template <typename T>
struct DiscriminatorAdversarial {
  double value = 0.0;
  Tensor<T> grad_real;
  Tensor<T> grad_fake;
};

template <typename T>
DiscriminatorAdversarial<T> discriminator_adversarial(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
  DiscriminatorAdversarial<T> out;
  out.value = -adversarial_loss(d_real, d_fake);
  out.grad_real = Tensor<T>(d_real.shape());
  out.grad_fake = Tensor<T>(d_fake.shape());
  const double nr = static_cast<double>(d_real.size()), nf = static_cast<double>(d_fake.size());
  for (std::size_t i = 0; i < d_real.size(); ++i) {
    const double v = d_real[i];
    out.grad_real[i] = detail::clamped(v) ? T(0) : static_cast<T>(-1.0 / (v * nr));
  }
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    const double v = d_fake[i];
    out.grad_fake[i] = detail::clamped(v) ? T(0) : static_cast<T>(1.0 / ((1.0 - v) * nf));
  }
  return out;
}

enum class GeneratorAdversarialForm { NonSaturating, Saturating };

/// Generator side of the adversarial game. Non-saturating: −E[log d_fake];
/// saturating: E[log(1 − d_fake)].
template <typename T>
LossGrad<T> generator_adversarial(const Tensor<T>& d_fake, GeneratorAdversarialForm form) {
  detail::require_probabilities(d_fake, "d_fake");
  LossGrad<T> out;
  out.grad = Tensor<T>(d_fake.shape());
  const double n = static_cast<double>(d_fake.size());
  detail::Accumulator acc;
  for (std::size_t i = 0; i < d_fake.size(); ++i) {
    const double v = d_fake[i];
    const double c = detail::clamp_prob(v);
    if (form == GeneratorAdversarialForm::NonSaturating) {
      acc.add(-std::log(c));
      out.grad[i] = detail::clamped(v) ? T(0) : static_cast<T>(-1.0 / (v * n));
    } else {
      acc.add(std::log(1.0 - c));
      out.grad[i] = detail::clamped(v) ? T(0) : static_cast<T>(-1.0 / ((1.0 - v) * n));
    }
  }
  out.value = acc.value() / n;
  return out;
}

/// Per-pixel mean |x − x_rec|; gradient is with respect to x_rec.
template <typename T>
LossGrad<T> cycle_loss(const Tensor<T>& x, const Tensor<T>& x_rec) {
  require_same_shape(x, x_rec, "cycle_loss");
  LossGrad<T> out;
  out.grad = Tensor<T>(x.shape());
  const double n = static_cast<double>(x.size());
  detail::Accumulator acc;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x_rec[i]) - static_cast<double>(x[i]);
    acc.add(std::abs(d));
    out.grad[i] = static_cast<T>((d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / n);
  }
  out.value = x.empty() ? 0.0 : acc.value() / n;
  return out;
}

/// Batch mean of ‖predicted_b − target_b‖₂ over 32-dim rows; gradient is with
/// respect to `predicted`.
template <typename T>
LossGrad<T> stroke_loss(const Tensor<T>& predicted, const Tensor<T>& target) {
  require_same_shape(predicted, target, "stroke_loss");
  if (predicted.rank() != 2) throw Error(ErrorKind::ShapeMismatch, "stroke_loss expects B×32, got " + predicted.describe());
  for (T v : target.values()) {
    if (v != T(0) && v != T(1)) throw Error(ErrorKind::InvalidEncoding, "target component " + std::to_string(v));
  }
  const std::size_t rows = predicted.dim(0), dims = predicted.dim(1);
  LossGrad<T> out;
  out.grad = Tensor<T>(predicted.shape());
  detail::Accumulator acc;
  for (std::size_t b = 0; b < rows; ++b) {
    double sq = 0.0;
    for (std::size_t j = 0; j < dims; ++j) {
      const double d = static_cast<double>(predicted[b * dims + j]) - static_cast<double>(target[b * dims + j]);
      sq += d * d;
    }
    const double norm = std::sqrt(sq);
    acc.add(norm);
    if (norm > 0.0) {
      for (std::size_t j = 0; j < dims; ++j) {
        const double d = static_cast<double>(predicted[b * dims + j]) - static_cast<double>(target[b * dims + j]);
        out.grad[b * dims + j] = static_cast<T>(d / (norm * static_cast<double>(rows)));
      }
    }
  }
  out.value = rows ? acc.value() / static_cast<double>(rows) : 0.0;
  return out;
}

/// Per-pixel mean |generated − truth| over the rows flagged in `pair_mask`;
/// zero when no row is flagged. Gradient is with respect to `generated`.
template <typename T>
LossGrad<T> fs3_loss(const Tensor<T>& generated, const Tensor<T>& paired_truth, const std::vector<bool>& pair_mask) {
  require_same_shape(generated, paired_truth, "fs3_loss");
  if (generated.rank() == 0 || pair_mask.size() != generated.dim(0)) {
    throw Error(ErrorKind::ShapeMismatch, "fs3_loss mask length " + std::to_string(pair_mask.size()) + " vs batch " +
                                              generated.describe());
  }
  LossGrad<T> out;
  out.grad = Tensor<T>(generated.shape());
  const std::size_t per_row = generated.size() / generated.dim(0);
  const std::size_t rows = static_cast<std::size_t>(std::count(pair_mask.begin(), pair_mask.end(), true));
  if (rows == 0) return out;
  const double n = static_cast<double>(rows * per_row);
  detail::Accumulator acc;
  for (std::size_t b = 0; b < pair_mask.size(); ++b) {
    if (!pair_mask[b]) continue;
    for (std::size_t j = b * per_row; j < (b + 1) * per_row; ++j) {
      const double d = static_cast<double>(generated[j]) - static_cast<double>(paired_truth[j]);
      acc.add(std::abs(d));
      out.grad[j] = static_cast<T>((d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) / n);
    }
  }
  out.value = acc.value() / n;
  return out;
}

struct LossParts {
  double adversarial = 0.0;
  double cycle = 0.0;
  double stroke = 0.0;
  double fs3 = 0.0;
};

/// Weighted terms in summation order; `total` is their left-to-right sum.
struct LossBreakdown {
  double adversarial = 0.0;
  double cycle = 0.0;
  double stroke = 0.0;
  double fs3 = 0.0;
  double total = 0.0;
};

inline LossBreakdown total_loss(const LossParts& parts, const LossWeights& weights) {
  for (double v : {parts.adversarial, parts.cycle, parts.stroke, parts.fs3}) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteLoss, "loss part is not finite");
  }
  weights.validate();
  LossBreakdown b;
  b.adversarial = parts.adversarial;
  b.cycle = weights.lambda_cyc * parts.cycle;
  b.stroke = weights.lambda_stroke * parts.stroke;
  b.fs3 = weights.lambda_fs3 * parts.fs3;
  b.total = b.adversarial + b.cycle + b.stroke + b.fs3;
  if (!std::isfinite(b.total)) throw Error(ErrorKind::NonFiniteLoss, "total loss is not finite");
  return b;
}

}  // namespace strokegan
