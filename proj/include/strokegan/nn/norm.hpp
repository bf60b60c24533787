#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include "strokegan/tensor.hpp"

namespace strokegan::nn {

enum class Mode { Train, Inference };

/// Per-channel batch normalization over (N, H, W).
template <typename T>
struct BatchNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;

  static BatchNormParams make(std::size_t channels) {
    return {Tensor<T>({channels}, T(1)), Tensor<T>({channels}, T(0)), Tensor<T>({channels}, T(0)),
            Tensor<T>({channels}, T(1))};
  }
  std::size_t channels() const { return gamma.size(); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gamma", gamma);
    f(prefix + ".beta", beta);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    f(prefix + ".gamma", gamma);
    f(prefix + ".beta", beta);
  }
  template <typename F>
  void visit_buffers(const std::string& prefix, F&& f) {
    f(prefix + ".running_mean", running_mean);
    f(prefix + ".running_var", running_var);
  }
  template <typename F>
  void visit_buffers(const std::string& prefix, F&& f) const {
    f(prefix + ".running_mean", running_mean);
    f(prefix + ".running_var", running_var);
  }
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormCache {
  Mode mode = Mode::Train;
  Tensor<T> normalized;
  std::vector<T> inv_std;
};

/// In training mode normalizes with batch statistics and folds them into the
/// running estimates (the only state a forward pass mutates).
template <typename T>
Tensor<T> batchnorm_forward(BatchNormParams<T>& p, const Tensor<T>& x, Mode mode,
                            std::type_identity_t<BatchNormCache<T>>* cache = nullptr) {
  require_rank4(x, "batchnorm");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (c != p.channels()) throw Error(ErrorKind::ShapeMismatch, "batchnorm channels " + x.describe());
  const T eps = static_cast<T>(kBatchNormEps);
  Tensor<T> y(x.shape());
  Tensor<T> xhat(x.shape());
  std::vector<T> inv_std(c);
  const std::size_t m = n * hw;
  for (std::size_t ch = 0; ch < c; ++ch) {
    T mean, var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* plane = x.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) sum += plane[j];
      }
      const double mu = sum / static_cast<double>(m);
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* plane = x.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          const double d = plane[j] - mu;
          sq += d * d;
        }
      }
      mean = static_cast<T>(mu);
      var = static_cast<T>(sq / static_cast<double>(m));
      const T unbiased = m > 1 ? static_cast<T>(sq / static_cast<double>(m - 1)) : var;
      const T mom = static_cast<T>(kBatchNormMomentum);
      p.running_mean[ch] = (T(1) - mom) * p.running_mean[ch] + mom * mean;
      p.running_var[ch] = (T(1) - mom) * p.running_var[ch] + mom * unbiased;
    } else {
      mean = p.running_mean[ch];
      var = p.running_var[ch];
    }
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[ch] = is;
    const T g = p.gamma[ch], b = p.beta[ch];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const T h = (x[off + j] - mean) * is;
        xhat[off + j] = h;
        y[off + j] = g * h + b;
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
Tensor<T> batchnorm_forward(const BatchNormParams<T>& p, const Tensor<T>& x) {
  BatchNormParams<T> copy = p;
  return batchnorm_forward(copy, x, Mode::Inference, nullptr);
}

template <typename T>
Tensor<T> batchnorm_backward(const BatchNormParams<T>& p, const BatchNormCache<T>& cache, const Tensor<T>& dy,
                             BatchNormParams<T>& grads) {
  const std::size_t n = dy.dim(0), c = dy.dim(1), hw = dy.dim(2) * dy.dim(3);
  const std::size_t m = n * hw;
  Tensor<T> dx(dy.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    T sum_dy = 0, sum_dy_xhat = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        sum_dy += dy[off + j];
        sum_dy_xhat += dy[off + j] * cache.normalized[off + j];
      }
    }
    grads.beta[ch] += sum_dy;
    grads.gamma[ch] += sum_dy_xhat;
    const T scale = p.gamma[ch] * cache.inv_std[ch];
    if (cache.mode == Mode::Inference) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) dx[off + j] = scale * dy[off + j];
      }
      continue;
    }
    const T mean_dy = sum_dy / static_cast<T>(m);
    const T mean_dy_xhat = sum_dy_xhat / static_cast<T>(m);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        dx[off + j] = scale * (dy[off + j] - mean_dy - cache.normalized[off + j] * mean_dy_xhat);
      }
    }
  }
  return dx;
}

}  // namespace strokegan::nn
