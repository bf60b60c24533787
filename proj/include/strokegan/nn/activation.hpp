#pragma once

#include <cmath>
#include <cstddef>

#include "strokegan/tensor.hpp"

namespace strokegan::nn {

inline constexpr double kLeakySlope = 0.2;

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

// Backward passes take the activation output; it encodes everything needed.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
  return dx;
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x) {
  const T slope = static_cast<T>(kLeakySlope);
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
  return y;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  const T slope = static_cast<T>(kLeakySlope);
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = y[i] > T(0) ? dy[i] : slope * dy[i];
  return dx;
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * (T(1) - y[i] * y[i]);
  return dx;
}

template <typename T>
T sigmoid(T v) {
  return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * y[i] * (T(1) - y[i]);
  return dx;
}

/// N×C×H×W → N×C mean over the spatial grid.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_rank4(x, "global_avg_pool");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> y({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    T acc = 0;
    for (std::size_t j = 0; j < hw; ++j) acc += x[i * hw + j];
    y[i] = acc / static_cast<T>(hw);
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const std::vector<std::size_t>& input_shape, const Tensor<T>& dy) {
  Tensor<T> dx(input_shape);
  const std::size_t hw = input_shape[2] * input_shape[3];
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const T g = dy[i] / static_cast<T>(hw);
    for (std::size_t j = 0; j < hw; ++j) dx[i * hw + j] = g;
  }
  return dx;
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace strokegan::nn
