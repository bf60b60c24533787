#pragma once

#include <string>
#include <type_traits>

#include "strokegan/nn/activation.hpp"
#include "strokegan/nn/conv.hpp"
#include "strokegan/nn/norm.hpp"

namespace strokegan::nn {

enum class Activation { None, Relu, Leaky, Tanh, Sigmoid };

/// Convolution (or transposed convolution), optional batch norm, activation.
/// Every layer of the generator and discriminator is one of these.
template <typename T>
struct ConvUnit {
  ConvParams<T> conv;
  bool transposed = false;
  bool has_norm = true;
  BatchNormParams<T> norm;
  Activation activation = Activation::None;

  static ConvUnit make(const ConvSpec& spec, bool transposed, bool has_norm, Activation act) {
    ConvUnit u;
    u.conv = transposed ? ConvParams<T>::deconv(spec) : ConvParams<T>::conv(spec);
    u.transposed = transposed;
    u.has_norm = has_norm;
    if (has_norm) u.norm = BatchNormParams<T>::make(spec.out_channels);
    u.activation = act;
    return u;
  }

  std::size_t out_size(std::size_t in) const {
    return transposed ? conv.spec.deconv_out(in) : conv.spec.conv_out(in);
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    conv.visit(prefix + ".conv", f);
    if (has_norm) norm.visit(prefix + ".norm", f);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    conv.visit(prefix + ".conv", f);
    if (has_norm) norm.visit(prefix + ".norm", f);
  }
  template <typename F>
  void visit_buffers(const std::string& prefix, F&& f) {
    if (has_norm) norm.visit_buffers(prefix + ".norm", f);
  }
  template <typename F>
  void visit_buffers(const std::string& prefix, F&& f) const {
    if (has_norm) norm.visit_buffers(prefix + ".norm", f);
  }
};

template <typename T>
struct ConvUnitCache {
  Tensor<T> input;
  BatchNormCache<T> norm;
  Tensor<T> output;
};

template <typename T>
Tensor<T> apply_activation(Activation act, const Tensor<T>& x) {
  switch (act) {
    case Activation::Relu: return relu(x);
    case Activation::Leaky: return leaky_relu(x);
    case Activation::Tanh: return tanh(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::None: break;
  }
  return x;
}

template <typename T>
Tensor<T> activation_backward(Activation act, const Tensor<T>& y, const Tensor<T>& dy) {
  switch (act) {
    case Activation::Relu: return relu_backward(y, dy);
    case Activation::Leaky: return leaky_relu_backward(y, dy);
    case Activation::Tanh: return tanh_backward(y, dy);
    case Activation::Sigmoid: return sigmoid_backward(y, dy);
    case Activation::None: break;
  }
  return dy;
}

template <typename T>
Tensor<T> unit_forward(ConvUnit<T>& u, const Tensor<T>& x, Mode mode,
                       std::type_identity_t<ConvUnitCache<T>>* cache = nullptr) {
  Tensor<T> h = u.transposed ? deconv2d_forward(u.conv, x) : conv2d_forward(u.conv, x);
  if (u.has_norm) h = batchnorm_forward(u.norm, h, mode, cache ? &cache->norm : nullptr);
  Tensor<T> y = apply_activation(u.activation, h);
  if (cache) {
    cache->input = x;
    cache->output = y;
  }
  return y;
}

template <typename T>
Tensor<T> unit_backward(const ConvUnit<T>& u, const ConvUnitCache<T>& cache, const Tensor<T>& dy, ConvUnit<T>& grads) {
  Tensor<T> g = activation_backward(u.activation, cache.output, dy);
  if (u.has_norm) g = batchnorm_backward(u.norm, cache.norm, g, grads.norm);
  return u.transposed ? deconv2d_backward(u.conv, cache.input, g, grads.conv)
                      : conv2d_backward(u.conv, cache.input, g, grads.conv);
}

}  // namespace strokegan::nn
