#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>

#include "strokegan/tensor.hpp"

namespace strokegan::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;

  /// k·k·c_in·c_out weights plus one bias per output channel.
  std::size_t parameter_count() const { return kernel * kernel * in_channels * out_channels + out_channels; }

  std::size_t conv_out(std::size_t in) const {
    if (in + 2 * padding < kernel) return 0;
    return (in + 2 * padding - kernel) / stride + 1;
  }
  std::size_t deconv_out(std::size_t in) const { return (in - 1) * stride + kernel - 2 * padding; }

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

namespace detail {

// cols is (C·k·k) × (out_h·out_w); image is C × in_h × in_w.
template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t in_h, std::size_t in_w, const ConvSpec& s,
            std::size_t out_h, std::size_t out_w, T* cols) {
  const std::size_t k = s.kernel;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(s.padding);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = image + c * in_h * in_w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = cols + ((c * k + ky) * k + kx) * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s.stride + ky) - pad;
          T* dst = row + oy * out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) {
            std::fill(dst, dst + out_w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * in_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s.stride + kx) - pad;
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w)) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

// Scatter-add counterpart of im2col; image must be zeroed by the caller.
template <typename T>
void col2im(const T* cols, std::size_t channels, std::size_t in_h, std::size_t in_w, const ConvSpec& s,
            std::size_t out_h, std::size_t out_w, T* image) {
  const std::size_t k = s.kernel;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(s.padding);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = image + c * in_h * in_w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = cols + ((c * k + ky) * k + kx) * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s.stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * in_w;
          const T* src = row + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s.stride + kx) - pad;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(in_w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Weights and bias of a convolution. For `Conv2d` the weight is
/// [out, in, k, k]; for `ConvTranspose2d` it is [in, out, k, k].
template <typename T>
struct ConvParams {
  ConvSpec spec;
  Tensor<T> weight;
  Tensor<T> bias;

  static ConvParams conv(const ConvSpec& s) {
    return {s, Tensor<T>({s.out_channels, s.in_channels, s.kernel, s.kernel}), Tensor<T>({s.out_channels})};
  }
  static ConvParams deconv(const ConvSpec& s) {
    return {s, Tensor<T>({s.in_channels, s.out_channels, s.kernel, s.kernel}), Tensor<T>({s.out_channels})};
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
  template <typename F>
  void visit(const std::string& prefix, F&& f) const {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

template <typename T>
Tensor<T> conv2d_forward(const ConvParams<T>& p, const Tensor<T>& x) {
  require_rank4(x, "conv2d");
  const ConvSpec& s = p.spec;
  if (x.dim(1) != s.in_channels) {
    throw Error(ErrorKind::ShapeMismatch, "conv2d expects " + std::to_string(s.in_channels) + " channels, got " +
                                              x.describe());
  }
  const std::size_t n = x.dim(0), in_h = x.dim(2), in_w = x.dim(3);
  const std::size_t out_h = s.conv_out(in_h), out_w = s.conv_out(in_w);
  if (out_h == 0 || out_w == 0) throw Error(ErrorKind::ShapeMismatch, "conv2d input too small: " + x.describe());
  const std::size_t patch = s.in_channels * s.kernel * s.kernel, positions = out_h * out_w;

  Tensor<T> y({n, s.out_channels, out_h, out_w});
  AlignedVector<T> cols(patch * positions);
  ConstMatrixMap<T> w(p.weight.data(), s.out_channels, patch);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bias(p.bias.data(), s.out_channels);
  for (std::size_t i = 0; i < n; ++i) {
    detail::im2col(x.data() + i * s.in_channels * in_h * in_w, s.in_channels, in_h, in_w, s, out_h, out_w,
                   cols.data());
    MatrixMap<T> out(y.data() + i * s.out_channels * positions, s.out_channels, positions);
    out.noalias() = w * ConstMatrixMap<T>(cols.data(), patch, positions);
    out.colwise() += bias;
  }
  return y;
}

/// Accumulates weight/bias gradients into `grads` and returns dL/dx.
template <typename T>
Tensor<T> conv2d_backward(const ConvParams<T>& p, const Tensor<T>& x, const Tensor<T>& dy, ConvParams<T>& grads) {
  const ConvSpec& s = p.spec;
  const std::size_t n = x.dim(0), in_h = x.dim(2), in_w = x.dim(3);
  const std::size_t out_h = dy.dim(2), out_w = dy.dim(3);
  const std::size_t patch = s.in_channels * s.kernel * s.kernel, positions = out_h * out_w;

  Tensor<T> dx(x.shape());
  AlignedVector<T> cols(patch * positions);
  AlignedVector<T> dcols(patch * positions);
  ConstMatrixMap<T> w(p.weight.data(), s.out_channels, patch);
  MatrixMap<T> dw(grads.weight.data(), s.out_channels, patch);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(grads.bias.data(), s.out_channels);
  for (std::size_t i = 0; i < n; ++i) {
    ConstMatrixMap<T> g(dy.data() + i * s.out_channels * positions, s.out_channels, positions);
    detail::im2col(x.data() + i * s.in_channels * in_h * in_w, s.in_channels, in_h, in_w, s, out_h, out_w,
                   cols.data());
    dw.noalias() += g * ConstMatrixMap<T>(cols.data(), patch, positions).transpose();
    db += g.rowwise().sum();
    MatrixMap<T>(dcols.data(), patch, positions).noalias() = w.transpose() * g;
    detail::col2im(dcols.data(), s.in_channels, in_h, in_w, s, out_h, out_w,
                   dx.data() + i * s.in_channels * in_h * in_w);
  }
  return dx;
}

template <typename T>
Tensor<T> deconv2d_forward(const ConvParams<T>& p, const Tensor<T>& x) {
  require_rank4(x, "deconv2d");
  const ConvSpec& s = p.spec;
  if (x.dim(1) != s.in_channels) {
    throw Error(ErrorKind::ShapeMismatch, "deconv2d expects " + std::to_string(s.in_channels) + " channels, got " +
                                              x.describe());
  }
  const std::size_t n = x.dim(0), in_h = x.dim(2), in_w = x.dim(3);
  const std::size_t out_h = s.deconv_out(in_h), out_w = s.deconv_out(in_w);
  const std::size_t patch = s.out_channels * s.kernel * s.kernel, positions = in_h * in_w;

  Tensor<T> y({n, s.out_channels, out_h, out_w});
  AlignedVector<T> cols(patch * positions);
  ConstMatrixMap<T> w(p.weight.data(), s.in_channels, patch);
  for (std::size_t i = 0; i < n; ++i) {
    MatrixMap<T>(cols.data(), patch, positions).noalias() =
        w.transpose() * ConstMatrixMap<T>(x.data() + i * s.in_channels * positions, s.in_channels, positions);
    T* out = y.data() + i * s.out_channels * out_h * out_w;
    // Transposed convolution is the adjoint of a convolution from the output
    // grid back to the input grid.
    detail::col2im(cols.data(), s.out_channels, out_h, out_w, s, in_h, in_w, out);
    for (std::size_t c = 0; c < s.out_channels; ++c) {
      T* plane = out + c * out_h * out_w;
      for (std::size_t j = 0; j < out_h * out_w; ++j) plane[j] += p.bias[c];
    }
  }
  return y;
}

template <typename T>
Tensor<T> deconv2d_backward(const ConvParams<T>& p, const Tensor<T>& x, const Tensor<T>& dy, ConvParams<T>& grads) {
  const ConvSpec& s = p.spec;
  const std::size_t n = x.dim(0), in_h = x.dim(2), in_w = x.dim(3);
  const std::size_t out_h = dy.dim(2), out_w = dy.dim(3);
  const std::size_t patch = s.out_channels * s.kernel * s.kernel, positions = in_h * in_w;

  Tensor<T> dx(x.shape());
  AlignedVector<T> cols(patch * positions);
  ConstMatrixMap<T> w(p.weight.data(), s.in_channels, patch);
  MatrixMap<T> dw(grads.weight.data(), s.in_channels, patch);
  for (std::size_t i = 0; i < n; ++i) {
    const T* g = dy.data() + i * s.out_channels * out_h * out_w;
    detail::im2col(g, s.out_channels, out_h, out_w, s, in_h, in_w, cols.data());
    ConstMatrixMap<T> gcols(cols.data(), patch, positions);
    ConstMatrixMap<T> xi(x.data() + i * s.in_channels * positions, s.in_channels, positions);
    dw.noalias() += xi * gcols.transpose();
    MatrixMap<T>(dx.data() + i * s.in_channels * positions, s.in_channels, positions).noalias() = w * gcols;
    for (std::size_t c = 0; c < s.out_channels; ++c) {
      const T* plane = g + c * out_h * out_w;
      T acc = 0;
      for (std::size_t j = 0; j < out_h * out_w; ++j) acc += plane[j];
      grads.bias[c] += acc;
    }
  }
  return dx;
}

}  // namespace strokegan::nn
