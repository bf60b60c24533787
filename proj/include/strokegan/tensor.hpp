#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "strokegan/error.hpp"

namespace strokegan {

/// 64-byte aligned storage. Eigen kernels pick their vectorized paths by
/// pointer alignment, so fixing it makes results independent of where the
/// allocator happens to place a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major tensor. Image batches use NCHW layout.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0))
      : shape_(std::move(shape)), data_(count(shape_), fill) {}
  Tensor(std::initializer_list<std::size_t> shape, T fill = T(0))
      : Tensor(std::vector<std::size_t>(shape), fill) {}

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  AlignedVector<T>& storage() noexcept { return data_; }
  const AlignedVector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  void reshape(std::vector<std::size_t> shape) {
    if (count(shape) != data_.size()) {
      throw Error(ErrorKind::ShapeMismatch, "reshape " + describe() + " -> " + describe(shape));
    }
    shape_ = std::move(shape);
  }

  /// Rows [begin, end) along the leading dimension.
  Tensor slice(std::size_t begin, std::size_t end) const {
    std::vector<std::size_t> s = shape_;
    s[0] = end - begin;
    Tensor out(s);
    const std::size_t stride = size() / shape_[0];
    std::copy(data_.begin() + begin * stride, data_.begin() + end * stride, out.data_.begin());
    return out;
  }

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  std::string describe() const { return describe(shape_); }

  static std::string describe(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << ')';
    return os.str();
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  AlignedVector<T> data_;
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": " + a.describe() + " vs " + b.describe());
  }
}

template <typename T>
void require_rank4(const Tensor<T>& t, const char* what) {
  if (t.rank() != 4) throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": expected NCHW, got " + t.describe());
}

/// Stack equally shaped single images (1×C×H×W or C×H×W) into a batch.
template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> items) {
  if (items.empty()) throw Error(ErrorKind::ShapeMismatch, "stack of zero tensors");
  std::vector<std::size_t> inner = items.front().shape();
  if (inner.size() == 4 && inner[0] == 1) inner.erase(inner.begin());
  std::vector<std::size_t> shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor<T> out(shape);
  const std::size_t stride = Tensor<T>::count(inner);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].size() != stride) throw Error(ErrorKind::ShapeMismatch, "stack: ragged inputs");
    std::copy(items[i].data(), items[i].data() + stride, out.data() + i * stride);
  }
  return out;
}

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t) {
  Tensor<To> out(t.shape());
  std::transform(t.data(), t.data() + t.size(), out.data(), [](From v) { return static_cast<To>(v); });
  return out;
}

}  // namespace strokegan
