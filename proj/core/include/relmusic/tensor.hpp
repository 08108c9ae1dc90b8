// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensor. Storage order is fixed: the skew transforms rely on
// reshape being a pure reinterpretation of the flat buffer.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relmusic/alloc_meter.hpp"
#include "relmusic/errors.hpp"

namespace relmusic {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{})
      : shape_(std::move(shape)),
        data_(shape_numel(shape_), fill),
        charge_(data_.size() * sizeof(T)) {}

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_str(shape_));
    }
    charge_ = detail::Charge(data_.size() * sizeof(T));
  }

  /// 2-D literal: BasicTensor<double>::matrix({{1, 2}, {3, 4}}).
  static BasicTensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<T> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return BasicTensor({r, c}, std::move(data));
  }

  BasicTensor(const BasicTensor& other)
      : shape_(other.shape_), data_(other.data_), charge_(data_.size() * sizeof(T)) {}

  BasicTensor& operator=(const BasicTensor& other) {
    if (this != &other) {
      BasicTensor copy(other);
      *this = std::move(copy);
    }
    return *this;
  }

  BasicTensor(BasicTensor&&) noexcept = default;
  BasicTensor& operator=(BasicTensor&&) noexcept = default;

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t dim) const {
    if (dim >= shape_.size()) throw BoundsError("dimension " + std::to_string(dim) + " out of range");
    return shape_[dim];
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t rows() const { return require_matrix(), shape_[0]; }
  std::size_t cols() const { return require_matrix(), shape_[1]; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Unchecked 2-D access.
  T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * shape_[1] + j]; }

  /// Unchecked 3-D access.
  T& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Bounds-checked access for any rank.
  const T& at(std::initializer_list<std::size_t> index) const { return data_[offset_of(index)]; }
  T& at(std::initializer_list<std::size_t> index) { return data_[offset_of(index)]; }

  std::span<T> row(std::size_t i) { return {data_.data() + i * cols(), cols()}; }
  std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols(), cols()}; }

  /// Reinterprets the flat buffer under a new shape; no data moves.
  void reshape_inplace(Shape new_shape) {
    if (shape_numel(new_shape) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(new_shape));
    }
    shape_ = std::move(new_shape);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const BasicTensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  void require_matrix() const {
    if (shape_.size() != 2) throw DimensionError("expected a matrix, got shape " + shape_str(shape_));
  }

  std::size_t offset_of(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size()) throw BoundsError("index rank mismatch for " + shape_str(shape_));
    std::size_t off = 0;
    std::size_t d = 0;
    for (std::size_t i : index) {
      if (i >= shape_[d]) {
        throw BoundsError("index " + std::to_string(i) + " out of range for dim " + std::to_string(d) +
                          " of " + shape_str(shape_));
      }
      off = off * shape_[d] + i;
      ++d;
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
  detail::Charge charge_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;
using Mask = BasicTensor<unsigned char>;

}  // namespace relmusic
