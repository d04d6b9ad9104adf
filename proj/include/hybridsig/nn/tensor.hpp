#pragma once

#include <Eigen/Core>

#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybridsig::nn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s + ")";
}

/// Dense row-major N-d array. Activations use H x W x C layout.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), values_(Vector::Zero(shape_size(shape_))) {}
  Tensor(Shape shape, Vector values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_size(shape_)) throw std::invalid_argument("Tensor: data length does not match shape");
  }

  const Shape& shape() const { return shape_; }
  Index dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  Index size() const { return values_.size(); }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }
  Scalar& operator[](Index i) { return values_[i]; }
  const Scalar& operator[](Index i) const { return values_[i]; }

  /// Row-major matrix view of the flat buffer.
  Eigen::Map<RowMatrix<Scalar>> matrix(Index rows, Index cols) {
    check_view(rows, cols);
    return {values_.data(), rows, cols};
  }
  Eigen::Map<const RowMatrix<Scalar>> matrix(Index rows, Index cols) const {
    check_view(rows, cols);
    return {values_.data(), rows, cols};
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), values_); }

  template <typename To>
  Tensor<To> cast() const {
    return Tensor<To>(shape_, values_.template cast<To>());
  }

  void set_zero() { values_.setZero(); }

 private:
  void check_view(Index rows, Index cols) const {
    if (rows * cols != values_.size()) throw std::invalid_argument("Tensor: matrix view does not cover buffer");
  }

  Shape shape_;
  Vector values_;
};

template <typename Scalar>
void require_shape(const Tensor<Scalar>& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw std::invalid_argument(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                                shape_string(t.shape()));
  }
}

}  // namespace hybridsig::nn
