#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "spectgnn/tensor.hpp"

namespace spectgnn {

/// Small dense row-major matrix for non-differentiated linear algebra.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix from_tensor(const Tensor& t);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  Matrix transposed() const;
  Tensor to_tensor(bool requires_grad = false) const;

  /// max_ij |a_ij - b_ij|; shapes must agree.
  double max_abs_diff(const Matrix& other) const;
  /// max_ij |a_ij - a_ji|; infinity for non-square matrices.
  double asymmetry() const;

  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

}  // namespace spectgnn
