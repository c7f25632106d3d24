#include "spectgnn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spectgnn/errors.hpp"

namespace spectgnn {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::from_tensor(const Tensor& t) {
  if (t.dim() != 2) throw DimensionError("Matrix::from_tensor: need rank 2, got " + shape_str(t.shape()));
  Matrix m(t.size(0), t.size(1));
  auto d = t.data();
  std::copy(d.begin(), d.end(), m.values_.begin());
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

Tensor Matrix::to_tensor(bool requires_grad) const {
  return Tensor::from_data({rows_, cols_}, values_, requires_grad);
}

double Matrix::max_abs_diff(const Matrix& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw DimensionError("Matrix::max_abs_diff: shape mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    m = std::max(m, std::abs(values_[i] - other.values_[i]));
  }
  return m;
}

double Matrix::asymmetry() const {
  if (rows_ != cols_) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = i + 1; j < cols_; ++j) {
      m = std::max(m, std::abs((*this)(i, j) - (*this)(j, i)));
    }
  }
  return m;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols_ != b.rows_) {
    throw DimensionError("Matrix product: " + std::to_string(a.rows_) + "x" +
                         std::to_string(a.cols_) + " times " + std::to_string(b.rows_) + "x" +
                         std::to_string(b.cols_));
  }
  Matrix c(a.rows_, b.cols_);
  for (std::size_t i = 0; i < a.rows_; ++i) {
    for (std::size_t p = 0; p < a.cols_; ++p) {
      const double av = a(i, p);
      for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += av * b(p, j);
    }
  }
  return c;
}

}  // namespace spectgnn
