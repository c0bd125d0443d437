#pragma once

#include <cstddef>
#include <vector>

namespace fsnc {

// Dense row-major matrix of doubles.  Everything numerical in this project
// runs through this type; kernels live in matrix.cpp and are written as plain
// loops so the math stays auditable.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A * B.  Skips zero entries of A's rows, which makes multiplying a
// sparse-ish feature matrix by a weight matrix cheap without a sparse type.
Matrix matmul(const Matrix& a, const Matrix& b);

// C = A^T * B (A: r x m, B: r x n -> m x n).  Zero entries of A are skipped.
Matrix matmul_ta(const Matrix& a, const Matrix& b);

// C = A * B^T (A: r x m, B: n x m -> r x n).
Matrix matmul_tb(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// y += alpha * x
void axpy(double alpha, const Matrix& x, Matrix& y);

// x *= y elementwise
void hadamard_inplace(Matrix& x, const Matrix& y);

double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

// Rows of `src` listed in `idx`, in that order.
Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx);

// dst.row(idx[i]) += src.row(i) for all i.
void scatter_add_rows(Matrix& dst, const std::vector<std::size_t>& idx, const Matrix& src);

}  // namespace fsnc
