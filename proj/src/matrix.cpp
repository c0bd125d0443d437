#include "fsnc/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace fsnc {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Matrix& Matrix::operator+=(const Matrix& o) {
  require(same_shape(o), "matrix += shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require(same_shape(o), "matrix -= shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  const std::size_t m = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t k = 0; k < m; ++k) {
      const double v = ai[k];
      if (v == 0.0) continue;
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < n; ++j) ci[j] += v * bk[j];
    }
  }
  return c;
}

Matrix matmul_ta(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_ta outer dimension mismatch");
  Matrix c(a.cols(), b.cols());
  const std::size_t m = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    const double* bi = b.row(i);
    for (std::size_t k = 0; k < m; ++k) {
      const double v = ai[k];
      if (v == 0.0) continue;
      double* ck = c.row(k);
      for (std::size_t j = 0; j < n; ++j) ck[j] += v * bi[j];
    }
  }
  return c;
}

Matrix matmul_tb(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_tb inner dimension mismatch");
  Matrix c(a.rows(), b.rows());
  const std::size_t m = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.row(j);
      double dot = 0.0;
      for (std::size_t k = 0; k < m; ++k) dot += ai[k] * bj[k];
      ci[j] = dot;
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
  require(x.same_shape(y), "axpy shape mismatch");
  const double* xs = x.data();
  double* ys = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) ys[i] += alpha * xs[i];
}

void hadamard_inplace(Matrix& x, const Matrix& y) {
  require(x.same_shape(y), "hadamard shape mismatch");
  double* xs = x.data();
  const double* ys = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) xs[i] *= ys[i];
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
  return std::sqrt(s);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require(a.same_shape(b), "max_abs_diff shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), src.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < src.rows(), "gather_rows index out of range");
    const double* s = src.row(idx[i]);
    double* d = out.row(i);
    for (std::size_t j = 0; j < src.cols(); ++j) d[j] = s[j];
  }
  return out;
}

void scatter_add_rows(Matrix& dst, const std::vector<std::size_t>& idx, const Matrix& src) {
  require(idx.size() == src.rows(), "scatter_add_rows row-count mismatch");
  require(dst.cols() == src.cols(), "scatter_add_rows width mismatch");
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] < dst.rows(), "scatter_add_rows index out of range");
    double* d = dst.row(idx[i]);
    const double* s = src.row(i);
    for (std::size_t j = 0; j < src.cols(); ++j) d[j] += s[j];
  }
}

}  // namespace fsnc
