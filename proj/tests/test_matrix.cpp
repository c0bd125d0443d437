#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fsnc/matrix.hpp"
#include "fsnc/rng.hpp"

#include <cmath>

using namespace fsnc;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double zero_prob = 0.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      m(i, j) = rng.flip(zero_prob) ? 0.0 : rng.uniform(-2.0, 2.0);
  return m;
}

// Reference product written as the textbook triple loop, no skipping.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

}  // namespace

TEST_CASE("matmul matches naive reference, including sparse inputs") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 1 + rng.below(12), k = 1 + rng.below(12), n = 1 + rng.below(12);
    const double zp = (rep % 2 == 0) ? 0.8 : 0.0;  // exercise the zero-skip path
    Matrix a = random_matrix(m, k, rng, zp);
    Matrix b = random_matrix(k, n, rng);
    CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-12);
  }
}

TEST_CASE("matmul_ta equals transpose(a)*b and matmul_tb equals a*transpose(b)") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t r = 1 + rng.below(10), m = 1 + rng.below(10), n = 1 + rng.below(10);
    Matrix a = random_matrix(r, m, rng, 0.5);
    Matrix b = random_matrix(r, n, rng);
    CHECK(max_abs_diff(matmul_ta(a, b), naive_matmul(transpose(a), b)) < 1e-12);
    Matrix c = random_matrix(n, m, rng);
    CHECK(max_abs_diff(matmul_tb(a, c), naive_matmul(a, transpose(c))) < 1e-12);
  }
}

TEST_CASE("shape mismatches are rejected") {
  Matrix a(2, 3), b(4, 2);
  CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(a += b, std::invalid_argument);
  CHECK_THROWS_AS(axpy(1.0, a, b), std::invalid_argument);
}

TEST_CASE("elementwise helpers") {
  Matrix x(2, 2);
  x(0, 0) = 1; x(0, 1) = -2; x(1, 0) = 3; x(1, 1) = -4;
  Matrix y = x;
  y *= 2.0;
  CHECK(y(1, 1) == doctest::Approx(-8.0));
  axpy(0.5, x, y);
  CHECK(y(0, 0) == doctest::Approx(2.5));
  hadamard_inplace(y, x);
  CHECK(y(0, 1) == doctest::Approx(10.0));
  CHECK(frobenius_norm(Matrix(3, 3)) == doctest::Approx(0.0));
  Matrix one(1, 2);
  one(0, 0) = 3.0; one(0, 1) = 4.0;
  CHECK(frobenius_norm(one) == doctest::Approx(5.0));
}

TEST_CASE("gather and scatter-add round trip") {
  Rng rng(3);
  Matrix src = random_matrix(6, 4, rng);
  std::vector<std::size_t> idx = {4, 0, 0, 5};
  Matrix g = gather_rows(src, idx);
  CHECK(g.rows() == 4);
  CHECK(g(0, 2) == src(4, 2));
  CHECK(g(2, 3) == src(0, 3));

  Matrix dst(6, 4);
  scatter_add_rows(dst, idx, g);
  // row 0 was gathered twice, so it accumulates twice
  CHECK(dst(0, 1) == doctest::Approx(2.0 * src(0, 1)));
  CHECK(dst(4, 0) == doctest::Approx(src(4, 0)));
  CHECK(dst(1, 0) == 0.0);

  CHECK_THROWS_AS(gather_rows(src, {9}), std::invalid_argument);
}
