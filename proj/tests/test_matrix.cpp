// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>

#include "doctest.h"
#include "sigclr/errors.hpp"
#include "sigclr/matrix.hpp"
#include "sigclr/rng.hpp"

using namespace sigclr;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

// Plain triple loop with ascending k; the kernel must reproduce it exactly.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("matmul matches the triple loop bit for bit") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Matrix a = random_matrix(7, 13, seed);
    const Matrix b = random_matrix(13, 5, seed + 10);
    const Matrix ref = naive_matmul(a, b);
    CHECK(matmul(a, b) == ref);
    CHECK(matmul_bt(a, transpose(b)) == ref);
    CHECK(matmul_at(transpose(a), b) == ref);
  }
}

TEST_CASE("matmul shape errors") {
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
  CHECK_THROWS_AS(matmul_bt(Matrix(2, 3), Matrix(2, 4)), ShapeError);
  CHECK_THROWS_AS(matmul_at(Matrix(2, 3), Matrix(3, 3)), ShapeError);
}

TEST_CASE("identity is neutral") {
  const Matrix a = random_matrix(4, 4, 5);
  CHECK(matmul(a, Matrix::identity(4)) == a);
  CHECK(matmul(Matrix::identity(4), a) == a);
}

TEST_CASE("l2_normalize_rows") {
  const Matrix m = Matrix::from_rows({{3.0, 4.0}, {0.0, -2.0}});
  const Matrix u = l2_normalize_rows(m);
  CHECK(u(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(u(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(u(1, 1) == -1.0);
  CHECK_THROWS_AS(l2_normalize_rows(m, 0.0), InvalidArgument);
  CHECK_THROWS_AS(l2_normalize_rows(m, -1.0), InvalidArgument);

  const Matrix r = random_matrix(20, 9, 11);
  for (double n : row_norms(l2_normalize_rows(r))) CHECK(std::abs(n - 1.0) < 1e-15);
}

TEST_CASE("normalization is scale invariant per row") {
  const Matrix r = random_matrix(6, 5, 3);
  Matrix scaled = r;
  for (std::size_t i = 0; i < scaled.rows(); ++i)
    for (double& v : scaled.row(i)) v *= static_cast<double>(i + 1) * 3.5;
  CHECK(max_abs_diff(l2_normalize_rows(r), l2_normalize_rows(scaled)) < 1e-15);
}

TEST_CASE("log_sigmoid is stable in both tails") {
  // Reference values computed at 60 significant digits.
  CHECK(log_sigmoid(50.0) == doctest::Approx(-1.928749847963917783e-22).epsilon(1e-14));
  CHECK(log_sigmoid(-50.0) == doctest::Approx(-50.0).epsilon(1e-15));
  CHECK(log_sigmoid(1.0) == doctest::Approx(-0.31326168751822283405).epsilon(1e-15));
  CHECK(log_sigmoid(0.0) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(std::isfinite(log_sigmoid(-1000.0)));
  CHECK(log_sigmoid(-1000.0) == -1000.0);
  CHECK(log_sigmoid(1000.0) == 0.0);
}

TEST_CASE("sigmoid symmetry and range") {
  for (double x : {-800.0, -30.0, -1.0, 0.0, 0.5, 30.0, 800.0}) {
    const double s = sigmoid(x);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(s + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("logsumexp") {
  const double v[] = {1.0, 2.0, 3.0};
  CHECK(logsumexp(v) == doctest::Approx(3.40760596444438030448).epsilon(1e-15));
  const double big[] = {1000.0, 1000.0};
  CHECK(logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(logsumexp(std::span<const double>{}), ShapeError);
}

TEST_CASE("finite_diff_grad recovers a quadratic gradient") {
  const Matrix x = random_matrix(3, 4, 8);
  const Matrix g = finite_diff_grad(
      [](const Matrix& m) {
        double s = 0.0;
        for (double v : m.data()) s += v * v * 0.5;
        return s;
      },
      x);
  CHECK(max_abs_diff(g, x) < 1e-9);
}

TEST_CASE("helpers") {
  const Matrix m = Matrix::from_rows({{1.0, -7.0}, {2.0, 3.0}});
  CHECK(max_abs(m.data()) == 7.0);
  CHECK(all_finite(m.data()));
  Matrix bad = m;
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(all_finite(bad.data()));
  CHECK(m.slice_rows(1, 1) == Matrix::from_rows({{2.0, 3.0}}));
  CHECK(transpose(transpose(m)) == m);
}

TEST_CASE("rng streams are deterministic and independent") {
  Rng a(42), b(42), c(derive_seed(42, 1));
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng(42).next_u64() != c.next_u64());
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(5) < 5);
  }
}
