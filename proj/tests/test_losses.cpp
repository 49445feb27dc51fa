// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "sigclr/checks.hpp"
#include "sigclr/errors.hpp"
#include "sigclr/losses.hpp"
#include "sigclr/rng.hpp"

using namespace sigclr;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

LossParams plain(double t, double b) {
  LossParams p;
  p.temperature = t;
  p.bias = b;
  return p;
}

// Independent evaluation straight from the definition, one pair at a time.
double sigclr_reference(const Matrix& x, double t, double b, bool mean_norm) {
  const std::size_t rows = x.rows(), n = rows / 2;
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < rows; ++j) {
      if (i == j) continue;
      double xy = 0.0, xx = 0.0, yy = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        xy += x(i, c) * x(j, c);
        xx += x(i, c) * x(i, c);
        yy += x(j, c) * x(j, c);
      }
      const double cosine = xy / std::sqrt(xx * yy);
      const double z = j == (i + n) % rows ? 1.0 : -1.0;
      total += std::log1p(std::exp(-z * (t * cosine + b)));
    }
  }
  return total / (mean_norm ? static_cast<double>(rows * rows) : static_cast<double>(rows));
}

double ntxent_reference(const Matrix& x, double tau) {
  const std::size_t rows = x.rows(), n = rows / 2;
  const Matrix u = l2_normalize_rows(x);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < rows; ++j)
      if (j != i) denom += std::exp(dot(u.row(i), u.row(j)) / tau);
    const double pos = std::exp(dot(u.row(i), u.row((i + n) % rows)) / tau);
    total += -std::log(pos / denom);
  }
  return total / static_cast<double>(rows);
}

}  // namespace

TEST_CASE("pair masks for n = 2") {
  const PairMasks m = build_masks(2);
  const double expect[4][4] = {{-1, -1, 1, -1}, {-1, -1, -1, 1}, {1, -1, -1, -1}, {-1, 1, -1, -1}};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(m.sign(i, j) == expect[i][j]);
      CHECK(m.loss_mask(i, j) == (i == j ? 0.0 : 1.0));
    }
  CHECK_THROWS_AS(build_masks(0), InvalidArgument);
}

TEST_CASE("pair mask invariants for n in 1..64") {
  for (std::size_t n = 1; n <= 64; ++n) {
    const PairMasks m = build_masks(n);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < 2 * n; ++i) {
      std::size_t row_pos = 0;
      for (std::size_t j = 0; j < 2 * n; ++j) {
        REQUIRE(m.sign(i, j) == m.sign(j, i));
        REQUIRE(m.sign(i, j) == pair_label(i, j, n));
        if (m.sign(i, j) == 1.0) ++row_pos;
      }
      REQUIRE(row_pos == 1);
      REQUIRE(m.loss_mask(i, i) == 0.0);
      positives += row_pos;
    }
    CHECK(positives == 2 * n);
  }
}

TEST_CASE("embedding batch validation") {
  CHECK_THROWS_AS(EmbeddingBatch(Matrix(3, 2)), ShapeError);
  CHECK_THROWS_AS(EmbeddingBatch(Matrix(0, 2)), ShapeError);
  const Matrix a = random_matrix(3, 4, 1), b = random_matrix(3, 4, 2);
  const EmbeddingBatch batch = EmbeddingBatch::from_views(a, b);
  CHECK(batch.pairs() == 3);
  CHECK(batch.positive_of(1) == 4);
  CHECK(batch.positive_of(4) == 1);
  CHECK_THROWS_AS(EmbeddingBatch::from_views(a, random_matrix(2, 4, 3)), ShapeError);
}

TEST_CASE("closed-form loss values") {
  const PairMasks m = build_masks(1);
  const double same = sigclr_loss(EmbeddingBatch(Matrix::from_rows({{0.6, 0.8}, {0.6, 0.8}})), m, plain(1, 0)).value;
  CHECK(std::abs(same - std::log1p(std::exp(-1.0))) <= 1e-12);
  const double orth = sigclr_loss(EmbeddingBatch(Matrix::from_rows({{1, 0}, {0, 1}})), m, plain(1, 0)).value;
  CHECK(std::abs(orth - std::log(2.0)) <= 1e-12);
}

TEST_CASE("loss agrees with the pairwise definition") {
  for (std::uint64_t seed : {3u, 4u}) {
    const Matrix x = random_matrix(10, 6, seed);
    for (auto [t, b] : {std::pair{1.0, 0.0}, {5.0, -10.0}, {10.0, -3.0}}) {
      LossParams p = plain(t, b);
      CHECK(sigclr_loss(EmbeddingBatch(x), build_masks(5), p).value ==
            doctest::Approx(sigclr_reference(x, t, b, false)).epsilon(1e-13));
      p.normalization = Normalization::Mean;
      CHECK(sigclr_loss(EmbeddingBatch(x), build_masks(5), p).value ==
            doctest::Approx(sigclr_reference(x, t, b, true)).epsilon(1e-13));
    }
  }
}

TEST_CASE("per-row and mean normalization differ by exactly 2n") {
  const Matrix x = random_matrix(16, 4, 9);
  LossParams p = plain(5, -10);
  const double per_row = sigclr_loss(EmbeddingBatch(x), build_masks(8), p).value;
  p.normalization = Normalization::Mean;
  const double mean = sigclr_loss(EmbeddingBatch(x), build_masks(8), p).value;
  CHECK(per_row / mean == doctest::Approx(16.0).epsilon(1e-14));
  CHECK(loss_normalizer(p, 8) == 256.0);
}

TEST_CASE("loss is invariant to swapping the views and rescaling rows") {
  const Matrix a = random_matrix(4, 5, 21), b = random_matrix(4, 5, 22);
  const PairMasks m = build_masks(4);
  const LossParams p = plain(5, -2);
  const double ab = sigclr_loss(EmbeddingBatch::from_views(a, b), m, p).value;
  const double ba = sigclr_loss(EmbeddingBatch::from_views(b, a), m, p).value;
  CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
  Matrix scaled = EmbeddingBatch::from_views(a, b).rows();
  for (std::size_t i = 0; i < scaled.rows(); ++i)
    for (double& v : scaled.row(i)) v *= 0.25 + static_cast<double>(i);
  CHECK(sigclr_loss(EmbeddingBatch(scaled), m, p).value == doctest::Approx(ab).epsilon(1e-14));
}

TEST_CASE("degenerate embeddings are rejected") {
  Matrix x = random_matrix(4, 3, 1);
  x.row(2)[0] = x.row(2)[1] = x.row(2)[2] = 0.0;
  CHECK_THROWS_AS(sigclr_loss(EmbeddingBatch(x), build_masks(2), plain(1, 0)), DegenerateEmbedding);
  CHECK_THROWS_AS(ntxent_loss(EmbeddingBatch(x), 0.5), DegenerateEmbedding);
  CHECK_THROWS_AS(sigclr_loss(EmbeddingBatch(random_matrix(4, 3, 1)), build_masks(3), plain(1, 0)), ShapeError);
}

TEST_CASE("gradients match central differences") {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const Matrix x = random_matrix(12, 7, seed);
    const PairMasks m = build_masks(6);
    for (double t : {1.0, 2.0, 5.0, 10.0}) {
      for (auto space : {TemperatureSpace::Log, TemperatureSpace::Raw}) {
        LossParams p = plain(t, -3.0);
        p.learnable_temperature = true;
        p.temperature_space = space;
        const LossOutput out = sigclr_loss(EmbeddingBatch(x), m, p);
        const Matrix num =
            finite_diff_grad([&](const Matrix& e) { return sigclr_loss(EmbeddingBatch(e), m, p).value; }, x);
        CHECK(relative_error(out.grad_embeddings, num) < 1e-6);

        const double h = 1e-5;
        auto at = [&](double b, double temp) {
          LossParams q = p;
          q.bias = b;
          q.temperature = temp;
          return sigclr_loss(EmbeddingBatch(x), m, q).value;
        };
        const double nb = (at(p.bias + h, t) - at(p.bias - h, t)) / (2 * h);
        CHECK(relative_error(out.grad_bias, nb) < 1e-6);
        const double nt = space == TemperatureSpace::Log
                              ? (at(p.bias, std::exp(std::log(t) + h)) - at(p.bias, std::exp(std::log(t) - h))) / (2 * h)
                              : (at(p.bias, t + h) - at(p.bias, t - h)) / (2 * h);
        CHECK(relative_error(out.grad_temperature, nt) < 1e-6);
      }
    }
  }
}

TEST_CASE("fixed temperature reports no temperature gradient") {
  const LossOutput out = sigclr_loss(EmbeddingBatch(random_matrix(4, 3, 2)), build_masks(2), plain(5, -10));
  CHECK(out.grad_temperature == 0.0);
}

TEST_CASE("bias gradient closed form and pair terms") {
  const Matrix x = random_matrix(8, 5, 6);
  LossParams p = plain(5, -10);
  p.keep_pair_terms = true;
  const PairMasks m = build_masks(4);
  const LossOutput out = sigclr_loss(EmbeddingBatch(x), m, p);
  CHECK(out.grad_bias == bias_grad_closed_form(EmbeddingBatch(x), m, p));
  REQUIRE(out.pair_terms.has_value());
  double sum = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK((*out.pair_terms)(i, i) == 0.0);
    for (std::size_t j = 0; j < 8; ++j) sum += (*out.pair_terms)(i, j);
  }
  CHECK(sum / 8.0 == doctest::Approx(out.value).epsilon(1e-14));
}

TEST_CASE("initial bias keeps negatives small and pushes the bias up") {
  // Random unit embeddings in high dimension have cosines near 0: negatives sit
  // at logit about -10 and positives at about -10 as well, but only positives
  // have a large loss term.
  const Matrix x = l2_normalize_rows(random_matrix(256, 128, 17));
  LossParams p = plain(5, -10);
  p.keep_pair_terms = true;
  const PairMasks m = build_masks(128);
  const LossOutput out = sigclr_loss(EmbeddingBatch(x), m, p);
  double neg = 0.0, all = 0.0;
  for (std::size_t i = 0; i < 256; ++i)
    for (std::size_t j = 0; j < 256; ++j) {
      all += (*out.pair_terms)(i, j);
      if (m.sign(i, j) < 0) neg += (*out.pair_terms)(i, j);
    }
  CHECK(neg / all < 0.05);
  CHECK(out.grad_bias < 0.0);  // descent raises b
}

TEST_CASE("ntxent matches the softmax definition") {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const Matrix x = random_matrix(4, 3, seed);
    CHECK(std::abs(ntxent_loss(EmbeddingBatch(x), 0.5).value - ntxent_reference(x, 0.5)) < 1e-9);
    const Matrix y = random_matrix(10, 6, seed);
    CHECK(ntxent_loss(EmbeddingBatch(y), 0.1).value == doctest::Approx(ntxent_reference(y, 0.1)).epsilon(1e-13));
  }
  CHECK(ntxent_loss(EmbeddingBatch(random_matrix(2, 5, 1)), 0.5).value == 0.0);
  CHECK(ntxent_loss(EmbeddingBatch(random_matrix(2, 5, 1)), 0.5).grad_embeddings == Matrix(2, 5));
  CHECK_THROWS_AS(ntxent_loss(EmbeddingBatch(random_matrix(2, 5, 1)), 0.0), InvalidArgument);
}

TEST_CASE("ntxent gradient matches central differences") {
  const Matrix x = random_matrix(8, 5, 12);
  const LossOutput out = ntxent_loss(EmbeddingBatch(x), 0.2);
  const Matrix num = finite_diff_grad([&](const Matrix& e) { return ntxent_loss(EmbeddingBatch(e), 0.2).value; }, x);
  CHECK(relative_error(out.grad_embeddings, num) < 1e-6);
}
