// SPDX-License-Identifier: Apache-2.0
#include "sigclr/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "sigclr/errors.hpp"

namespace sigclr {

EmbeddingBatch::EmbeddingBatch(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() == 0 || rows_.rows() % 2 != 0) {
    throw ShapeError("embedding batch needs an even, nonzero row count, got " +
                     std::to_string(rows_.rows()));
  }
}

EmbeddingBatch EmbeddingBatch::from_views(const Matrix& view_a, const Matrix& view_b) {
  if (view_a.rows() != view_b.rows() || view_a.cols() != view_b.cols())
    throw ShapeError("view shapes differ");
  Matrix rows(view_a.rows() * 2, view_a.cols());
  std::copy(view_a.data().begin(), view_a.data().end(), rows.data().begin());
  std::copy(view_b.data().begin(), view_b.data().end(),
            rows.data().begin() + static_cast<std::ptrdiff_t>(view_a.size()));
  return EmbeddingBatch(std::move(rows));
}

PairMasks build_masks(std::size_t n) {
  if (n == 0) throw InvalidArgument("build_masks: n must be >= 1");
  const std::size_t m = 2 * n;
  PairMasks masks{n, Matrix(m, m, -1.0), Matrix(m, m, 1.0)};
  for (std::size_t i = 0; i < m; ++i) {
    masks.sign(i, (i + n) % m) = 1.0;
    masks.loss_mask(i, i) = 0.0;
  }
  return masks;
}

double loss_normalizer(const LossParams& params, std::size_t pairs) {
  const double rows = 2.0 * static_cast<double>(pairs);
  return params.normalization == Normalization::PerRow ? rows : rows * rows;
}

void require_nondegenerate(const Matrix& rows, double eps) {
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const double norm = l2_norm(rows.row(i));
    if (!(norm >= eps)) {
      throw DegenerateEmbedding("embedding row " + std::to_string(i) + " has norm " +
                                std::to_string(norm) + " below eps");
    }
  }
}

Matrix cosine_backward(const Matrix& grad_unit, const Matrix& unit, std::span<const double> norms) {
  Matrix out(grad_unit.rows(), grad_unit.cols());
  for (std::size_t i = 0; i < grad_unit.rows(); ++i) {
    const auto g = grad_unit.row(i);
    const auto u = unit.row(i);
    const double radial = dot(g, u);
    auto o = out.row(i);
    for (std::size_t c = 0; c < g.size(); ++c) o[c] = (g[c] - radial * u[c]) / norms[i];
  }
  return out;
}

namespace {

void check_masks(const EmbeddingBatch& batch, const PairMasks& masks) {
  const std::size_t m = batch.total_rows();
  if (masks.pairs != batch.pairs() || masks.sign.rows() != m || masks.loss_mask.rows() != m) {
    throw ShapeError("masks built for n=" + std::to_string(masks.pairs) + ", batch has n=" +
                     std::to_string(batch.pairs()));
  }
}

struct Cosines {
  Matrix unit;
  std::vector<double> norms;
  Matrix sims;
};

Cosines cosines(const Matrix& rows, double eps) {
  require_nondegenerate(rows, eps);
  Cosines c;
  c.unit = l2_normalize_rows(rows, eps);
  c.norms = row_norms(rows);
  c.sims = matmul_bt(c.unit, c.unit);
  return c;
}

// grad_unit_i = sum_j (dC_ij + dC_ji) u_j for a symmetric similarity matrix.
Matrix symmetric_sim_backward(const Matrix& grad_sims, const Matrix& unit) {
  Matrix sym(grad_sims.rows(), grad_sims.cols());
  for (std::size_t i = 0; i < sym.rows(); ++i)
    for (std::size_t j = 0; j < sym.cols(); ++j) sym(i, j) = grad_sims(i, j) + grad_sims(j, i);
  return matmul(sym, unit);
}

}  // namespace

LossOutput sigclr_loss(const EmbeddingBatch& batch, const PairMasks& masks,
                       const LossParams& params) {
  check_masks(batch, masks);
  const Cosines cs = cosines(batch.rows(), params.eps);
  const std::size_t m = batch.total_rows();
  const double t = params.temperature;
  const double norm = loss_normalizer(params, batch.pairs());

  LossOutput out;
  if (params.keep_pair_terms) out.pair_terms.emplace(m, m);
  Matrix grad_sims(m, m);
  double loss_acc = 0.0;
  double bias_acc = 0.0;
  double temp_acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double k = masks.loss_mask(i, j);
      if (k == 0.0) continue;
      const double z = masks.sign(i, j);
      const double s = t * cs.sims(i, j) + params.bias;
      const double term = -k * log_sigmoid(z * s);
      loss_acc += term;
      bias_acc += k * z * sigmoid(-z * s);
      const double g = sigclr_logit_grad(z, k, s, norm);
      temp_acc += g * cs.sims(i, j);
      grad_sims(i, j) = t * g;
      if (out.pair_terms) (*out.pair_terms)(i, j) = term;
    }
  }
  out.value = loss_acc / norm;
  out.grad_bias = -bias_acc / norm;
  if (params.learnable_temperature) {
    out.grad_temperature = params.temperature_space == TemperatureSpace::Log ? t * temp_acc : temp_acc;
  }
  out.grad_embeddings =
      cosine_backward(symmetric_sim_backward(grad_sims, cs.unit), cs.unit, cs.norms);
  return out;
}

double bias_grad_closed_form(const EmbeddingBatch& batch, const PairMasks& masks,
                             const LossParams& params) {
  check_masks(batch, masks);
  const Cosines cs = cosines(batch.rows(), params.eps);
  const std::size_t m = batch.total_rows();
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double k = masks.loss_mask(i, j);
      if (k == 0.0) continue;
      const double z = masks.sign(i, j);
      const double s = params.temperature * cs.sims(i, j) + params.bias;
      acc += k * z * sigmoid(-z * s);
    }
  }
  return -acc / loss_normalizer(params, batch.pairs());
}

LossOutput ntxent_loss(const EmbeddingBatch& batch, double temperature, double eps) {
  if (!(temperature > 0.0)) throw InvalidArgument("ntxent_loss: temperature must be positive");
  const Cosines cs = cosines(batch.rows(), eps);
  const std::size_t m = batch.total_rows();
  const double inv_rows = 1.0 / static_cast<double>(m);

  Matrix grad_sims(m, m);
  std::vector<double> logits;
  logits.reserve(m - 1);
  double loss_acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    logits.clear();
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) logits.push_back(cs.sims(i, j) / temperature);
    const double lse = logsumexp(logits);
    const std::size_t pos = batch.positive_of(i);
    loss_acc += lse - cs.sims(i, pos) / temperature;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      const double p = std::exp(cs.sims(i, j) / temperature - lse);
      const double target = j == pos ? 1.0 : 0.0;
      grad_sims(i, j) = inv_rows * (p - target) / temperature;
    }
  }
  LossOutput out;
  out.value = loss_acc * inv_rows;
  out.grad_embeddings =
      cosine_backward(symmetric_sim_backward(grad_sims, cs.unit), cs.unit, cs.norms);
  return out;
}

}  // namespace sigclr
