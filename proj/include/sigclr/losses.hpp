// SPDX-License-Identifier: Apache-2.0
//
// Pairwise sigmoid contrastive loss (SigCLR) with exact gradients, and the
// NT-Xent softmax baseline.
//
// Batch layout: 2n rows, rows [0, n) are view A of items 0..n-1 and rows
// [n, 2n) are view B of the same items, so the positive partner of row i is
// row (i + n) mod 2n. Every pair (i, j) is an independent binary problem with
// label z_ij = +1 for positives, -1 otherwise, and weight k_ij = 0 on the
// diagonal. With cosine similarity c_ij and logit s_ij = t * c_ij + b:
//
//   L = -(1/N) * sum_ij k_ij * log sigmoid(z_ij * s_ij)
//
// where N = 2n (per-row) or (2n)^2 (mean over the full matrix).
#pragma once

#include <cstddef>
#include <optional>

#include "sigclr/matrix.hpp"

namespace sigclr {

class EmbeddingBatch {
 public:
  /// Takes ownership of a 2n x dim matrix. Throws ShapeError for odd or zero row counts.
  explicit EmbeddingBatch(Matrix rows);
  /// Stacks view A on top of view B (both n x dim).
  static EmbeddingBatch from_views(const Matrix& view_a, const Matrix& view_b);

  std::size_t pairs() const noexcept { return rows_.rows() / 2; }
  std::size_t total_rows() const noexcept { return rows_.rows(); }
  std::size_t dim() const noexcept { return rows_.cols(); }
  std::size_t positive_of(std::size_t row) const noexcept {
    return (row + pairs()) % total_rows();
  }
  const Matrix& rows() const noexcept { return rows_; }

 private:
  Matrix rows_;
};

/// Label and weight of pair (i, j) in a batch of n pairs, from global indices alone.
constexpr double pair_label(std::size_t i, std::size_t j, std::size_t n) noexcept {
  return j == (i + n) % (2 * n) ? 1.0 : -1.0;
}
constexpr double pair_weight(std::size_t i, std::size_t j) noexcept { return i == j ? 0.0 : 1.0; }

struct PairMasks {
  std::size_t pairs = 0;
  Matrix sign;       ///< z_ij in {+1, -1}
  Matrix loss_mask;  ///< k_ij in {0, 1}
};

/// Throws InvalidArgument when n == 0.
PairMasks build_masks(std::size_t n);

enum class Normalization { PerRow, Mean };
enum class TemperatureSpace { Raw, Log };

struct LossParams {
  double temperature = 5.0;
  double bias = -10.0;
  bool learnable_temperature = false;
  /// Which coordinate grad_temperature is taken in when the temperature is learnable:
  /// Log means the optimized parameter is log(t).
  TemperatureSpace temperature_space = TemperatureSpace::Log;
  Normalization normalization = Normalization::PerRow;
  /// Rows with a smaller norm are rejected as degenerate.
  double eps = 1e-12;
  /// Materialize the (2n)^2 matrix of per-pair terms. Off for training.
  bool keep_pair_terms = false;
};

/// N in the loss prefactor 1/N.
double loss_normalizer(const LossParams& params, std::size_t pairs);

struct LossOutput {
  double value = 0.0;
  Matrix grad_embeddings;
  double grad_bias = 0.0;
  /// d loss / d(temperature parameter); zero unless the temperature is learnable.
  double grad_temperature = 0.0;
  /// Unnormalized per-pair terms -k_ij * log sigmoid(z_ij * s_ij).
  std::optional<Matrix> pair_terms;
};

/// d loss / d s_ij for one pair: -(1/N) k z sigmoid(-z s).
inline double sigclr_logit_grad(double label, double weight, double logit, double normalizer) {
  return -(weight * label * sigmoid(-label * logit)) / normalizer;
}

/// Throws DegenerateEmbedding if any row norm is below eps.
void require_nondegenerate(const Matrix& rows, double eps);

/// Backpropagates a gradient w.r.t. unit-normalized rows to the raw rows:
/// dx_i = (g_i - (g_i . u_i) u_i) / ||x_i||.
Matrix cosine_backward(const Matrix& grad_unit, const Matrix& unit, std::span<const double> norms);

/// Monolithic SigCLR loss over the full (2n)^2 pair matrix.
/// Throws ShapeError if masks were built for a different n.
LossOutput sigclr_loss(const EmbeddingBatch& batch, const PairMasks& masks,
                       const LossParams& params);

/// -(1/N) sum k z sigmoid(-z s); equal bit-for-bit to sigclr_loss(...).grad_bias.
double bias_grad_closed_form(const EmbeddingBatch& batch, const PairMasks& masks,
                             const LossParams& params);

/// NT-Xent: per row, softmax cross-entropy of the positive against the 2n-1
/// non-self rows at cosine / temperature, averaged over 2n rows.
LossOutput ntxent_loss(const EmbeddingBatch& batch, double temperature, double eps = 1e-12);

}  // namespace sigclr
