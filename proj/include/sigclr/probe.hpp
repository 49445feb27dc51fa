// SPDX-License-Identifier: Apache-2.0
//
// Linear evaluation: multinomial logistic regression on frozen features.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"

#include "sigclr/matrix.hpp"

namespace sigclr {

struct ProbeConfig {
  std::size_t max_epochs = 200;
  double lr = 0.1;
  double momentum = 0.9;
  /// Stop once |loss_t - loss_{t-1}| drops below this.
  double tolerance = 1e-6;
  /// z-score features with training-set statistics before the linear map.
  bool standardize = true;
};

struct LinearProbe {
  std::size_t classes = 0;
  /// Empty means the features are used as given.
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  Matrix weight;  ///< features x classes
  Matrix bias;    ///< 1 x classes
  std::size_t epochs_run = 0;
  std::vector<double> loss_curve;

  Matrix logits(const Matrix& features) const;
};

struct ProbeResult {
  double top1 = 0.0;
  std::vector<double> per_class;
  std::size_t epochs_run = 0;
  std::vector<double> train_loss_curve;
};

/// Mean softmax cross-entropy and its gradient w.r.t. the logits.
double softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels,
                             Matrix* grad_logits = nullptr);

/// Full-batch gradient descent with momentum from zero weights. Throws
/// InvalidArgument for classes < 2, empty features, a label count mismatch,
/// or a label >= classes.
LinearProbe fit_linear_probe(const Matrix& features, std::span<const std::size_t> labels,
                             std::size_t classes, const ProbeConfig& config = {});

/// Argmax per row, ties to the lowest class index. Classes absent from
/// `labels` report per-class accuracy 0.
ProbeResult top1(const LinearProbe& probe, const Matrix& features,
                 std::span<const std::size_t> labels);

/// {"top1": .., "per_class": [..], "epochs_run": ..}
nlohmann::json to_json(const ProbeResult& result);

}  // namespace sigclr
