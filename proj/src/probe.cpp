// SPDX-License-Identifier: Apache-2.0
#include "sigclr/probe.hpp"

#include <cmath>

#include "sigclr/errors.hpp"

namespace sigclr {

Matrix LinearProbe::logits(const Matrix& features) const {
  if (features.cols() != weight.rows()) throw ShapeError("probe: feature width mismatch");
  const bool standardized = !feature_mean.empty();
  if (standardized && (feature_mean.size() != weight.rows() || feature_scale.size() != weight.rows()))
    throw ShapeError("probe: standardization statistics do not match the weights");
  Matrix x = features;
  for (std::size_t r = 0; standardized && r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - feature_mean[c]) / feature_scale[c];
  }
  Matrix out = matmul(x, weight);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias(0, c);
  }
  return out;
}

double softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> labels,
                             Matrix* grad_logits) {
  if (logits.rows() != labels.size()) throw ShapeError("cross-entropy: one label per row required");
  const double inv = 1.0 / static_cast<double>(logits.rows());
  if (grad_logits) *grad_logits = Matrix(logits.rows(), logits.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const double lse = logsumexp(row);
    total += lse - row[labels[r]];
    if (grad_logits) {
      auto g = grad_logits->row(r);
      for (std::size_t c = 0; c < row.size(); ++c)
        g[c] = inv * (std::exp(row[c] - lse) - (c == labels[r] ? 1.0 : 0.0));
    }
  }
  return total * inv;
}

LinearProbe fit_linear_probe(const Matrix& features, std::span<const std::size_t> labels,
                             std::size_t classes, const ProbeConfig& config) {
  if (classes < 2) throw InvalidArgument("probe: need at least 2 classes");
  if (features.rows() == 0 || features.cols() == 0) throw InvalidArgument("probe: empty features");
  if (labels.size() != features.rows()) throw InvalidArgument("probe: one label per feature row required");
  for (std::size_t l : labels)
    if (l >= classes) throw InvalidArgument("probe: label " + std::to_string(l) + " out of range");

  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  LinearProbe probe;
  probe.classes = classes;
  probe.feature_mean.assign(d, 0.0);
  probe.feature_scale.assign(d, 1.0);
  if (config.standardize) {
    for (std::size_t c = 0; c < d; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < n; ++r) mean += features(r, c);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t r = 0; r < n; ++r) var += (features(r, c) - mean) * (features(r, c) - mean);
      var /= static_cast<double>(n);
      probe.feature_mean[c] = mean;
      probe.feature_scale[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
  }
  probe.weight = Matrix(d, classes);
  probe.bias = Matrix(1, classes);

  Matrix x = features;
  for (std::size_t r = 0; r < n; ++r) {
    auto row = x.row(r);
    for (std::size_t c = 0; c < d; ++c) row[c] = (row[c] - probe.feature_mean[c]) / probe.feature_scale[c];
  }

  Matrix vel_w(d, classes);
  Matrix vel_b(1, classes);
  Matrix grad_logits;
  double previous = 0.0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    Matrix logits = matmul(x, probe.weight);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < classes; ++c) logits(r, c) += probe.bias(0, c);
    const double loss = softmax_cross_entropy(logits, labels, &grad_logits);
    probe.loss_curve.push_back(loss);
    probe.epochs_run = epoch + 1;
    if (epoch > 0 && std::abs(previous - loss) < config.tolerance) break;
    previous = loss;

    const Matrix grad_w = matmul_at(x, grad_logits);
    for (std::size_t i = 0; i < grad_w.size(); ++i) {
      vel_w.data()[i] = config.momentum * vel_w.data()[i] + grad_w.data()[i];
      probe.weight.data()[i] -= config.lr * vel_w.data()[i];
    }
    for (std::size_t c = 0; c < classes; ++c) {
      double g = 0.0;
      for (std::size_t r = 0; r < n; ++r) g += grad_logits(r, c);
      vel_b(0, c) = config.momentum * vel_b(0, c) + g;
      probe.bias(0, c) -= config.lr * vel_b(0, c);
    }
  }
  return probe;
}

ProbeResult top1(const LinearProbe& probe, const Matrix& features,
                 std::span<const std::size_t> labels) {
  if (labels.size() != features.rows()) throw ShapeError("top1: one label per feature row required");
  const Matrix logits = probe.logits(features);
  std::vector<std::size_t> hits(probe.classes, 0);
  std::vector<std::size_t> counts(probe.classes, 0);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    const std::size_t label = labels[r];
    if (label < probe.classes) ++counts[label];
    if (best == label) {
      ++correct;
      ++hits[label];
    }
  }
  ProbeResult result;
  result.top1 = labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
  result.per_class.resize(probe.classes);
  for (std::size_t c = 0; c < probe.classes; ++c)
    result.per_class[c] = counts[c] ? static_cast<double>(hits[c]) / static_cast<double>(counts[c]) : 0.0;
  result.epochs_run = probe.epochs_run;
  result.train_loss_curve = probe.loss_curve;
  return result;
}

nlohmann::json to_json(const ProbeResult& result) {
  return {{"top1", result.top1}, {"per_class", result.per_class}, {"epochs_run", result.epochs_run}};
}

}  // namespace sigclr
