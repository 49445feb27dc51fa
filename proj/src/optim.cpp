// SPDX-License-Identifier: Apache-2.0
#include "sigclr/optim.hpp"

#include <cmath>
#include <numbers>

#include "sigclr/errors.hpp"

namespace sigclr {

void OptimizerConfig::validate() const {
  if (!(base_lr > 0.0)) throw InvalidArgument("optimizer: base_lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("optimizer: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("optimizer: weight_decay must be >= 0");
  if (!(eps >= 0.0)) throw InvalidArgument("optimizer: eps must be >= 0");
  if (!(trust_coefficient > 0.0)) throw InvalidArgument("optimizer: trust_coefficient must be positive");
  if (!(warmup_epochs >= 0.0 && warmup_epochs <= total_epochs))
    throw InvalidArgument("optimizer: need 0 <= warmup_epochs <= total_epochs");
  if (batch_size == 0 || reference_batch == 0) throw InvalidArgument("optimizer: batch sizes must be >= 1");
}

double OptimizerConfig::scaled_lr() const {
  return base_lr * static_cast<double>(batch_size) / static_cast<double>(reference_batch);
}

double lr_at(const OptimizerConfig& config, double epoch) {
  if (!(epoch >= 0.0 && epoch <= config.total_epochs))
    throw InvalidArgument("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(config.total_epochs) + "]");
  const double peak = config.scaled_lr();
  if (epoch < config.warmup_epochs) return peak * epoch / config.warmup_epochs;
  const double span = config.total_epochs - config.warmup_epochs;
  // Degenerate all-warmup schedule: hold the peak.
  if (span <= 0.0) return peak;
  const double progress = (epoch - config.warmup_epochs) / span;
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double lars_local_lr(const OptimizerConfig& config, const Matrix& weight, const Matrix& grad) {
  const double w = l2_norm(weight.data());
  const double g = l2_norm(grad.data());
  return config.trust_coefficient * w / (g + config.weight_decay * w + config.eps);
}

Lars::Lars(OptimizerConfig config) : config_(std::move(config)) { config_.validate(); }

const Matrix* Lars::momentum_buffer(const std::string& name) const {
  auto it = buffers_.find(name);
  return it == buffers_.end() ? nullptr : &it->second;
}

void Lars::step(std::span<const TensorRef> params, double lr) {
  if (!(lr >= 0.0)) throw InvalidArgument("lars: learning rate must be >= 0");
  for (const auto& p : params) {
    if (p.value->rows() != p.grad->rows() || p.value->cols() != p.grad->cols())
      throw ShapeError("lars: gradient shape mismatch for " + p.name);
    if (!all_finite(p.grad->data())) throw DivergenceError("non-finite gradient in " + p.name);
  }
  for (const auto& p : params) {
    Matrix& w = *p.value;
    const Matrix& g = *p.grad;
    auto [it, fresh] = buffers_.try_emplace(p.name, w.rows(), w.cols());
    Matrix& buf = it->second;
    const bool excluded = config_.lars_excluded.contains(p.name);
    const double wd = excluded ? 0.0 : config_.weight_decay;
    const double scale = excluded ? lr : lr * lars_local_lr(config_, w, g);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double update =
          config_.momentum * buf.data()[i] + scale * (g.data()[i] + wd * w.data()[i]);
      buf.data()[i] = update;
      w.data()[i] -= update;
    }
  }
}

}  // namespace sigclr
