// SPDX-License-Identifier: Apache-2.0
//
// LARS with momentum and decoupled-from-trust weight decay, and the
// linear-warmup + cosine-annealing learning-rate schedule with linear
// batch-size scaling.
#pragma once

#include <map>
#include <set>
#include <span>
#include <string>

#include "sigclr/matrix.hpp"
#include "sigclr/tensor_ref.hpp"

namespace sigclr {

struct OptimizerConfig {
  double base_lr = 0.3;
  double momentum = 0.9;
  double weight_decay = 1e-6;
  double trust_coefficient = 0.001;
  double eps = 1e-9;
  /// Tensors updated with plain momentum SGD (no trust ratio, no weight decay).
  std::set<std::string> lars_excluded;
  double warmup_epochs = 10;
  double total_epochs = 1000;
  std::size_t batch_size = 64;
  std::size_t reference_batch = 64;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
  double scaled_lr() const;
};

/// Learning rate at a (fractional) epoch in [0, total_epochs]. Throws
/// InvalidArgument outside that range.
double lr_at(const OptimizerConfig& config, double epoch);

/// Trust-ratio multiplier for one tensor: trust * |w| / (|g| + wd * |w| + eps).
double lars_local_lr(const OptimizerConfig& config, const Matrix& weight, const Matrix& grad);

class Lars {
 public:
  explicit Lars(OptimizerConfig config);

  /// One update of every tensor in `params` from its grad buffer. Throws
  /// DivergenceError if any gradient is non-finite (nothing is updated then).
  void step(std::span<const TensorRef> params, double lr);

  const OptimizerConfig& config() const noexcept { return config_; }
  /// Momentum buffer (previous update) for a tensor, or nullptr before its first step.
  const Matrix* momentum_buffer(const std::string& name) const;

 private:
  OptimizerConfig config_;
  std::map<std::string, Matrix> buffers_;
};

}  // namespace sigclr
