// SPDX-License-Identifier: Apache-2.0
//
// Encoder f and projection head g as dense MLPs. The encoder output h is the
// representation used downstream; the projector output z feeds the loss only.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sigclr/matrix.hpp"
#include "sigclr/tensor_ref.hpp"

namespace sigclr {

enum class Activation { Relu, Linear };

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::Relu;
};

struct ModelSpec {
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> projector;

  /// Encoder: input -> hidden... (ReLU throughout). Projector: three layers,
  /// ReLU on the hidden two and linear output.
  static ModelSpec mlp(std::size_t input_dim, const std::vector<std::size_t>& encoder_widths,
                       const std::vector<std::size_t>& projector_widths);

  std::size_t input_dim() const;
  std::size_t feature_dim() const;
  std::size_t embedding_dim() const;
  /// Throws InvalidArgument on zero dims or layers that do not chain.
  void validate() const;
};

struct Layer {
  LayerSpec spec;
  Matrix weight;  ///< in_dim x out_dim
  Matrix bias;    ///< 1 x out_dim
  Matrix grad_weight;
  Matrix grad_bias;
};

struct ModelParams {
  std::vector<Layer> encoder;
  std::vector<Layer> projector;

  /// Named views over every tensor, "encoder.<i>.weight", "projector.<i>.bias", ...
  std::vector<TensorRef> parameters();
  std::vector<ConstTensorRef> parameters() const;
  void zero_grad();
};

/// Glorot-uniform weights from `seed`, zero biases.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

/// Inputs and pre-activations of every layer, needed for an exact backward pass.
struct ActivationCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
  bool empty() const noexcept { return inputs.empty(); }
};

struct ForwardResult {
  Matrix encoder_out;
  Matrix projector_out;
  ActivationCache cache;
};

/// Throws ShapeError when the image width does not match the first layer.
ForwardResult forward(const ModelParams& params, const Matrix& images);

/// Encoder only, no cache. Safe to call concurrently on a shared const model.
Matrix encode(const ModelParams& params, const Matrix& images);

/// Writes exact gradients into every grad buffer of `params` (overwriting).
/// Throws StateError when `cache` did not come from forward on these params.
void backward(ModelParams& params, const ActivationCache& cache, const Matrix& grad_projector_out);

}  // namespace sigclr
