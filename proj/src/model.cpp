// SPDX-License-Identifier: Apache-2.0
#include "sigclr/model.hpp"

#include <cmath>

#include "sigclr/errors.hpp"
#include "sigclr/rng.hpp"

namespace sigclr {

ModelSpec ModelSpec::mlp(std::size_t input_dim, const std::vector<std::size_t>& encoder_widths,
                         const std::vector<std::size_t>& projector_widths) {
  ModelSpec spec;
  std::size_t in = input_dim;
  for (std::size_t w : encoder_widths) {
    spec.encoder.push_back({in, w, Activation::Relu});
    in = w;
  }
  for (std::size_t i = 0; i < projector_widths.size(); ++i) {
    const bool last = i + 1 == projector_widths.size();
    spec.projector.push_back({in, projector_widths[i], last ? Activation::Linear : Activation::Relu});
    in = projector_widths[i];
  }
  spec.validate();
  return spec;
}

std::size_t ModelSpec::input_dim() const { return encoder.front().in_dim; }
std::size_t ModelSpec::feature_dim() const { return encoder.back().out_dim; }
std::size_t ModelSpec::embedding_dim() const {
  return projector.empty() ? feature_dim() : projector.back().out_dim;
}

void ModelSpec::validate() const {
  if (encoder.empty()) throw InvalidArgument("model needs at least one encoder layer");
  std::size_t expected_in = encoder.front().in_dim;
  auto check = [&](const std::vector<LayerSpec>& layers, const char* part) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.in_dim == 0 || l.out_dim == 0)
        throw InvalidArgument(std::string(part) + " layer " + std::to_string(i) + " has a zero dim");
      if (l.in_dim != expected_in)
        throw InvalidArgument(std::string(part) + " layer " + std::to_string(i) +
                              " input does not match previous output");
      expected_in = l.out_dim;
    }
  };
  check(encoder, "encoder");
  check(projector, "projector");
}

namespace {

template <typename Params, typename Ref, typename Fn>
void collect(Params& params, std::vector<Ref>& out, Fn make) {
  auto add = [&](auto& layers, const char* part) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string prefix = std::string(part) + "." + std::to_string(i) + ".";
      out.push_back(make(prefix + "weight", layers[i].weight, layers[i].grad_weight));
      out.push_back(make(prefix + "bias", layers[i].bias, layers[i].grad_bias));
    }
  };
  add(params.encoder, "encoder");
  add(params.projector, "projector");
}

Layer make_layer(const LayerSpec& spec, Rng& rng) {
  Layer layer{spec, Matrix(spec.in_dim, spec.out_dim), Matrix(1, spec.out_dim),
              Matrix(spec.in_dim, spec.out_dim), Matrix(1, spec.out_dim)};
  const double bound = std::sqrt(6.0 / static_cast<double>(spec.in_dim + spec.out_dim));
  for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
  return layer;
}

// out = act(in · W + b); stores the pre-activation when asked.
Matrix apply_layer(const Layer& layer, const Matrix& in, Matrix* pre_out) {
  if (in.cols() != layer.spec.in_dim) {
    throw ShapeError("layer expects width " + std::to_string(layer.spec.in_dim) + ", got " +
                     std::to_string(in.cols()));
  }
  Matrix pre = matmul(in, layer.weight);
  for (std::size_t r = 0; r < pre.rows(); ++r) {
    auto row = pre.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias(0, c);
  }
  Matrix out = pre;
  if (layer.spec.activation == Activation::Relu)
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  if (pre_out) *pre_out = std::move(pre);
  return out;
}

}  // namespace

std::vector<TensorRef> ModelParams::parameters() {
  std::vector<TensorRef> out;
  collect(*this, out, [](std::string name, Matrix& v, Matrix& g) {
    return TensorRef{std::move(name), &v, &g};
  });
  return out;
}

std::vector<ConstTensorRef> ModelParams::parameters() const {
  std::vector<ConstTensorRef> out;
  collect(*this, out, [](std::string name, const Matrix& v, const Matrix&) {
    return ConstTensorRef{std::move(name), &v};
  });
  return out;
}

void ModelParams::zero_grad() {
  for (auto& p : parameters()) p.grad->fill(0.0);
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  ModelParams params;
  for (const auto& l : spec.encoder) params.encoder.push_back(make_layer(l, rng));
  for (const auto& l : spec.projector) params.projector.push_back(make_layer(l, rng));
  return params;
}

ForwardResult forward(const ModelParams& params, const Matrix& images) {
  ForwardResult result;
  const std::size_t total = params.encoder.size() + params.projector.size();
  result.cache.inputs.reserve(total);
  result.cache.pre_activations.reserve(total);
  Matrix x = images;
  auto run = [&](const std::vector<Layer>& layers) {
    for (const auto& layer : layers) {
      Matrix pre;
      Matrix next = apply_layer(layer, x, &pre);
      result.cache.inputs.push_back(std::move(x));
      result.cache.pre_activations.push_back(std::move(pre));
      x = std::move(next);
    }
  };
  run(params.encoder);
  result.encoder_out = x;
  run(params.projector);
  result.projector_out = std::move(x);
  return result;
}

Matrix encode(const ModelParams& params, const Matrix& images) {
  Matrix x = images;
  for (const auto& layer : params.encoder) x = apply_layer(layer, x, nullptr);
  return x;
}

void backward(ModelParams& params, const ActivationCache& cache, const Matrix& grad_projector_out) {
  const std::size_t total = params.encoder.size() + params.projector.size();
  if (cache.empty()) throw StateError("backward called without a forward pass");
  if (cache.inputs.size() != total || cache.pre_activations.size() != total)
    throw StateError("activation cache does not belong to this model");

  Matrix grad = grad_projector_out;
  for (std::size_t idx = total; idx-- > 0;) {
    Layer& layer = idx < params.encoder.size() ? params.encoder[idx]
                                               : params.projector[idx - params.encoder.size()];
    const Matrix& pre = cache.pre_activations[idx];
    const Matrix& in = cache.inputs[idx];
    if (pre.rows() != grad.rows() || pre.cols() != grad.cols() || in.cols() != layer.spec.in_dim)
      throw StateError("activation cache shape does not match upstream gradient");
    if (layer.spec.activation == Activation::Relu) {
      for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(pre.data()[i] > 0.0)) grad.data()[i] = 0.0;
    }
    layer.grad_weight = matmul_at(in, grad);
    layer.grad_bias = Matrix(1, grad.cols());
    for (std::size_t r = 0; r < grad.rows(); ++r) {
      const auto row = grad.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) layer.grad_bias(0, c) += row[c];
    }
    if (idx > 0) grad = matmul_bt(grad, layer.weight);
  }
}

}  // namespace sigclr
