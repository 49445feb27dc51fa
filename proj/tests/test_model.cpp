// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "sigclr/checks.hpp"
#include "sigclr/errors.hpp"
#include "sigclr/losses.hpp"
#include "sigclr/model.hpp"
#include "sigclr/rng.hpp"

using namespace sigclr;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("mlp spec shape") {
  const ModelSpec s = ModelSpec::mlp(12, {8, 6}, {5, 5, 3});
  CHECK(s.input_dim() == 12);
  CHECK(s.feature_dim() == 6);
  CHECK(s.embedding_dim() == 3);
  CHECK(s.encoder[0].activation == Activation::Relu);
  CHECK(s.encoder[1].activation == Activation::Relu);
  CHECK(s.projector[1].activation == Activation::Relu);
  CHECK(s.projector[2].activation == Activation::Linear);
  CHECK_THROWS_AS(ModelSpec::mlp(12, {}, {3}), InvalidArgument);
  CHECK_THROWS_AS(ModelSpec::mlp(12, {0}, {3}), InvalidArgument);
}

TEST_CASE("init is seeded, bounded and has zero biases") {
  const ModelSpec s = ModelSpec::mlp(20, {16}, {12, 4});
  const ModelParams a = init_params(s, 3), b = init_params(s, 3), c = init_params(s, 4);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(*pa[i].value == *pb[i].value);
    differs |= !(*pa[i].value == *pc[i].value);
  }
  CHECK(differs);
  for (const auto* layers : {&a.encoder, &a.projector}) {
    for (const Layer& l : *layers) {
      const double bound = std::sqrt(6.0 / static_cast<double>(l.spec.in_dim + l.spec.out_dim));
      CHECK(max_abs(l.weight.data()) <= bound);
      CHECK(max_abs(l.bias.data()) == 0.0);
    }
  }
  CHECK(pa.front().name == "encoder.0.weight");
  CHECK(pa[1].name == "encoder.0.bias");
  CHECK(pa.back().name == "projector.1.bias");
}

TEST_CASE("zero weights give zero outputs") {
  ModelParams p = init_params(ModelSpec::mlp(4, {3}, {2}), 1);
  for (auto& r : p.parameters()) r.value->fill(0.0);
  const ForwardResult f = forward(p, random_matrix(5, 4, 2));
  CHECK(max_abs(f.encoder_out.data()) == 0.0);
  CHECK(max_abs(f.projector_out.data()) == 0.0);
}

TEST_CASE("single linear layer reduces to matmul plus bias") {
  ModelSpec s;
  s.encoder = {{4, 3, Activation::Linear}};
  ModelParams p = init_params(s, 5);
  p.encoder[0].bias = Matrix::from_rows({{0.5, -1.0, 2.0}});
  const Matrix x = random_matrix(6, 4, 6);
  Matrix expect = matmul(x, p.encoder[0].weight);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 3; ++j) expect(i, j) += p.encoder[0].bias(0, j);
  const ForwardResult f = forward(p, x);
  CHECK(f.encoder_out == expect);
  CHECK(f.projector_out == expect);

  const Matrix upstream = random_matrix(6, 3, 7);
  backward(p, f.cache, upstream);
  CHECK(p.encoder[0].grad_weight == matmul_at(x, upstream));
}

TEST_CASE("relu clips negatives") {
  ModelSpec s;
  s.encoder = {{2, 2, Activation::Relu}};
  ModelParams p = init_params(s, 1);
  p.encoder[0].weight = Matrix::identity(2);
  const ForwardResult f = forward(p, Matrix::from_rows({{-1.0, 2.0}}));
  CHECK(f.encoder_out == Matrix::from_rows({{0.0, 2.0}}));
}

TEST_CASE("zero upstream gradient zeroes every parameter gradient") {
  ModelParams p = init_params(ModelSpec::mlp(5, {4}, {3}), 2);
  const ForwardResult f = forward(p, random_matrix(4, 5, 3));
  backward(p, f.cache, Matrix(4, 3));
  for (const auto& r : p.parameters()) CHECK(max_abs(r.grad->data()) == 0.0);
}

TEST_CASE("end-to-end gradients through a two-layer model") {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    ModelParams p = init_params(ModelSpec::mlp(6, {10}, {5}), seed);
    const Matrix x = random_matrix(8, 6, seed + 50);
    const PairMasks masks = build_masks(4);
    LossParams lp;
    lp.temperature = 2.0;
    lp.bias = -1.0;
    const ForwardResult f = forward(p, x);
    backward(p, f.cache, sigclr_loss(EmbeddingBatch(f.projector_out), masks, lp).grad_embeddings);
    for (const auto& r : p.parameters()) {
      const Matrix num = finite_diff_grad(
          [&](const Matrix& w) {
            ModelParams q = p;
            for (auto& qr : q.parameters())
              if (qr.name == r.name) *qr.value = w;
            return sigclr_loss(EmbeddingBatch(forward(q, x).projector_out), masks, lp).value;
          },
          *r.value);
      CHECK_MESSAGE(relative_error(*r.grad, num) < 1e-5, r.name);
    }
  }
}

TEST_CASE("encode matches the encoder half of forward") {
  const ModelParams p = init_params(ModelSpec::mlp(6, {7, 5}, {4, 3}), 9);
  const Matrix x = random_matrix(3, 6, 10);
  CHECK(encode(p, x) == forward(p, x).encoder_out);
}

TEST_CASE("shape and state errors") {
  ModelParams p = init_params(ModelSpec::mlp(6, {5}, {3}), 1);
  CHECK_THROWS_AS(forward(p, Matrix(2, 5)), ShapeError);
  CHECK_THROWS_AS(backward(p, ActivationCache{}, Matrix(2, 3)), StateError);
  const ForwardResult f = forward(p, Matrix(2, 6, 1.0));
  CHECK_THROWS_AS(backward(p, f.cache, Matrix(3, 3)), StateError);
}
