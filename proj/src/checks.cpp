// SPDX-License-Identifier: Apache-2.0
#include "sigclr/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sigclr/chunked.hpp"
#include "sigclr/errors.hpp"
#include "sigclr/losses.hpp"
#include "sigclr/model.hpp"
#include "sigclr/rng.hpp"

namespace sigclr {

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

void add(CheckReport& r, std::string name, bool ok, std::string detail) {
  r.lines.push_back({std::move(name), ok, std::move(detail)});
}

CheckReport grad_suite() {
  CheckReport r{"grad", {}};
  constexpr double kTol = 1e-6;
  constexpr double kModelTol = 1e-5;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const Matrix emb = random_matrix(16, 16, seed);
    const PairMasks masks = build_masks(8);
    for (double t : {1.0, 2.0, 5.0, 10.0}) {
      LossParams p;
      p.temperature = t;
      p.bias = -2.0;
      p.learnable_temperature = true;
      const LossOutput out = sigclr_loss(EmbeddingBatch(emb), masks, p);
      const Matrix num = finite_diff_grad(
          [&](const Matrix& x) { return sigclr_loss(EmbeddingBatch(x), masks, p).value; }, emb);
      auto at_bias = [&](double b) {
        LossParams q = p;
        q.bias = b;
        return sigclr_loss(EmbeddingBatch(emb), masks, q).value;
      };
      auto at_logt = [&](double lt) {
        LossParams q = p;
        q.temperature = std::exp(lt);
        return sigclr_loss(EmbeddingBatch(emb), masks, q).value;
      };
      constexpr double h = 1e-5;
      const double nb = (at_bias(p.bias + h) - at_bias(p.bias - h)) / (2 * h);
      const double lt = std::log(t);
      const double nt = (at_logt(lt + h) - at_logt(lt - h)) / (2 * h);
      const double e = std::max({relative_error(out.grad_embeddings, num), relative_error(out.grad_bias, nb),
                                 relative_error(out.grad_temperature, nt)});
      add(r, "sigclr seed=" + std::to_string(seed) + " t=" + std::to_string(static_cast<int>(t)), e < kTol,
          "max rel err " + sci(e));
    }
    const LossOutput nt = ntxent_loss(EmbeddingBatch(emb), 0.5);
    const Matrix num = finite_diff_grad([&](const Matrix& x) { return ntxent_loss(EmbeddingBatch(x), 0.5).value; }, emb);
    const double e = relative_error(nt.grad_embeddings, num);
    add(r, "ntxent seed=" + std::to_string(seed), e < kTol, "max rel err " + sci(e));

    // End to end through a two-layer model.
    const ModelSpec spec = ModelSpec::mlp(6, {16}, {8});
    ModelParams params = init_params(spec, seed);
    const Matrix images = random_matrix(8, 6, seed + 100);
    const PairMasks m4 = build_masks(4);
    LossParams p;
    p.temperature = 2.0;
    p.bias = -1.0;
    auto loss_of = [&](const ModelParams& mp) {
      return sigclr_loss(EmbeddingBatch(forward(mp, images).projector_out), m4, p);
    };
    const ForwardResult fwd = forward(params, images);
    const LossOutput lo = sigclr_loss(EmbeddingBatch(fwd.projector_out), m4, p);
    backward(params, fwd.cache, lo.grad_embeddings);
    double worst = 0.0;
    for (const auto& ref : params.parameters()) {
      const Matrix analytic = *ref.grad;
      const Matrix numeric = finite_diff_grad(
          [&](const Matrix& w) {
            ModelParams copy = params;
            for (auto& cr : copy.parameters())
              if (cr.name == ref.name) *cr.value = w;
            return loss_of(copy).value;
          },
          *ref.value);
      worst = std::max(worst, relative_error(analytic, numeric));
    }
    add(r, "model end-to-end seed=" + std::to_string(seed), worst < kModelTol, "max rel err " + sci(worst));
  }
  return r;
}

CheckReport chunk_suite() {
  CheckReport r{"chunk", {}};
  constexpr double kTol = 1e-9;
  const Matrix emb = random_matrix(32, 16, 7);
  const EmbeddingBatch batch(emb);
  LossParams p;
  p.learnable_temperature = true;
  const LossOutput mono = sigclr_loss(batch, build_masks(16), p);
  for (std::size_t d : {1u, 2u, 4u, 8u}) {
    const ShardPlan plan = plan_shards(16, d);
    const ChunkedOutput out = chunked_sigclr_loss(batch, p, plan, ChunkedOptions{1, true});
    const double dv = std::abs(out.loss.value - mono.value);
    const double dg = std::max({max_abs_diff(out.loss.grad_embeddings, mono.grad_embeddings),
                                std::abs(out.loss.grad_bias - mono.grad_bias),
                                std::abs(out.loss.grad_temperature - mono.grad_temperature)});
    const bool once = std::all_of(out.visits.begin(), out.visits.end(), [](auto v) { return v == 1; });
    const std::size_t expect = plan.chunk_size * plan.chunk_size;
    const bool peak = std::all_of(out.devices.begin(), out.devices.end(),
                                  [&](const DeviceState& s) { return s.peak_block_elems == expect; });
    add(r, "D=" + std::to_string(d), dv <= kTol && dg <= kTol && once && peak,
        "value dev " + sci(dv) + ", grad dev " + sci(dg) + ", coverage " + (once ? "exact" : "BROKEN") +
            ", peak block " + std::to_string(out.devices.front().peak_block_elems) + "/" + std::to_string(expect));
  }
  return r;
}

CheckReport mask_suite() {
  CheckReport r{"masks", {}};
  std::size_t bad = 0;
  for (std::size_t n = 1; n <= 64; ++n) {
    const PairMasks m = build_masks(n);
    const std::size_t rows = 2 * n;
    bool ok = true;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < rows; ++j) {
        const bool pos = m.sign(i, j) == 1.0;
        positives += pos;
        ok &= pos == (j == (i + n) % rows);
        ok &= m.sign(i, j) == 1.0 || m.sign(i, j) == -1.0;
        ok &= m.sign(i, j) == m.sign(j, i);
        ok &= m.loss_mask(i, j) == (i == j ? 0.0 : 1.0);
      }
    }
    ok &= positives == rows;
    if (!ok) ++bad;
  }
  add(r, "n=1..64", bad == 0, std::to_string(bad) + " failing sizes");
  return r;
}

CheckReport loss_value_suite() {
  CheckReport r{"loss-values", {}};
  LossParams p;
  p.temperature = 1.0;
  p.bias = 0.0;
  const PairMasks m = build_masks(1);
  const double same = sigclr_loss(EmbeddingBatch(Matrix::from_rows({{0.6, 0.8}, {0.6, 0.8}})), m, p).value;
  const double expect_same = std::log1p(std::exp(-1.0));
  add(r, "identical unit rows", std::abs(same - expect_same) <= 1e-12, "got " + sci(same));
  const double orth = sigclr_loss(EmbeddingBatch(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}})), m, p).value;
  add(r, "orthogonal rows", std::abs(orth - std::log(2.0)) <= 1e-12, "got " + sci(orth));
  const double nt1 = ntxent_loss(EmbeddingBatch(Matrix::from_rows({{1.0, 2.0}, {3.0, -1.0}})), 0.5).value;
  add(r, "ntxent n=1 is zero", nt1 == 0.0, "got " + sci(nt1));
  return r;
}

}  // namespace

bool CheckReport::passed() const {
  return std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.passed; });
}

double relative_error(const Matrix& analytic, const Matrix& numeric) {
  return max_abs_diff(analytic, numeric) / std::max(max_abs(numeric.data()), 1e-12);
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-12);
}

std::vector<std::string> check_kinds() { return {"grad", "chunk", "masks", "loss-values"}; }

CheckReport run_check(std::string_view kind) {
  if (kind == "grad") return grad_suite();
  if (kind == "chunk") return chunk_suite();
  if (kind == "masks") return mask_suite();
  if (kind == "loss-values") return loss_value_suite();
  throw InvalidArgument("unknown check kind '" + std::string(kind) + "'");
}

}  // namespace sigclr
