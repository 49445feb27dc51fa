// SPDX-License-Identifier: Apache-2.0
#include "sigclr/chunked.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <thread>

#include "sigclr/errors.hpp"

namespace sigclr {

ShardPlan plan_shards(std::size_t n, std::size_t devices, int direction) {
  if (devices == 0) throw InvalidArgument("plan_shards: need at least one device");
  if (n == 0) throw InvalidArgument("plan_shards: n must be >= 1");
  if (direction != 1 && direction != -1) throw InvalidArgument("plan_shards: direction must be +1 or -1");
  const std::size_t rows = 2 * n;
  if (rows % devices != 0) {
    throw ShardError(std::to_string(devices) + " devices do not divide " + std::to_string(rows) +
                     " rows");
  }
  ShardPlan plan;
  plan.devices = devices;
  plan.chunk_size = rows / devices;
  plan.total_rows = rows;
  plan.direction = direction;
  plan.schedule.assign(devices, std::vector<std::size_t>(devices));
  for (std::size_t s = 0; s < devices; ++s) {
    for (std::size_t d = 0; d < devices; ++d) {
      const std::size_t hop = direction > 0 ? s : devices - s;
      plan.schedule[s][d] = (d + hop) % devices;
    }
  }
  return plan;
}

std::size_t chunk_exchange_count(const ShardPlan& plan) {
  return plan.devices * (plan.devices - 1);
}

namespace {

struct Chunk {
  std::size_t source = 0;
  Matrix unit_rows;
};

struct Device {
  DeviceState state;
  Matrix local_unit;
  std::vector<double> local_norms;
  Chunk incoming;
  Matrix partial_grads;  // 2n x dim, indexed by global row
  double bias_acc = 0.0;
  double temp_acc = 0.0;
  std::size_t live_block_elems = 0;
};

// Scoped accounting for one materialized pairwise block.
class BlockBuffer {
 public:
  BlockBuffer(Device& dev, std::size_t rows, std::size_t cols) : dev_(dev), block_(rows, cols) {
    dev_.live_block_elems += block_.size();
    dev_.state.peak_block_elems = std::max(dev_.state.peak_block_elems, dev_.live_block_elems);
  }
  ~BlockBuffer() { dev_.live_block_elems -= block_.size(); }
  BlockBuffer(const BlockBuffer&) = delete;
  BlockBuffer& operator=(const BlockBuffer&) = delete;

  Matrix& get() noexcept { return block_; }

 private:
  Device& dev_;
  Matrix block_;
};

void process_block(Device& dev, const ShardPlan& plan, const LossParams& params,
                   std::size_t pairs, double normalizer, std::vector<std::uint8_t>* visits) {
  const std::size_t b = plan.chunk_size;
  const std::size_t local_begin = plan.owner_begin(dev.state.device_id);
  const std::size_t remote_begin = plan.owner_begin(dev.incoming.source);
  const Matrix& remote = dev.incoming.unit_rows;
  const double t = params.temperature;

  BlockBuffer buffer(dev, b, b);
  Matrix& logit_grads = buffer.get();
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t gi = local_begin + i;
    for (std::size_t j = 0; j < b; ++j) {
      const std::size_t gj = remote_begin + j;
      if (visits) ++(*visits)[gi * plan.total_rows + gj];
      const double k = pair_weight(gi, gj);
      if (k == 0.0) continue;
      const double z = pair_label(gi, gj, pairs);
      const double c = dot(dev.local_unit.row(i), remote.row(j));
      const double s = t * c + params.bias;
      dev.state.partial_loss += -k * log_sigmoid(z * s);
      dev.bias_acc += k * z * sigmoid(-z * s);
      const double g = sigclr_logit_grad(z, k, s, normalizer);
      dev.temp_acc += g * c;
      logit_grads(i, j) = g;
    }
  }
  // dC_ij = t * g_ij flows to both endpoints of every pair in the block.
  for (std::size_t i = 0; i < b; ++i) {
    auto gi_row = dev.partial_grads.row(local_begin + i);
    const auto ui = dev.local_unit.row(i);
    for (std::size_t j = 0; j < b; ++j) {
      const double g = t * logit_grads(i, j);
      if (g == 0.0) continue;
      const auto vj = remote.row(j);
      auto gj_row = dev.partial_grads.row(remote_begin + j);
      for (std::size_t c = 0; c < vj.size(); ++c) {
        gi_row[c] += g * vj[c];
        gj_row[c] += g * ui[c];
      }
    }
  }
}

}  // namespace

ChunkedOutput chunked_sigclr_loss(const EmbeddingBatch& batch, const LossParams& params,
                                  const ShardPlan& plan, const ChunkedOptions& options) {
  if (plan.total_rows != batch.total_rows() || plan.devices * plan.chunk_size != plan.total_rows ||
      plan.schedule.size() != plan.devices) {
    throw ShardError("shard plan for " + std::to_string(plan.total_rows) +
                     " rows does not match batch of " + std::to_string(batch.total_rows()));
  }
  require_nondegenerate(batch.rows(), params.eps);

  const std::size_t D = plan.devices;
  const std::size_t b = plan.chunk_size;
  const std::size_t rows = plan.total_rows;
  const std::size_t dim = batch.dim();
  const double normalizer = loss_normalizer(params, batch.pairs());

  std::vector<Device> devices(D);
  for (std::size_t d = 0; d < D; ++d) {
    Device& dev = devices[d];
    dev.state.device_id = d;
    const Matrix local = batch.rows().slice_rows(plan.owner_begin(d), b);
    dev.local_unit = l2_normalize_rows(local, params.eps);
    dev.local_norms = row_norms(local);
    dev.incoming = Chunk{d, dev.local_unit};
    dev.partial_grads = Matrix(rows, dim);
  }

  ChunkedOutput out;
  if (options.record_visits) out.visits.assign(rows * rows, 0);
  std::vector<std::uint8_t>* visits = options.record_visits ? &out.visits : nullptr;

  const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, D);
  for (std::size_t round = 0; round < D; ++round) {
    for (std::size_t d = 0; d < D; ++d) {
      if (devices[d].incoming.source != plan.schedule[round][d])
        throw std::logic_error("ring position diverged from shard schedule");
    }
    if (workers == 1) {
      for (auto& dev : devices) process_block(dev, plan, params, batch.pairs(), normalizer, visits);
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t d = w; d < D; d += workers)
            process_block(devices[d], plan, params, batch.pairs(), normalizer, visits);
        });
      }
    }  // jthreads join here: the round barrier.

    if (round + 1 == D) break;
    // Collective permute: every device takes the chunk its ring neighbour held.
    std::vector<Chunk> next(D);
    for (std::size_t d = 0; d < D; ++d) {
      const std::size_t neighbour = plan.direction > 0 ? (d + 1) % D : (d + D - 1) % D;
      next[d] = devices[neighbour].incoming;
      ++devices[d].state.chunks_received;
    }
    for (std::size_t d = 0; d < D; ++d) devices[d].incoming = std::move(next[d]);
  }

  // Ordered reduction over device ids.
  double loss_acc = 0.0;
  double bias_acc = 0.0;
  double temp_acc = 0.0;
  Matrix grad_unit(rows, dim);
  for (const auto& dev : devices) {
    loss_acc += dev.state.partial_loss;
    bias_acc += dev.bias_acc;
    temp_acc += dev.temp_acc;
    for (std::size_t i = 0; i < grad_unit.size(); ++i)
      grad_unit.data()[i] += dev.partial_grads.data()[i];
  }

  LossOutput& loss = out.loss;
  loss.value = loss_acc / normalizer;
  loss.grad_bias = -bias_acc / normalizer;
  if (params.learnable_temperature) {
    loss.grad_temperature = params.temperature_space == TemperatureSpace::Log
                                ? params.temperature * temp_acc
                                : temp_acc;
  }
  loss.grad_embeddings = Matrix(rows, dim);
  for (const auto& dev : devices) {
    const std::size_t begin = plan.owner_begin(dev.state.device_id);
    const Matrix local_grad =
        cosine_backward(grad_unit.slice_rows(begin, b), dev.local_unit, dev.local_norms);
    std::copy(local_grad.data().begin(), local_grad.data().end(),
              loss.grad_embeddings.row(begin).begin());
  }
  for (const auto& dev : devices) out.devices.push_back(dev.state);
  return out;
}

}  // namespace sigclr
