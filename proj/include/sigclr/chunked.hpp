// SPDX-License-Identifier: Apache-2.0
//
// Device-sharded SigCLR loss over D simulated devices.
//
// The 2n batch rows are split into D contiguous chunks of b' = 2n / D rows.
// Each device keeps its own chunk and, over D lock-step rounds, sees every
// other chunk once as chunks are passed one hop around a ring. In each round
// a device materializes only the b' x b' block of pair terms between its
// local rows and the chunk it currently holds, so the per-device working set
// is b'^2 instead of (2n)^2. Labels and weights come from global row indices,
// so positive pairs may straddle devices.
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sigclr/losses.hpp"

namespace sigclr {

struct ShardPlan {
  std::size_t devices = 1;
  std::size_t chunk_size = 0;
  std::size_t total_rows = 0;
  /// +1: in round s device d holds the chunk of device (d + s) mod D; -1 the reverse.
  int direction = 1;
  /// schedule[s][d] = device whose chunk device d processes in round s.
  std::vector<std::vector<std::size_t>> schedule;

  std::size_t owner_begin(std::size_t device) const noexcept { return device * chunk_size; }
};

/// Throws InvalidArgument for devices == 0 or n == 0, ShardError when
/// devices does not divide 2n (which includes devices > 2n).
ShardPlan plan_shards(std::size_t n, std::size_t devices, int direction = 1);

/// Remote chunk transfers over a full ring pass: D * (D - 1).
std::size_t chunk_exchange_count(const ShardPlan& plan);

/// Per-device instrumentation after a chunked evaluation.
struct DeviceState {
  std::size_t device_id = 0;
  /// Unnormalized sum of -k log sigmoid(z s) over the device's rows.
  double partial_loss = 0.0;
  /// High-water mark of simultaneously live pairwise-block entries.
  std::size_t peak_block_elems = 0;
  std::size_t chunks_received = 0;
};

struct ChunkedOptions {
  /// Worker threads per round; 1 runs devices sequentially.
  std::size_t threads = 1;
  /// Record how many times every (i, j) pair term is evaluated.
  bool record_visits = false;
};

struct ChunkedOutput {
  LossOutput loss;
  std::vector<DeviceState> devices;
  /// (2n)^2 row-major visit counts; empty unless record_visits was set.
  std::vector<std::uint8_t> visits;
};

/// Same value and gradients as sigclr_loss on the same batch and params
/// (pair_terms is never produced). Throws ShardError if the plan does not
/// match the batch, DegenerateEmbedding on zero rows.
ChunkedOutput chunked_sigclr_loss(const EmbeddingBatch& batch, const LossParams& params,
                                  const ShardPlan& plan, const ChunkedOptions& options = {});

}  // namespace sigclr
