// SPDX-License-Identifier: Apache-2.0
//
// End-to-end orchestration: two-view pretraining with SigCLR or NT-Xent,
// linear evaluation on frozen encoder features, batch-size sweeps, and the
// chunked-loss benchmark.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sigclr/config.hpp"
#include "sigclr/data.hpp"
#include "sigclr/model.hpp"
#include "sigclr/probe.hpp"

namespace sigclr {

struct MetricsRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double learning_rate = 0.0;
  double bias_value = 0.0;
  double temperature_value = 0.0;
  double wall_seconds = 0.0;
};

struct Dataset {
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> test;
  std::size_t classes = 0;
};

/// Train and held-out splits for the configured source.
Dataset load_dataset(const RunConfig& config);

/// Model shape implied by the config and the images it will see.
ModelSpec model_spec_for(const RunConfig& config, const ImageRecord& sample);

/// Seeded initialization used by pretrain.
ModelParams initial_params(const RunConfig& config, const ImageRecord& sample);

struct TrainedModel {
  ModelParams params;
  Matrix loss_bias = Matrix(1, 1);
  /// The temperature t itself (not its log), whatever space it was trained in.
  Matrix loss_temperature = Matrix(1, 1);

  double bias() const { return loss_bias(0, 0); }
  double temperature() const { return loss_temperature(0, 0); }
  /// Model tensors followed by "loss.bias" and "loss.temperature".
  std::vector<ConstTensorRef> tensors() const;
  std::vector<TensorRef> tensors();
};

struct PretrainResult {
  TrainedModel model;
  /// Row 0 is the untrained model; row e is the mean loss of training epoch e.
  std::vector<MetricsRow> metrics;
  /// FNV-1a over every augmented batch of the first training epoch (0 if none ran).
  std::uint64_t first_epoch_view_hash = 0;
  std::size_t steps = 0;
};

/// Seeded pretraining over `train`. Throws DivergenceError (with epoch, batch,
/// bias and temperature) on a non-finite loss, ConfigError when the batch
/// size exceeds the dataset.
PretrainResult pretrain(const RunConfig& config, const std::vector<ImageRecord>& train,
                        std::ostream* log = nullptr);

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows, bool wall_time);
nlohmann::json summary_json(const RunConfig& config, const PretrainResult& result);
/// Writes metrics.csv, summary.json, config.txt and checkpoint.sgcl into config.out_dir.
void write_run(const RunConfig& config, const PretrainResult& result);

/// Loads a checkpoint written by write_run.
TrainedModel load_trained(const RunConfig& config, const ImageRecord& sample,
                          const std::filesystem::path& checkpoint);

/// Frozen-encoder features for a set of records (train or test transform).
Matrix extract_features(const RunConfig& config, const ModelParams& params,
                        const std::vector<ImageRecord>& records, bool train_phase);

/// Fits a probe on the train split's encoder features and scores the test split.
ProbeResult linear_eval(const RunConfig& config, const ModelParams& params, const Dataset& data);

struct SweepRow {
  std::size_t batch_size = 0;
  bool ok = false;
  std::string error;
  double final_loss = 0.0;
  std::optional<ProbeResult> probe;
};

/// Pretrain + probe per batch size (learning rate scales linearly with batch).
/// Per-run failures are recorded in the row and the sweep continues.
std::vector<SweepRow> sweep(const RunConfig& config, const std::vector<std::size_t>& batch_sizes,
                            std::ostream* log = nullptr);
/// Table with one row per dataset and one column per batch size, plus the
/// published full-scale reference values as a footer (documentation only).
nlohmann::json sweep_table(const RunConfig& config, const std::vector<SweepRow>& rows);

struct ChunkBenchRow {
  std::size_t devices = 0;
  double wall_seconds = 0.0;
  std::size_t peak_block_elems = 0;
  std::size_t monolithic_block_elems = 0;
  std::size_t exchanges = 0;
  double max_value_deviation = 0.0;
  double max_grad_deviation = 0.0;
};

/// Random embeddings of 2n x dim, every D in `devices` against the monolithic loss.
std::vector<ChunkBenchRow> chunk_bench(std::size_t pairs, std::size_t dim,
                                       const std::vector<std::size_t>& devices,
                                       const LossParams& params, std::uint64_t seed,
                                       std::size_t threads);

}  // namespace sigclr
