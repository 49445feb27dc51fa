// SPDX-License-Identifier: Apache-2.0
//
// Run configuration. The file format is flat UTF-8 `key = value` lines with
// dotted section prefixes; `#` starts a comment. Unknown keys are errors.
//
//   loss.kind = sigclr
//   loss.temperature = 5
//   train.batch_size = 64
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sigclr/augment.hpp"
#include "sigclr/data.hpp"
#include "sigclr/losses.hpp"
#include "sigclr/model.hpp"
#include "sigclr/optim.hpp"
#include "sigclr/probe.hpp"

namespace sigclr {

enum class LossKind { SigClr, NtXent };

struct DataConfig {
  enum class Source { Synthetic, Cifar10 };
  Source source = Source::Synthetic;
  /// Directory holding data_batch_{1..5}.bin and test_batch.bin.
  std::filesystem::path cifar_dir;
  SynthSpec synth;
  std::size_t synth_test_per_class = 256;
  /// Synthetic dataset seed; defaults to the run seed.
  std::optional<std::uint64_t> seed;
};

struct ModelConfig {
  std::vector<std::size_t> encoder_widths{256, 128};
  std::vector<std::size_t> projector_widths{1024, 1024, 128};
  /// Multiplies every projector width (rounded, at least 1).
  double projector_scale = 0.125;
};

struct RunConfig {
  LossKind loss = LossKind::SigClr;
  LossParams loss_params;
  double ntxent_temperature = 0.5;
  OptimizerConfig optim;
  AugmentationConfig augment;
  ModelConfig model;
  DataConfig data;
  ProbeConfig probe;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::size_t devices = 1;
  std::uint64_t seed = 0;
  /// 0: use SIGCLR_THREADS or the hardware concurrency.
  std::size_t threads = 0;
  std::filesystem::path out_dir = "runs/default";
  /// Adds a measured wall_seconds column; makes metrics.csv nondeterministic.
  bool record_wall_time = false;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
  /// Optimizer config with the run's epochs and batch size filled in.
  OptimizerConfig optimizer() const;
  std::uint64_t data_seed() const { return data.seed.value_or(seed); }
  /// Desk-scale synthetic run: the shipped defaults.
  static RunConfig desk_default();
  /// The 1000-epoch CIFAR-10 recipe (ResNet-scale widths). Provided, not gated.
  static RunConfig full_scale_preset(const std::filesystem::path& cifar_dir);
};

/// Applies one `key = value` setting. Throws ConfigError on unknown keys or bad values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);
/// Parses a whole config text on top of `base`. Errors carry the line number.
RunConfig parse_config(std::string_view text, RunConfig base = RunConfig::desk_default());
RunConfig load_config(const std::filesystem::path& path, RunConfig base = RunConfig::desk_default());
/// Serializes every key so that parse_config(to_config_text(c)) == c.
std::string to_config_text(const RunConfig& config);

/// SIGCLR_THREADS when set, else the hardware concurrency (at least 1).
/// SIGCLR_THREADS also caps an explicit train.threads.
std::size_t default_thread_count();
std::size_t resolved_threads(const RunConfig& config);

}  // namespace sigclr
