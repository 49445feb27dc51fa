// SPDX-License-Identifier: Apache-2.0
//
// sigclr: pretrain, probe, sweep, chunk-bench and check.
// Exit codes: 0 success, 1 config error, 2 check failure, 3 numerical divergence.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sigclr/checks.hpp"
#include "sigclr/config.hpp"
#include "sigclr/errors.hpp"
#include "sigclr/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitCheck = 2;
constexpr int kExitDivergence = 3;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> loss;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> devices;
  std::optional<std::size_t> epochs;
  std::optional<std::string> data;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "Config file (key = value lines)");
  cmd->add_option("--seed", f.seed, "Run seed");
  cmd->add_option("--loss", f.loss, "sigclr or ntxent")->check(CLI::IsMember({"sigclr", "ntxent"}));
  cmd->add_option("--batch-size", f.batch_size, "Pairs per batch (n)");
  cmd->add_option("--devices", f.devices, "Simulated devices for the chunked loss");
  cmd->add_option("--epochs", f.epochs, "Pretraining epochs");
  cmd->add_option("--data", f.data, "synthetic or cifar10:PATH");
  cmd->add_option("--out", f.out, "Output directory");
}

sigclr::RunConfig resolve(const CommonFlags& f) {
  sigclr::RunConfig c = f.config_path.empty() ? sigclr::RunConfig::desk_default()
                                              : sigclr::load_config(f.config_path);
  if (f.seed) sigclr::apply_setting(c, "train.seed", std::to_string(*f.seed));
  if (f.loss) sigclr::apply_setting(c, "loss.kind", *f.loss);
  if (f.batch_size) sigclr::apply_setting(c, "train.batch_size", std::to_string(*f.batch_size));
  if (f.devices) sigclr::apply_setting(c, "train.devices", std::to_string(*f.devices));
  if (f.epochs) sigclr::apply_setting(c, "train.epochs", std::to_string(*f.epochs));
  if (f.data) sigclr::apply_setting(c, "data.source", *f.data);
  if (f.out) sigclr::apply_setting(c, "output.dir", *f.out);
  c.validate();
  return c;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  os << j.dump(2) << "\n";
}

int run_pretrain(const CommonFlags& f) {
  const sigclr::RunConfig config = resolve(f);
  const sigclr::Dataset data = sigclr::load_dataset(config);
  const sigclr::PretrainResult result = sigclr::pretrain(config, data.train, &std::cerr);
  sigclr::write_run(config, result);
  std::cout << sigclr::summary_json(config, result).dump(2) << "\n";
  return kExitOk;
}

int run_probe(const CommonFlags& f, const std::string& checkpoint_flag) {
  const sigclr::RunConfig config = resolve(f);
  const std::filesystem::path checkpoint =
      checkpoint_flag.empty() ? config.out_dir / "checkpoint.sgcl" : std::filesystem::path(checkpoint_flag);
  const sigclr::Dataset data = sigclr::load_dataset(config);
  const sigclr::TrainedModel model = sigclr::load_trained(config, data.train.front(), checkpoint);
  const sigclr::ProbeResult result = sigclr::linear_eval(config, model.params, data);
  const nlohmann::json j = sigclr::to_json(result);
  write_json(config.out_dir / "probe.json", j);
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int run_sweep(const CommonFlags& f, const std::vector<std::size_t>& batch_sizes) {
  const sigclr::RunConfig config = resolve(f);
  const auto rows = sigclr::sweep(config, batch_sizes, &std::cerr);
  const nlohmann::json table = sigclr::sweep_table(config, rows);
  write_json(config.out_dir / "sweep.json", table);
  std::cout << table.dump(2) << "\n";
  return kExitOk;
}

int run_chunk_bench(std::size_t pairs, std::size_t dim, const std::vector<std::size_t>& devices,
                    std::uint64_t seed) {
  const sigclr::RunConfig defaults = sigclr::RunConfig::desk_default();
  const auto rows = sigclr::chunk_bench(pairs, dim, devices, defaults.loss_params, seed,
                                        sigclr::default_thread_count());
  nlohmann::json report = nlohmann::json::array();
  std::printf("%8s %12s %14s %14s %10s %12s %12s\n", "devices", "wall_s", "peak_block", "monolithic",
              "exchanges", "value_dev", "grad_dev");
  for (const auto& r : rows) {
    std::printf("%8zu %12.6f %14zu %14zu %10zu %12.3e %12.3e\n", r.devices, r.wall_seconds, r.peak_block_elems,
                r.monolithic_block_elems, r.exchanges, r.max_value_deviation, r.max_grad_deviation);
    report.push_back({{"devices", r.devices},
                      {"wall_seconds", r.wall_seconds},
                      {"peak_block_elems", r.peak_block_elems},
                      {"monolithic_block_elems", r.monolithic_block_elems},
                      {"exchanges", r.exchanges},
                      {"max_value_deviation", r.max_value_deviation},
                      {"max_grad_deviation", r.max_grad_deviation}});
  }
  std::cerr << report.dump() << "\n";
  return kExitOk;
}

int run_checks(const std::vector<std::string>& kinds) {
  bool all = true;
  for (const auto& kind : kinds) {
    const sigclr::CheckReport report = sigclr::run_check(kind);
    for (const auto& line : report.lines) {
      std::printf("%s %s: %s (%s)\n", line.passed ? "PASS" : "FAIL", kind.c_str(), line.name.c_str(),
                  line.detail.c_str());
    }
    all &= report.passed();
  }
  return all ? kExitOk : kExitCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SigCLR: sigmoid contrastive pretraining, linear probing and loss checks"};
  app.require_subcommand(1);

  CommonFlags pretrain_flags, probe_flags, sweep_flags;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Pretrain an encoder and write a run directory");
  add_common(pretrain_cmd, pretrain_flags);

  auto* probe_cmd = app.add_subcommand("probe", "Linear evaluation of a pretrained checkpoint");
  add_common(probe_cmd, probe_flags);
  std::string checkpoint;
  probe_cmd->add_option("--checkpoint", checkpoint, "Checkpoint (default: <out>/checkpoint.sgcl)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Pretrain + probe for each batch size");
  add_common(sweep_cmd, sweep_flags);
  std::vector<std::string> batch_tokens{"64", "128"};
  sweep_cmd->add_option("--batch-sizes", batch_tokens, "Batch sizes to sweep, comma separated (may be empty)")
      ->delimiter(',')
      ->expected(0, CLI::detail::expected_max_vector_size);

  auto* bench_cmd = app.add_subcommand("chunk-bench", "Chunked loss against the monolithic loss");
  std::size_t pairs = 512, dim = 128;
  std::uint64_t bench_seed = 0;
  std::vector<std::size_t> bench_devices{1, 2, 4, 8};
  bench_cmd->add_option("--pairs", pairs, "Pairs n (2n embeddings)");
  bench_cmd->add_option("--dim", dim, "Embedding dimension");
  bench_cmd->add_option("--devices", bench_devices, "Device counts")->delimiter(',');
  bench_cmd->add_option("--seed", bench_seed, "Embedding seed");

  auto* check_cmd = app.add_subcommand("check", "Run oracle suites");
  std::vector<std::string> kinds;
  check_cmd->add_option("kind", kinds, "grad, chunk, masks, loss-values (default: all)")
      ->check(CLI::IsMember(sigclr::check_kinds()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*pretrain_cmd) return run_pretrain(pretrain_flags);
    if (*probe_cmd) return run_probe(probe_flags, checkpoint);
    if (*sweep_cmd) {
      std::vector<std::size_t> batch_sizes;
      for (const auto& tok : batch_tokens) {
        if (tok.empty()) continue;
        std::size_t v = 0;
        const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || end != tok.data() + tok.size() || v == 0) throw sigclr::ConfigError("--batch-sizes: bad value '" + tok + "'");
        batch_sizes.push_back(v);
      }
      return run_sweep(sweep_flags, batch_sizes);
    }
    if (*bench_cmd) return run_chunk_bench(pairs, dim, bench_devices, bench_seed);
    if (*check_cmd) return run_checks(kinds.empty() ? sigclr::check_kinds() : kinds);
  } catch (const sigclr::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
