// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sigclr/checkpoint.hpp"
#include "sigclr/errors.hpp"
#include "sigclr/trainer.hpp"

using namespace sigclr;

namespace {

RunConfig small(std::uint64_t seed, std::size_t epochs) {
  RunConfig c = RunConfig::desk_default();
  c.seed = seed;
  c.epochs = epochs;
  c.batch_size = 16;
  c.data.synth.per_class = 16;
  c.data.synth_test_per_class = 16;
  c.model.encoder_widths = {32};
  c.model.projector_widths = {16, 8};
  c.model.projector_scale = 1.0;
  c.probe.max_epochs = 50;
  c.threads = 1;
  return c;
}

std::string csv(const PretrainResult& r) {
  std::ostringstream os;
  write_metrics_csv(os, r.metrics, false);
  return os.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("zero epochs leaves the model at its initialization") {
  const RunConfig c = small(3, 0);
  const Dataset data = load_dataset(c);
  const PretrainResult r = pretrain(c, data.train);
  const ModelParams init = initial_params(c, data.train.front());
  const auto a = r.model.params.parameters(), b = init.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].value == *b[i].value);
  REQUIRE(r.metrics.size() == 1);
  CHECK(r.metrics[0].epoch == 0);
  CHECK(r.metrics[0].bias_value == -10.0);
  CHECK(r.steps == 0);
}

TEST_CASE("metrics layout and bias trajectory") {
  const RunConfig c = small(1, 3);
  const Dataset data = load_dataset(c);
  const PretrainResult r = pretrain(c, data.train);
  REQUIRE(r.metrics.size() == 4);
  CHECK(r.metrics[0].bias_value == -10.0);
  CHECK(r.metrics[0].learning_rate == 0.0);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(r.metrics[e].epoch == e);
    CHECK(std::isfinite(r.metrics[e].train_loss));
    CHECK(r.metrics[e].temperature_value == 5.0);
  }
  CHECK(r.metrics[3].bias_value != -10.0);
  CHECK(r.steps == 3 * (64 / 16));
  const std::string text = csv(r);
  CHECK(text.rfind("epoch,train_loss,learning_rate,bias_value,temperature_value\n", 0) == 0);
  std::ostringstream with_time;
  write_metrics_csv(with_time, r.metrics, true);
  CHECK(with_time.str().find(",wall_seconds\n") != std::string::npos);
}

TEST_CASE("runs are reproducible and independent of thread count") {
  RunConfig c = small(7, 2);
  const Dataset data = load_dataset(c);
  const PretrainResult a = pretrain(c, data.train);
  const PretrainResult b = pretrain(c, data.train);
  CHECK(csv(a) == csv(b));
  CHECK(a.first_epoch_view_hash == b.first_epoch_view_hash);
  c.threads = 4;
  const PretrainResult d = pretrain(c, data.train);
  CHECK(csv(a) == csv(d));
  const auto pa = a.model.params.parameters(), pd = d.model.params.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i].value == *pd[i].value);
  c.seed = 8;
  CHECK(csv(pretrain(c, data.train)) != csv(a));
}

TEST_CASE("both losses see the same augmentation stream") {
  RunConfig c = small(5, 1);
  const Dataset data = load_dataset(c);
  const PretrainResult s = pretrain(c, data.train);
  c.loss = LossKind::NtXent;
  const PretrainResult n = pretrain(c, data.train);
  CHECK(s.first_epoch_view_hash != 0);
  CHECK(s.first_epoch_view_hash == n.first_epoch_view_hash);
  CHECK(n.metrics.back().bias_value == -10.0);
}

TEST_CASE("chunked training tracks monolithic training") {
  RunConfig c = small(2, 2);
  const Dataset data = load_dataset(c);
  const PretrainResult mono = pretrain(c, data.train);
  c.devices = 4;
  const PretrainResult chunked = pretrain(c, data.train);
  for (std::size_t e = 0; e < mono.metrics.size(); ++e)
    CHECK(chunked.metrics[e].train_loss == doctest::Approx(mono.metrics[e].train_loss).epsilon(1e-9));
}

TEST_CASE("learnable temperature is logged as t") {
  RunConfig c = small(4, 2);
  c.loss_params.learnable_temperature = true;
  const Dataset data = load_dataset(c);
  const PretrainResult r = pretrain(c, data.train);
  CHECK(r.metrics[0].temperature_value == 5.0);
  CHECK(r.metrics.back().temperature_value != 5.0);
  CHECK(r.model.temperature() == r.metrics.back().temperature_value);
}

TEST_CASE("divergence and config errors") {
  RunConfig c = small(1, 1);
  const Dataset data = load_dataset(c);
  c.batch_size = 1000;
  CHECK_THROWS_AS(pretrain(c, data.train), ConfigError);
  c = small(1, 2);
  c.optim.base_lr = 1e300;
  c.optim.warmup_epochs = 0;
  c.optim.trust_coefficient = 1e300;
  try {
    pretrain(c, data.train);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch") != std::string::npos);
    CHECK(msg.find("bias") != std::string::npos);
    CHECK(msg.find("temperature") != std::string::npos);
  }
}

TEST_CASE("run directory, checkpoint reload and probe") {
  RunConfig c = small(6, 2);
  c.out_dir = std::filesystem::path(SIGCLR_TEST_TMP) / "trainer_run";
  std::filesystem::remove_all(c.out_dir);
  const Dataset data = load_dataset(c);
  const PretrainResult r = pretrain(c, data.train);
  write_run(c, r);
  for (const char* f : {"metrics.csv", "summary.json", "config.txt", "checkpoint.sgcl"})
    CHECK(std::filesystem::exists(c.out_dir / f));
  const std::string metrics = slurp(c.out_dir / "metrics.csv");
  CHECK(metrics.rfind(csv(r), 0) == 0);
  CHECK(metrics.find("# summary {") != std::string::npos);
  CHECK(to_config_text(load_config(c.out_dir / "config.txt")) == to_config_text(c));

  const TrainedModel m = load_trained(c, data.train.front(), c.out_dir / "checkpoint.sgcl");
  CHECK(m.bias() == static_cast<double>(static_cast<float>(r.model.bias())));
  const auto pa = m.params.parameters(), pb = r.model.params.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t k = 0; k < pa[i].value->size(); ++k)
      CHECK(pa[i].value->data()[k] == static_cast<double>(static_cast<float>(pb[i].value->data()[k])));
  // Re-encoding the reloaded tensors reproduces the file byte for byte.
  CHECK(encode_checkpoint(m.tensors()) == [&] {
    const std::string bytes = slurp(c.out_dir / "checkpoint.sgcl");
    return std::vector<std::uint8_t>(bytes.begin(), bytes.end());
  }());

  const ProbeResult probe = linear_eval(c, m.params, data);
  CHECK(probe.top1 >= 0.0);
  CHECK(probe.top1 <= 1.0);
  CHECK(probe.per_class.size() == 4);
}

TEST_CASE("probe features come from the encoder") {
  const RunConfig c = small(2, 0);
  const Dataset data = load_dataset(c);
  const ModelParams p = initial_params(c, data.train.front());
  const Matrix f = extract_features(c, p, data.test, false);
  CHECK(f.rows() == data.test.size());
  CHECK(f.cols() == 32);
  CHECK(f == extract_features(c, p, data.test, false));
}

TEST_CASE("sweeps") {
  RunConfig c = small(0, 1);
  c.out_dir = std::filesystem::path(SIGCLR_TEST_TMP) / "sweep";
  CHECK(sweep(c, {}).empty());
  const auto rows = sweep(c, {8, 16, 1000});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].ok);
  CHECK(rows[1].ok);
  CHECK_FALSE(rows[2].ok);
  CHECK_FALSE(rows[2].error.empty());
  CHECK(std::filesystem::exists(c.out_dir / "bs_8" / "metrics.csv"));
  const auto table = sweep_table(c, rows);
  CHECK(table["columns"].size() == 3);
  CHECK(table["rows"][0]["top1_percent"][2].is_null());
  CHECK(table["reference"]["sigclr"]["CIFAR-10"][1] == 91.77);
}

TEST_CASE("chunk bench rows") {
  const auto rows = chunk_bench(16, 8, {1, 2, 4}, LossParams{}, 3, 2);
  REQUIRE(rows.size() == 3);
  CHECK(rows[2].peak_block_elems == 64);
  CHECK(rows[2].monolithic_block_elems == 1024);
  CHECK(rows[2].exchanges == 12);
  for (const auto& r : rows) {
    CHECK(r.max_value_deviation <= 1e-9);
    CHECK(r.max_grad_deviation <= 1e-9);
  }
}
