// SPDX-License-Identifier: Apache-2.0
#include "sigclr/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <thread>

#include "sigclr/augment.hpp"
#include "sigclr/checkpoint.hpp"
#include "sigclr/chunked.hpp"
#include "sigclr/errors.hpp"
#include "sigclr/losses.hpp"
#include "sigclr/optim.hpp"
#include "sigclr/rng.hpp"

namespace sigclr {

namespace {

// Stream tags keep init, shuffling, augmentation and probe draws independent.
constexpr std::uint64_t kInitStream = 0x1A17;
constexpr std::uint64_t kShuffleStream = 0x5F1E;
constexpr std::uint64_t kAugmentStream = 0xA06E;
constexpr std::uint64_t kProbeStream = 0x960B;

constexpr std::size_t kEncodeChunk = 1024;

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class LossEngine {
 public:
  LossEngine(const RunConfig& config, std::size_t threads)
      : config_(config),
        masks_(build_masks(config.batch_size)),
        plan_(plan_shards(config.batch_size, config.devices)),
        threads_(threads) {}

  LossOutput operator()(const Matrix& embeddings, const LossParams& params) const {
    EmbeddingBatch batch(embeddings);
    if (config_.loss == LossKind::NtXent) return ntxent_loss(batch, config_.ntxent_temperature, params.eps);
    if (config_.devices == 1) return sigclr_loss(batch, masks_, params);
    return chunked_sigclr_loss(batch, params, plan_, ChunkedOptions{threads_, false}).loss;
  }

 private:
  const RunConfig& config_;
  PairMasks masks_;
  ShardPlan plan_;
  std::size_t threads_;
};

Matrix build_views(const RunConfig& config, const std::vector<ImageRecord>& data,
                   std::span<const std::size_t> indices, std::size_t epoch, std::size_t threads) {
  const std::size_t n = indices.size();
  std::vector<std::pair<Matrix, Matrix>> views(n);
  const std::uint64_t aug_seed = derive_seed(config.seed, kAugmentStream);
  parallel_for(n, threads, [&](std::size_t i) {
    const std::size_t r = indices[i];
    Rng rng(derive_seed(aug_seed, r, epoch));
    views[i] = two_views(data[r], config.augment, rng);
  });
  const std::size_t dim = views[0].first.cols();
  Matrix out(2 * n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(views[i].first.data().begin(), views[i].first.data().end(), out.row(i).begin());
    std::copy(views[i].second.data().begin(), views[i].second.data().end(), out.row(n + i).begin());
  }
  return out;
}

std::vector<std::size_t> epoch_order(const RunConfig& config, std::size_t size, std::size_t epoch) {
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, kShuffleStream, epoch));
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

}  // namespace

std::vector<ConstTensorRef> TrainedModel::tensors() const {
  auto out = params.parameters();
  out.push_back({"loss.bias", &loss_bias});
  out.push_back({"loss.temperature", &loss_temperature});
  return out;
}

std::vector<TensorRef> TrainedModel::tensors() {
  auto out = params.parameters();
  out.push_back({"loss.bias", &loss_bias, nullptr});
  out.push_back({"loss.temperature", &loss_temperature, nullptr});
  return out;
}

Dataset load_dataset(const RunConfig& config) {
  Dataset ds;
  if (config.data.source == DataConfig::Source::Cifar10) {
    ds.train = read_cifar10_split(config.data.cifar_dir, true);
    ds.test = read_cifar10_split(config.data.cifar_dir, false);
    ds.classes = 10;
    return ds;
  }
  SynthSpec spec = config.data.synth;
  spec.seed = config.data_seed();
  ds.train = synth_clusters(spec, 0);
  spec.per_class = config.data.synth_test_per_class;
  ds.test = synth_clusters(spec, 1);
  ds.classes = spec.classes;
  return ds;
}

ModelSpec model_spec_for(const RunConfig& config, const ImageRecord& sample) {
  const std::size_t side = config.augment.output_size ? config.augment.output_size : sample.image.height;
  std::vector<std::size_t> projector;
  for (std::size_t w : config.model.projector_widths) {
    const auto scaled = static_cast<std::size_t>(std::lround(static_cast<double>(w) * config.model.projector_scale));
    projector.push_back(std::max<std::size_t>(1, scaled));
  }
  return ModelSpec::mlp(sample.image.channels * side * side, config.model.encoder_widths, projector);
}

ModelParams initial_params(const RunConfig& config, const ImageRecord& sample) {
  return init_params(model_spec_for(config, sample), derive_seed(config.seed, kInitStream));
}

PretrainResult pretrain(const RunConfig& config, const std::vector<ImageRecord>& train, std::ostream* log) {
  config.validate();
  const std::size_t n = config.batch_size;
  if (train.size() < n) {
    throw ConfigError("batch size " + std::to_string(n) + " exceeds dataset size " +
                      std::to_string(train.size()));
  }
  const std::size_t steps_per_epoch = train.size() / n;  // drop-last
  const std::size_t threads = resolved_threads(config);
  const OptimizerConfig opt_config = config.optimizer();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  PretrainResult result;
  TrainedModel& model = result.model;
  model.params = initial_params(config, train.front());
  model.loss_bias(0, 0) = config.loss_params.bias;
  model.loss_temperature(0, 0) = config.loss_params.temperature;

  const bool learn_t = config.loss == LossKind::SigClr && config.loss_params.learnable_temperature;
  const bool log_t = config.loss_params.temperature_space == TemperatureSpace::Log;
  Matrix temp_param(1, 1, log_t ? std::log(config.loss_params.temperature) : config.loss_params.temperature);
  Matrix grad_bias(1, 1);
  Matrix grad_temp(1, 1);

  OptimizerConfig lars_config = opt_config;
  for (const auto& p : model.params.parameters())
    if (p.name.ends_with(".bias")) lars_config.lars_excluded.insert(p.name);
  lars_config.lars_excluded.insert("loss.bias");
  lars_config.lars_excluded.insert("loss.temperature");
  Lars lars(lars_config);

  auto trainable = [&] {
    std::vector<TensorRef> refs = model.params.parameters();
    if (config.loss == LossKind::SigClr) refs.push_back({"loss.bias", &model.loss_bias, &grad_bias});
    if (learn_t) refs.push_back({"loss.temperature", &temp_param, &grad_temp});
    return refs;
  };
  auto current_loss_params = [&] {
    LossParams lp = config.loss_params;
    lp.bias = model.loss_bias(0, 0);
    // Before the first step the configured t is used verbatim, not exp(log t).
    lp.temperature = learn_t && result.steps > 0 ? (log_t ? std::exp(temp_param(0, 0)) : temp_param(0, 0))
                                                 : config.loss_params.temperature;
    lp.keep_pair_terms = false;
    return lp;
  };

  const LossEngine loss_fn(config, threads);
  auto diverged = [&](std::size_t epoch, std::size_t batch, const LossParams& lp,
                      const std::string& what = "non-finite loss") {
    return DivergenceError(what + " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                           " (bias " + fmt(lp.bias) + ", temperature " + fmt(lp.temperature) + ")");
  };
  // Non-finite or collapsed embeddings are reported as divergence, not as bad input.
  auto evaluate = [&](const Matrix& embeddings, const LossParams& lp, std::size_t epoch, std::size_t batch) {
    if (!all_finite(embeddings.data())) throw diverged(epoch, batch, lp, "non-finite embeddings");
    try {
      return loss_fn(embeddings, lp);
    } catch (const DegenerateEmbedding& e) {
      throw diverged(epoch, batch, lp, e.what());
    }
  };

  // Epoch 0: the untrained model, evaluated on its own augmentation stream.
  {
    const auto order = epoch_order(config, train.size(), 0);
    const LossParams lp = current_loss_params();
    double total = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const Matrix views = build_views(config, train, std::span(order).subspan(b * n, n), 0, threads);
      const ForwardResult fwd = forward(model.params, views);
      const double value = evaluate(fwd.projector_out, lp, 0, b).value;
      if (!std::isfinite(value)) throw diverged(0, b, lp);
      total += value;
    }
    result.metrics.push_back({0, total / static_cast<double>(steps_per_epoch), lr_at(opt_config, 0.0),
                              lp.bias, lp.temperature, elapsed()});
  }

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(config, train.size(), epoch);
    Fnv1a hash;
    double total = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const Matrix views = build_views(config, train, std::span(order).subspan(b * n, n), epoch, threads);
      if (epoch == 1) hash.update(views.data());
      const LossParams lp = current_loss_params();
      const ForwardResult fwd = forward(model.params, views);
      const LossOutput loss = evaluate(fwd.projector_out, lp, epoch, b);
      if (!std::isfinite(loss.value)) throw diverged(epoch, b, lp);
      total += loss.value;
      backward(model.params, fwd.cache, loss.grad_embeddings);
      grad_bias(0, 0) = loss.grad_bias;
      grad_temp(0, 0) = loss.grad_temperature;

      const double fraction = static_cast<double>(epoch - 1) +
                              static_cast<double>(b) / static_cast<double>(steps_per_epoch);
      lr = lr_at(opt_config, fraction);
      try {
        lars.step(trainable(), lr);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b) + " (bias " + fmt(lp.bias) + ", temperature " +
                              fmt(lp.temperature) + ")");
      }
      ++result.steps;
    }
    if (epoch == 1) result.first_epoch_view_hash = hash.digest();
    const LossParams lp = current_loss_params();
    if (learn_t && !(lp.temperature > 0.0 && std::isfinite(lp.temperature)))
      throw diverged(epoch, steps_per_epoch - 1, lp);
    model.loss_temperature(0, 0) = lp.temperature;
    result.metrics.push_back({epoch, total / static_cast<double>(steps_per_epoch), lr, lp.bias,
                              lp.temperature, elapsed()});
    if (log) {
      const auto& row = result.metrics.back();
      *log << "epoch " << row.epoch << " loss " << fmt(row.train_loss) << " lr " << fmt(row.learning_rate)
           << " bias " << fmt(row.bias_value) << " t " << fmt(row.temperature_value) << "\n";
    }
  }
  return result;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows, bool wall_time) {
  os << "epoch,train_loss,learning_rate,bias_value,temperature_value";
  if (wall_time) os << ",wall_seconds";
  os << "\n";
  for (const auto& r : rows) {
    os << r.epoch << "," << fmt(r.train_loss) << "," << fmt(r.learning_rate) << "," << fmt(r.bias_value)
       << "," << fmt(r.temperature_value);
    if (wall_time) os << "," << fmt(r.wall_seconds);
    os << "\n";
  }
}

nlohmann::json summary_json(const RunConfig& config, const PretrainResult& result) {
  nlohmann::json j;
  j["loss"] = config.loss == LossKind::SigClr ? "sigclr" : "ntxent";
  j["seed"] = config.seed;
  j["epochs"] = config.epochs;
  j["batch_size"] = config.batch_size;
  j["devices"] = config.devices;
  j["steps"] = result.steps;
  j["initial_loss"] = result.metrics.front().train_loss;
  j["final_loss"] = result.metrics.back().train_loss;
  j["final_bias"] = result.model.bias();
  j["final_temperature"] = result.model.temperature();
  j["first_epoch_view_hash"] = hex(result.first_epoch_view_hash);
  return j;
}

void write_run(const RunConfig& config, const PretrainResult& result) {
  std::filesystem::create_directories(config.out_dir);
  {
    std::ofstream os(config.out_dir / "metrics.csv", std::ios::trunc);
    write_metrics_csv(os, result.metrics, config.record_wall_time);
    os << "# summary " << summary_json(config, result).dump() << "\n";
  }
  {
    std::ofstream os(config.out_dir / "summary.json", std::ios::trunc);
    os << summary_json(config, result).dump(2) << "\n";
  }
  {
    std::ofstream os(config.out_dir / "config.txt", std::ios::trunc);
    os << to_config_text(config);
  }
  const auto tensors = result.model.tensors();
  write_checkpoint(config.out_dir / "checkpoint.sgcl", tensors);
}

TrainedModel load_trained(const RunConfig& config, const ImageRecord& sample,
                          const std::filesystem::path& checkpoint) {
  TrainedModel model;
  model.params = init_params(model_spec_for(config, sample), 0);
  const auto stored = read_checkpoint(checkpoint);
  load_into(model.tensors(), stored);
  return model;
}

Matrix extract_features(const RunConfig& config, const ModelParams& params,
                        const std::vector<ImageRecord>& records, bool train_phase) {
  if (records.empty()) throw InvalidArgument("extract_features: no records");
  const std::size_t threads = resolved_threads(config);
  const std::uint64_t probe_seed = derive_seed(config.seed, kProbeStream);
  std::vector<Matrix> rows(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    Rng rng(derive_seed(probe_seed, i));
    rows[i] = eval_transform(records[i], train_phase, config.augment, &rng);
  });
  const std::size_t width = rows.front().cols();
  Matrix features(records.size(), params.encoder.back().spec.out_dim);
  for (std::size_t begin = 0; begin < records.size(); begin += kEncodeChunk) {
    const std::size_t count = std::min(kEncodeChunk, records.size() - begin);
    Matrix images(count, width);
    for (std::size_t i = 0; i < count; ++i)
      std::copy(rows[begin + i].data().begin(), rows[begin + i].data().end(), images.row(i).begin());
    const Matrix h = encode(params, images);
    std::copy(h.data().begin(), h.data().end(), features.row(begin).begin());
  }
  return features;
}

ProbeResult linear_eval(const RunConfig& config, const ModelParams& params, const Dataset& data) {
  auto labels_of = [](const std::vector<ImageRecord>& recs) {
    std::vector<std::size_t> out;
    out.reserve(recs.size());
    for (const auto& r : recs) out.push_back(r.label);
    return out;
  };
  const Matrix train_features = extract_features(config, params, data.train, true);
  const Matrix test_features = extract_features(config, params, data.test, false);
  const auto train_labels = labels_of(data.train);
  const auto test_labels = labels_of(data.test);
  const LinearProbe probe = fit_linear_probe(train_features, train_labels, data.classes, config.probe);
  return top1(probe, test_features, test_labels);
}

std::vector<SweepRow> sweep(const RunConfig& config, const std::vector<std::size_t>& batch_sizes,
                            std::ostream* log) {
  std::vector<SweepRow> rows;
  if (batch_sizes.empty()) return rows;
  const Dataset data = load_dataset(config);
  for (std::size_t bs : batch_sizes) {
    SweepRow row;
    row.batch_size = bs;
    try {
      RunConfig run = config;
      run.batch_size = bs;
      run.out_dir = config.out_dir / ("bs_" + std::to_string(bs));
      if (log) *log << "sweep: batch size " << bs << "\n";
      const PretrainResult result = pretrain(run, data.train, log);
      write_run(run, result);
      row.final_loss = result.metrics.back().train_loss;
      row.probe = linear_eval(run, result.model.params, data);
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json sweep_table(const RunConfig& config, const std::vector<SweepRow>& rows) {
  const std::string dataset = config.data.source == DataConfig::Source::Cifar10 ? "CIFAR-10" : "synthetic";
  nlohmann::json columns = nlohmann::json::array();
  nlohmann::json top1s = nlohmann::json::array();
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : rows) {
    columns.push_back(r.batch_size);
    top1s.push_back(r.probe ? nlohmann::json(100.0 * r.probe->top1) : nlohmann::json(nullptr));
    nlohmann::json run{{"batch_size", r.batch_size}, {"ok", r.ok}};
    if (r.ok) {
      run["final_loss"] = r.final_loss;
      run["probe"] = to_json(*r.probe);
    } else {
      run["error"] = r.error;
    }
    runs.push_back(std::move(run));
  }
  nlohmann::json table;
  table["loss"] = config.loss == LossKind::SigClr ? "sigclr" : "ntxent";
  table["columns"] = columns;
  table["rows"] = nlohmann::json::array({{{"dataset", dataset}, {"top1_percent", top1s}}});
  table["runs"] = runs;
  // Published full-scale numbers (ResNet-18, 1000 epochs). Documentation only.
  table["reference"] = {
      {"note", "full-scale ResNet-18 / 1000-epoch top-1 (%); not reproduced at desk scale"},
      {"columns", {64, 128, 256, 512, 1024}},
      {"sigclr",
       {{"CIFAR-10", {91.26, 91.77, 92.11, 92.59, 92.62}},
        {"CIFAR-100", {66.52, 66.98, 67.86, 68.57, 68.58}},
        {"Tiny-IN", {47.53, 48.94, 49.62, 50.56, 51.54}}}},
      {"ntxent",
       {{"CIFAR-10", {90.56, 91.69, 92.23, 92.42, 92.26}},
        {"CIFAR-100", {62.85, 65.49, 66.67, 67.26, 66.49}},
        {"Tiny-IN", {46.08, 48.16, 49.92, 49.16, 49.94}}}},
  };
  return table;
}

std::vector<ChunkBenchRow> chunk_bench(std::size_t pairs, std::size_t dim,
                                       const std::vector<std::size_t>& devices,
                                       const LossParams& params, std::uint64_t seed,
                                       std::size_t threads) {
  Rng rng(seed);
  Matrix emb(2 * pairs, dim);
  for (double& v : emb.data()) v = rng.normal();
  const EmbeddingBatch batch(emb);
  LossParams lp = params;
  lp.keep_pair_terms = false;
  const LossOutput mono = sigclr_loss(batch, build_masks(pairs), lp);

  std::vector<ChunkBenchRow> rows;
  for (std::size_t d : devices) {
    const ShardPlan plan = plan_shards(pairs, d);
    const auto t0 = std::chrono::steady_clock::now();
    const ChunkedOutput out = chunked_sigclr_loss(batch, lp, plan, ChunkedOptions{threads, false});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ChunkBenchRow row;
    row.devices = d;
    row.wall_seconds = secs;
    for (const auto& dev : out.devices) row.peak_block_elems = std::max(row.peak_block_elems, dev.peak_block_elems);
    row.monolithic_block_elems = 4 * pairs * pairs;
    row.exchanges = chunk_exchange_count(plan);
    row.max_value_deviation = std::abs(out.loss.value - mono.value);
    row.max_grad_deviation = std::max({max_abs_diff(out.loss.grad_embeddings, mono.grad_embeddings),
                                       std::abs(out.loss.grad_bias - mono.grad_bias),
                                       std::abs(out.loss.grad_temperature - mono.grad_temperature)});
    rows.push_back(row);
  }
  return rows;
}

}  // namespace sigclr
