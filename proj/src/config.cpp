// SPDX-License-Identifier: Apache-2.0
#include "sigclr/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "sigclr/errors.hpp"

namespace sigclr {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out))
    throw ConfigError(std::string(key) + ": expected a number, got '" + s + "'");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(std::string(key) + ": expected a boolean, got '" + std::string(v) + "'");
}

std::vector<std::size_t> to_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(to_size(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError(std::string(key) + ": expected a comma-separated list");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIGCLR_DOUBLE(name, field)                                                        \
  Entry {                                                                                 \
    name, [](RunConfig& c, std::string_view k, std::string_view v) { c.field = to_double(k, v); }, \
        [](const RunConfig& c) { return fmt(static_cast<double>(c.field)); }              \
  }
#define SIGCLR_SIZE(name, field)                                                          \
  Entry {                                                                                 \
    name, [](RunConfig& c, std::string_view k, std::string_view v) { c.field = to_size(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                        \
  }
#define SIGCLR_BOOL(name, field)                                                          \
  Entry {                                                                                 \
    name, [](RunConfig& c, std::string_view k, std::string_view v) { c.field = to_bool(k, v); }, \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }        \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"loss.kind",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "sigclr") c.loss = LossKind::SigClr;
         else if (v == "ntxent") c.loss = LossKind::NtXent;
         else throw ConfigError(std::string(k) + ": expected sigclr or ntxent");
       },
       [](const RunConfig& c) { return std::string(c.loss == LossKind::SigClr ? "sigclr" : "ntxent"); }},
      SIGCLR_DOUBLE("loss.temperature", loss_params.temperature),
      SIGCLR_DOUBLE("loss.bias", loss_params.bias),
      SIGCLR_BOOL("loss.learnable_temperature", loss_params.learnable_temperature),
      {"loss.temperature_space",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "log") c.loss_params.temperature_space = TemperatureSpace::Log;
         else if (v == "raw") c.loss_params.temperature_space = TemperatureSpace::Raw;
         else throw ConfigError(std::string(k) + ": expected log or raw");
       },
       [](const RunConfig& c) {
         return std::string(c.loss_params.temperature_space == TemperatureSpace::Log ? "log" : "raw");
       }},
      {"loss.normalization",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "per-row") c.loss_params.normalization = Normalization::PerRow;
         else if (v == "mean") c.loss_params.normalization = Normalization::Mean;
         else throw ConfigError(std::string(k) + ": expected per-row or mean");
       },
       [](const RunConfig& c) {
         return std::string(c.loss_params.normalization == Normalization::PerRow ? "per-row" : "mean");
       }},
      SIGCLR_DOUBLE("ntxent.temperature", ntxent_temperature),
      SIGCLR_DOUBLE("optim.base_lr", optim.base_lr),
      SIGCLR_DOUBLE("optim.momentum", optim.momentum),
      SIGCLR_DOUBLE("optim.weight_decay", optim.weight_decay),
      SIGCLR_DOUBLE("optim.trust_coefficient", optim.trust_coefficient),
      SIGCLR_DOUBLE("optim.eps", optim.eps),
      SIGCLR_DOUBLE("optim.warmup_epochs", optim.warmup_epochs),
      SIGCLR_SIZE("optim.reference_batch", optim.reference_batch),
      SIGCLR_DOUBLE("aug.crop_scale_min", augment.crop_scale_min),
      SIGCLR_DOUBLE("aug.crop_scale_max", augment.crop_scale_max),
      SIGCLR_DOUBLE("aug.crop_ratio_min", augment.crop_ratio_min),
      SIGCLR_DOUBLE("aug.crop_ratio_max", augment.crop_ratio_max),
      SIGCLR_DOUBLE("aug.flip_prob", augment.flip_prob),
      SIGCLR_DOUBLE("aug.jitter_prob", augment.jitter_prob),
      SIGCLR_DOUBLE("aug.brightness", augment.brightness),
      SIGCLR_DOUBLE("aug.contrast", augment.contrast),
      SIGCLR_DOUBLE("aug.saturation", augment.saturation),
      SIGCLR_DOUBLE("aug.hue", augment.hue),
      SIGCLR_DOUBLE("aug.grayscale_prob", augment.grayscale_prob),
      SIGCLR_DOUBLE("aug.blur_prob_a", augment.blur_prob_a),
      SIGCLR_DOUBLE("aug.blur_prob_b", augment.blur_prob_b),
      SIGCLR_DOUBLE("aug.blur_sigma_min", augment.blur_sigma_min),
      SIGCLR_DOUBLE("aug.blur_sigma_max", augment.blur_sigma_max),
      SIGCLR_SIZE("aug.output_size", augment.output_size),
      {"model.encoder_widths",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.model.encoder_widths = to_sizes(k, v); },
       [](const RunConfig& c) { return fmt(c.model.encoder_widths); }},
      {"model.projector_widths",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.model.projector_widths = to_sizes(k, v); },
       [](const RunConfig& c) { return fmt(c.model.projector_widths); }},
      SIGCLR_DOUBLE("model.projector_scale", model.projector_scale),
      {"data.source",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "synthetic") {
           c.data.source = DataConfig::Source::Synthetic;
         } else if (v.starts_with("cifar10:") && v.size() > 8) {
           c.data.source = DataConfig::Source::Cifar10;
           c.data.cifar_dir = std::string(v.substr(8));
         } else {
           throw ConfigError(std::string(k) + ": expected synthetic or cifar10:PATH");
         }
       },
       [](const RunConfig& c) {
         return c.data.source == DataConfig::Source::Synthetic ? std::string("synthetic")
                                                               : "cifar10:" + c.data.cifar_dir.string();
       }},
      SIGCLR_SIZE("data.classes", data.synth.classes),
      SIGCLR_SIZE("data.per_class", data.synth.per_class),
      SIGCLR_SIZE("data.test_per_class", data.synth_test_per_class),
      SIGCLR_SIZE("data.channels", data.synth.channels),
      SIGCLR_SIZE("data.height", data.synth.height),
      SIGCLR_SIZE("data.width", data.synth.width),
      SIGCLR_DOUBLE("data.separation", data.synth.separation),
      SIGCLR_DOUBLE("data.noise_sigma", data.synth.noise_sigma),
      {"data.seed",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "run") c.data.seed.reset();
         else c.data.seed = to_u64(k, v);
       },
       [](const RunConfig& c) { return c.data.seed ? std::to_string(*c.data.seed) : std::string("run"); }},
      SIGCLR_SIZE("train.epochs", epochs),
      SIGCLR_SIZE("train.batch_size", batch_size),
      SIGCLR_SIZE("train.devices", devices),
      {"train.seed",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.seed = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      SIGCLR_SIZE("train.threads", threads),
      SIGCLR_SIZE("probe.epochs", probe.max_epochs),
      SIGCLR_DOUBLE("probe.lr", probe.lr),
      SIGCLR_DOUBLE("probe.momentum", probe.momentum),
      SIGCLR_DOUBLE("probe.tolerance", probe.tolerance),
      SIGCLR_BOOL("probe.standardize", probe.standardize),
      {"output.dir",
       [](RunConfig& c, std::string_view, std::string_view v) { c.out_dir = std::string(v); },
       [](const RunConfig& c) { return c.out_dir.string(); }},
      SIGCLR_BOOL("metrics.wall_time", record_wall_time),
  };
  return table;
}

#undef SIGCLR_DOUBLE
#undef SIGCLR_SIZE
#undef SIGCLR_BOOL

}  // namespace

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  for (const auto& e : entries()) {
    if (key == e.key) {
      e.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    try {
      apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += std::string(e.key) + " = " + e.get(config) + "\n";
  return out;
}

void RunConfig::validate() const {
  try {
    if (!(loss_params.temperature > 0.0)) throw ConfigError("loss.temperature must be positive");
    if (!(ntxent_temperature > 0.0)) throw ConfigError("ntxent.temperature must be positive");
    if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
    if (devices == 0) throw ConfigError("train.devices must be >= 1");
    if ((2 * batch_size) % devices != 0)
      throw ConfigError("train.devices must divide 2 * train.batch_size");
    if (model.encoder_widths.empty()) throw ConfigError("model.encoder_widths must not be empty");
    if (model.projector_widths.empty()) throw ConfigError("model.projector_widths must not be empty");
    if (!(model.projector_scale > 0.0)) throw ConfigError("model.projector_scale must be positive");
    if (data.source == DataConfig::Source::Cifar10 && !std::filesystem::is_directory(data.cifar_dir))
      throw ConfigError("CIFAR-10 directory does not exist: " + data.cifar_dir.string());
    if (data.source == DataConfig::Source::Synthetic) {
      if (data.synth.classes < 2) throw ConfigError("data.classes must be >= 2");
      if (data.synth.channels * data.synth.height * data.synth.width < data.synth.classes)
        throw ConfigError("synthetic images need at least as many pixels as classes");
    }
    if (probe.max_epochs == 0) throw ConfigError("probe.epochs must be >= 1");
    augment.validate();
    optimizer().validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

OptimizerConfig RunConfig::optimizer() const {
  OptimizerConfig o = optim;
  o.total_epochs = static_cast<double>(epochs);
  o.batch_size = batch_size;
  // Short desk runs keep the warmup inside the schedule.
  if (o.warmup_epochs > o.total_epochs) o.warmup_epochs = o.total_epochs;
  return o;
}

RunConfig RunConfig::desk_default() { return RunConfig{}; }

RunConfig RunConfig::full_scale_preset(const std::filesystem::path& cifar_dir) {
  RunConfig c;
  c.data.source = DataConfig::Source::Cifar10;
  c.data.cifar_dir = cifar_dir;
  c.epochs = 1000;
  c.batch_size = 128;
  c.model.encoder_widths = {2048, 512};
  c.model.projector_widths = {1024, 1024, 128};
  c.model.projector_scale = 1.0;
  c.augment.output_size = kCifarSide;
  c.out_dir = "runs/cifar10_full";
  return c;
}

namespace {

std::size_t env_thread_cap() {
  if (const char* env = std::getenv("SIGCLR_THREADS")) {
    std::size_t n = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc{} && ptr == s.data() + s.size() && n > 0) return n;
  }
  return 0;
}

}  // namespace

std::size_t default_thread_count() {
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t cap = env_thread_cap();
  return cap > 0 ? cap : hw;
}

std::size_t resolved_threads(const RunConfig& config) {
  if (config.threads == 0) return default_thread_count();
  const std::size_t cap = env_thread_cap();
  return cap > 0 ? std::min(config.threads, cap) : config.threads;
}

}  // namespace sigclr
