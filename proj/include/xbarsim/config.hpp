#ifndef XBARSIM_CONFIG_HPP
#define XBARSIM_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbarsim/cost.hpp"
#include "xbarsim/dataset.hpp"
#include "xbarsim/device.hpp"
#include "xbarsim/network.hpp"
#include "xbarsim/tune.hpp"
#include "xbarsim/xbar.hpp"

namespace xbarsim {

using json = nlohmann::json;

/// Raised for malformed configuration; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace cfg_detail {

inline void require_object(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
}

/// Unknown keys are rejected so typos never silently fall back to defaults.
inline void check_keys(const json& j, const std::string& ctx,
                       const std::set<std::string>& allowed) {
  require_object(j, ctx);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError(ctx + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& ctx) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(ctx + ": bad value for '" + key + "'");
  }
}

template <typename T>
T get_req(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) throw ConfigError(ctx + ": missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(ctx + ": bad value for '" + key + "'");
  }
}

inline json load_json_file(const std::filesystem::path& path, const std::string& ctx) {
  std::ifstream is(path);
  if (!is) throw ConfigError(ctx + ": cannot open " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError(ctx + ": invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace cfg_detail

// ---------------------------------------------------------------------------
// Device
// ---------------------------------------------------------------------------

inline DeviceSpec device_from_json(const json& j, const std::string& ctx = "device") {
  cfg_detail::check_keys(j, ctx, {"name", "bits", "r_on_ohm", "on_off_ratio", "nu", "read_noise"});
  DeviceSpec d;
  d.name = cfg_detail::get_req<std::string>(j, "name", ctx);
  d.bits = cfg_detail::get_or<int>(j, "bits", 4, ctx);
  d.r_on_ohm = cfg_detail::get_req<double>(j, "r_on_ohm", ctx);
  d.on_off_ratio = cfg_detail::get_req<double>(j, "on_off_ratio", ctx);
  d.nu = cfg_detail::get_req<double>(j, "nu", ctx);
  const json& rn = j.contains("read_noise") ? j.at("read_noise") : json::object();
  const std::string rctx = ctx + ".read_noise";
  cfg_detail::check_keys(rn, rctx, {"type", "sigma", "a", "b"});
  const std::string type = cfg_detail::get_or<std::string>(rn, "type", "fractional", rctx);
  if (type == "fractional") {
    d.read_noise = FractionalNoise{cfg_detail::get_or<double>(rn, "sigma", 0.0, rctx)};
  } else if (type == "affine") {
    d.read_noise = AffineNoise{cfg_detail::get_req<double>(rn, "a", rctx),
                               cfg_detail::get_req<double>(rn, "b", rctx)};
  } else {
    throw ConfigError(rctx + ": type must be 'fractional' or 'affine'");
  }
  try {
    d.validate();
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return d;
}

inline json device_to_json(const DeviceSpec& d) {
  json rn;
  if (const auto* f = std::get_if<FractionalNoise>(&d.read_noise))
    rn = {{"type", "fractional"}, {"sigma", f->sigma}};
  else {
    const auto& a = std::get<AffineNoise>(d.read_noise);
    rn = {{"type", "affine"}, {"a", a.a}, {"b", a.b}};
  }
  return {{"name", d.name}, {"bits", d.bits},         {"r_on_ohm", d.r_on_ohm},
          {"on_off_ratio", d.on_off_ratio}, {"nu", d.nu}, {"read_noise", rn}};
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

inline json network_to_json(const NetworkSpec& s) {
  json layers = json::array();
  for (const auto& d : s.layers) {
    switch (d.kind) {
      case LayerKind::Conv:
        layers.push_back({{"type", "conv"},
                          {"out_channels", d.out_channels},
                          {"kernel", d.kernel},
                          {"stride", d.stride},
                          {"pad", d.pad}});
        break;
      case LayerKind::BatchNorm:
        layers.push_back({{"type", "bn"}});
        break;
      case LayerKind::ReLU:
        layers.push_back({{"type", "relu"}});
        break;
      case LayerKind::MaxPool:
        layers.push_back({{"type", "maxpool"}, {"window", d.window}, {"stride", d.pool_stride}});
        break;
      case LayerKind::AvgPool:
        layers.push_back({{"type", "avgpool"}, {"window", d.window}, {"stride", d.pool_stride}});
        break;
      case LayerKind::Fc:
        layers.push_back({{"type", "fc"}, {"out_features", d.out_features}});
        break;
    }
  }
  return {{"name", s.name},
          {"input_shape", s.input_shape},
          {"num_classes", s.num_classes},
          {"layers", layers}};
}

inline NetworkSpec network_from_json(const json& j, const std::string& ctx = "network") {
  cfg_detail::check_keys(j, ctx, {"name", "input_shape", "num_classes", "layers"});
  NetworkSpec s;
  s.name = cfg_detail::get_or<std::string>(j, "name", "custom", ctx);
  s.input_shape = cfg_detail::get_req<std::vector<std::int64_t>>(j, "input_shape", ctx);
  s.num_classes = cfg_detail::get_req<std::int64_t>(j, "num_classes", ctx);
  if (!j.contains("layers") || !j.at("layers").is_array())
    throw ConfigError(ctx + ": missing 'layers' array");
  for (const auto& lj : j.at("layers")) {
    const std::string lctx = ctx + ".layers";
    const std::string type = cfg_detail::get_req<std::string>(lj, "type", lctx);
    if (type == "conv") {
      cfg_detail::check_keys(lj, lctx, {"type", "out_channels", "kernel", "stride", "pad"});
      s.layers.push_back(LayerDesc::conv(cfg_detail::get_req<std::int64_t>(lj, "out_channels", lctx),
                                         cfg_detail::get_req<std::int64_t>(lj, "kernel", lctx),
                                         cfg_detail::get_or<std::int64_t>(lj, "stride", 1, lctx),
                                         cfg_detail::get_or<std::int64_t>(lj, "pad", 0, lctx)));
    } else if (type == "bn") {
      cfg_detail::check_keys(lj, lctx, {"type"});
      s.layers.push_back(LayerDesc::bn());
    } else if (type == "relu") {
      cfg_detail::check_keys(lj, lctx, {"type"});
      s.layers.push_back(LayerDesc::relu());
    } else if (type == "maxpool" || type == "avgpool") {
      cfg_detail::check_keys(lj, lctx, {"type", "window", "stride"});
      const auto w = cfg_detail::get_req<std::int64_t>(lj, "window", lctx);
      const auto st = cfg_detail::get_or<std::int64_t>(lj, "stride", w, lctx);
      s.layers.push_back(type == "maxpool" ? LayerDesc::maxpool(w, st) : LayerDesc::avgpool(w, st));
    } else if (type == "fc") {
      cfg_detail::check_keys(lj, lctx, {"type", "out_features"});
      s.layers.push_back(LayerDesc::fc(cfg_detail::get_req<std::int64_t>(lj, "out_features", lctx)));
    } else {
      throw ConfigError(lctx + ": unknown layer type '" + type + "'");
    }
  }
  try {
    s.infer_shapes();
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return s;
}

/// "smallconv" or {"file": path} or an inline spec object.
inline NetworkSpec network_from_config(const json& j, const std::string& ctx = "network") {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "smallconv") return smallconv_spec();
    throw ConfigError(ctx + ": unknown network preset '" + name + "'");
  }
  cfg_detail::require_object(j, ctx);
  if (j.contains("file")) {
    cfg_detail::check_keys(j, ctx, {"file"});
    return network_from_json(
        cfg_detail::load_json_file(cfg_detail::get_req<std::string>(j, "file", ctx), ctx), ctx);
  }
  return network_from_json(j, ctx);
}

// ---------------------------------------------------------------------------
// Quant / crossbar / noise
// ---------------------------------------------------------------------------

inline QuantSpec quant_from_json(const json& j, const std::string& ctx = "quant") {
  cfg_detail::check_keys(j, ctx, {"weight_bits", "slice_bits", "act_bits"});
  QuantSpec q;
  q.weight_bits = cfg_detail::get_or<int>(j, "weight_bits", 8, ctx);
  q.slice_bits = cfg_detail::get_or<int>(j, "slice_bits", 4, ctx);
  q.act_bits = cfg_detail::get_or<int>(j, "act_bits", 8, ctx);
  try {
    q.validate();
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return q;
}

inline XbarConfig xbar_from_json(const json& j, const std::string& ctx = "xbar") {
  cfg_detail::check_keys(j, ctx, {"rows", "cols", "rdriver_ohm", "rwire_row_ohm", "rwire_col_ohm", "rsense_ohm"});
  XbarConfig x;
  x.rows = cfg_detail::get_or<int>(j, "rows", 64, ctx);
  x.cols = cfg_detail::get_or<int>(j, "cols", 64, ctx);
  x.rdriver_ohm = cfg_detail::get_or<double>(j, "rdriver_ohm", 1000.0, ctx);
  x.rwire_row_ohm = cfg_detail::get_or<double>(j, "rwire_row_ohm", 5.0, ctx);
  x.rwire_col_ohm = cfg_detail::get_or<double>(j, "rwire_col_ohm", 10.0, ctx);
  x.rsense_ohm = cfg_detail::get_or<double>(j, "rsense_ohm", 1000.0, ctx);
  try {
    x.validate();
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return x;
}

inline NoiseConfig noise_from_json(const json& j, const std::string& ctx = "noise") {
  cfg_detail::check_keys(j, ctx, {"read_noise", "drift", "parasitics", "clamp_nonneg"});
  NoiseConfig n;
  n.read_noise = cfg_detail::get_or<bool>(j, "read_noise", false, ctx);
  n.parasitics = cfg_detail::get_or<bool>(j, "parasitics", false, ctx);
  n.clamp_nonneg = cfg_detail::get_or<bool>(j, "clamp_nonneg", false, ctx);
  if (j.contains("drift")) {
    const json& dj = j.at("drift");
    if (dj.is_boolean()) {
      n.drift = dj.get<bool>();
      if (n.drift) throw ConfigError(ctx + ".drift: enabling drift requires {\"T\": seconds}");
    } else {
      const std::string dctx = ctx + ".drift";
      cfg_detail::check_keys(dj, dctx, {"T", "T0"});
      n.drift = true;
      n.drift_cfg.t_seconds = cfg_detail::get_req<double>(dj, "T", dctx);
      n.drift_cfg.t0_seconds = cfg_detail::get_or<double>(dj, "T0", 1.0, dctx);
    }
  }
  try {
    n.validate();
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return n;
}

// ---------------------------------------------------------------------------
// Tuning / dataset / experiment
// ---------------------------------------------------------------------------

enum class TuneMode { None, Adapt, Finetune };

inline TuneMode tune_mode_from_string(const std::string& s, const std::string& ctx) {
  if (s == "none") return TuneMode::None;
  if (s == "adapt") return TuneMode::Adapt;
  if (s == "finetune") return TuneMode::Finetune;
  throw ConfigError(ctx + ": mode must be none|adapt|finetune, got '" + s + "'");
}

inline const char* tune_mode_name(TuneMode m) {
  switch (m) {
    case TuneMode::None: return "none";
    case TuneMode::Adapt: return "adapt";
    case TuneMode::Finetune: return "finetune";
  }
  return "?";
}

inline AdaptConfig adapt_from_json(const json& j, const std::string& ctx = "adapt") {
  cfg_detail::check_keys(j, ctx, {"num_samples", "batch_size", "momentum", "cumulative"});
  AdaptConfig a;
  a.num_samples = cfg_detail::get_or<std::int64_t>(j, "num_samples", 0, ctx);
  a.batch_size = cfg_detail::get_or<int>(j, "batch_size", 32, ctx);
  a.momentum = cfg_detail::get_or<float>(j, "momentum", 0.1f, ctx);
  a.cumulative = cfg_detail::get_or<bool>(j, "cumulative", false, ctx);
  try {
    a.validate();
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return a;
}

inline FinetuneConfig finetune_from_json(const json& j, const std::string& ctx = "finetune") {
  cfg_detail::check_keys(j, ctx, {"epochs", "lr0", "decay_factor", "decay_every", "batch_size",
                                  "seed", "freeze_running_stats"});
  FinetuneConfig f;
  f.epochs = cfg_detail::get_or<int>(j, "epochs", 5, ctx);
  f.lr0 = cfg_detail::get_or<double>(j, "lr0", 0.01, ctx);
  f.decay_factor = cfg_detail::get_or<double>(j, "decay_factor", 5.0, ctx);
  f.decay_every = cfg_detail::get_or<int>(j, "decay_every", 2, ctx);
  f.batch_size = cfg_detail::get_or<int>(j, "batch_size", 32, ctx);
  f.seed = cfg_detail::get_or<std::uint64_t>(j, "seed", 0, ctx);
  f.freeze_running_stats = cfg_detail::get_or<bool>(j, "freeze_running_stats", false, ctx);
  try {
    f.validate();
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return f;
}

inline SyntheticDatasetSpec synthetic_from_json(const json& j, const std::string& ctx) {
  cfg_detail::check_keys(j, ctx, {"classes", "train_per_class", "test_per_class", "channels",
                                  "height", "width", "noise", "seed"});
  SyntheticDatasetSpec s;
  s.classes = cfg_detail::get_or<int>(j, "classes", s.classes, ctx);
  s.train_per_class = cfg_detail::get_or<int>(j, "train_per_class", s.train_per_class, ctx);
  s.test_per_class = cfg_detail::get_or<int>(j, "test_per_class", s.test_per_class, ctx);
  s.channels = cfg_detail::get_or<int>(j, "channels", s.channels, ctx);
  s.height = cfg_detail::get_or<int>(j, "height", s.height, ctx);
  s.width = cfg_detail::get_or<int>(j, "width", s.width, ctx);
  s.noise = cfg_detail::get_or<double>(j, "noise", s.noise, ctx);
  s.seed = cfg_detail::get_or<std::uint64_t>(j, "seed", s.seed, ctx);
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return s;
}

struct DatasetFiles {
  std::string train_images, train_labels, test_images, test_labels;
};

struct DatasetConfig {
  bool synthetic = true;
  SyntheticDatasetSpec synth;
  DatasetFiles files;
};

inline DatasetConfig dataset_from_json(const json& j, const std::string& ctx = "dataset") {
  cfg_detail::check_keys(j, ctx, {"synthetic", "files"});
  DatasetConfig d;
  if (j.contains("files")) {
    if (j.contains("synthetic")) throw ConfigError(ctx + ": give either 'synthetic' or 'files'");
    const std::string fctx = ctx + ".files";
    const json& fj = j.at("files");
    cfg_detail::check_keys(fj, fctx, {"train_images", "train_labels", "test_images", "test_labels"});
    d.synthetic = false;
    d.files.train_images = cfg_detail::get_req<std::string>(fj, "train_images", fctx);
    d.files.train_labels = cfg_detail::get_req<std::string>(fj, "train_labels", fctx);
    d.files.test_images = cfg_detail::get_req<std::string>(fj, "test_images", fctx);
    d.files.test_labels = cfg_detail::get_req<std::string>(fj, "test_labels", fctx);
  } else {
    d.synth = synthetic_from_json(j.contains("synthetic") ? j.at("synthetic") : json::object(),
                                  ctx + ".synthetic");
  }
  return d;
}

/// One sweep entry overrides parts of the base deployment configuration.
struct SweepEntry {
  std::optional<double> sigma;       // fractional read-noise override
  std::optional<double> t_seconds;   // drift time override (enables drift)
  std::optional<bool> parasitics;
  std::optional<bool> read_noise;
};

struct ExperimentConfig {
  NetworkSpec network;
  DatasetConfig dataset;
  DeviceSpec device;
  QuantSpec quant;
  XbarConfig xbar;
  NoiseConfig noise;  // per-run seed filled from `seeds`
  bool act_quant = true;
  TuneMode mode = TuneMode::None;
  AdaptConfig adapt;
  FinetuneConfig finetune;
  PretrainConfig pretrain;
  std::vector<std::uint64_t> seeds{1};
  std::string checkpoint;  // directory, required by deploy
  bool dump = false;
  std::vector<SweepEntry> sweep;
};

inline DeviceSpec find_device_checked(const std::string& name, const std::string& ctx) {
  try {
    return find_device(name);
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
}

inline DeviceSpec device_from_config(const json& j, const std::string& ctx = "device") {
  if (j.is_string()) return find_device_checked(j.get<std::string>(), ctx);
  cfg_detail::require_object(j, ctx);
  cfg_detail::check_keys(j, ctx, {"name", "file", "sigma", "bits", "r_on_ohm", "on_off_ratio",
                                  "nu", "read_noise"});
  DeviceSpec d;
  if (j.contains("file")) {
    for (const char* k : {"bits", "r_on_ohm", "on_off_ratio", "nu", "read_noise"})
      if (j.contains(k)) throw ConfigError(ctx + ": '" + k + "' conflicts with 'file'");
    d = device_from_json(cfg_detail::load_json_file(
                             cfg_detail::get_req<std::string>(j, "file", ctx), ctx), ctx);
  } else if (j.contains("r_on_ohm")) {
    json dj = j;
    dj.erase("sigma");
    d = device_from_json(dj, ctx);
  } else {
    d = find_device_checked(cfg_detail::get_req<std::string>(j, "name", ctx), ctx);
  }
  if (j.contains("sigma")) {
    const double s = cfg_detail::get_req<double>(j, "sigma", ctx);
    if (!std::holds_alternative<FractionalNoise>(d.read_noise))
      throw ConfigError(ctx + ": 'sigma' override applies only to fractional-noise devices");
    if (s < 0.0) throw ConfigError(ctx + ": sigma must be >= 0");
    d.read_noise = FractionalNoise{s};
  }
  return d;
}

inline SweepEntry sweep_entry_from_json(const json& j, const std::string& ctx) {
  cfg_detail::check_keys(j, ctx, {"sigma", "T", "parasitics", "read_noise"});
  SweepEntry e;
  if (j.contains("sigma")) e.sigma = cfg_detail::get_req<double>(j, "sigma", ctx);
  if (j.contains("T")) e.t_seconds = cfg_detail::get_req<double>(j, "T", ctx);
  if (j.contains("parasitics")) e.parasitics = cfg_detail::get_req<bool>(j, "parasitics", ctx);
  if (j.contains("read_noise")) e.read_noise = cfg_detail::get_req<bool>(j, "read_noise", ctx);
  return e;
}

inline ExperimentConfig experiment_from_json(const json& j) {
  const std::string ctx = "config";
  cfg_detail::check_keys(j, ctx, {"network", "dataset", "device", "quant", "xbar", "noise",
                                  "act_quant", "mode", "adapt", "finetune", "pretrain", "seeds",
                                  "checkpoint", "dump", "sweep"});
  ExperimentConfig c;
  c.network = j.contains("network") ? network_from_config(j.at("network")) : smallconv_spec();
  c.dataset = j.contains("dataset") ? dataset_from_json(j.at("dataset")) : DatasetConfig{};
  c.device = j.contains("device") ? device_from_config(j.at("device")) : find_device("FeFET");
  c.quant = j.contains("quant") ? quant_from_json(j.at("quant")) : QuantSpec{};
  c.xbar = j.contains("xbar") ? xbar_from_json(j.at("xbar")) : XbarConfig{};
  c.noise = j.contains("noise") ? noise_from_json(j.at("noise")) : NoiseConfig{};
  c.act_quant = cfg_detail::get_or<bool>(j, "act_quant", true, ctx);
  c.mode = tune_mode_from_string(cfg_detail::get_or<std::string>(j, "mode", "none", ctx), ctx);
  c.adapt = j.contains("adapt") ? adapt_from_json(j.at("adapt")) : AdaptConfig{};
  c.finetune = j.contains("finetune") ? finetune_from_json(j.at("finetune")) : FinetuneConfig{};
  if (j.contains("pretrain")) {
    const std::string pctx = "pretrain";
    const json& pj = j.at("pretrain");
    cfg_detail::check_keys(pj, pctx, {"epochs", "lr", "batch_size", "seed"});
    c.pretrain.epochs = cfg_detail::get_or<int>(pj, "epochs", c.pretrain.epochs, pctx);
    c.pretrain.lr = cfg_detail::get_or<double>(pj, "lr", c.pretrain.lr, pctx);
    c.pretrain.batch_size = cfg_detail::get_or<int>(pj, "batch_size", c.pretrain.batch_size, pctx);
    c.pretrain.seed = cfg_detail::get_or<std::uint64_t>(pj, "seed", c.pretrain.seed, pctx);
  }
  if (j.contains("seeds")) {
    c.seeds = cfg_detail::get_req<std::vector<std::uint64_t>>(j, "seeds", ctx);
    if (c.seeds.empty()) throw ConfigError("config: seed list must not be empty");
  }
  c.checkpoint = cfg_detail::get_or<std::string>(j, "checkpoint", "", ctx);
  c.dump = cfg_detail::get_or<bool>(j, "dump", false, ctx);
  if (j.contains("sweep")) {
    if (!j.at("sweep").is_array()) throw ConfigError("config.sweep: expected an array");
    int k = 0;
    for (const auto& sj : j.at("sweep"))
      c.sweep.push_back(sweep_entry_from_json(sj, "config.sweep[" + std::to_string(k++) + "]"));
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return experiment_from_json(cfg_detail::load_json_file(path, "config"));
}

}  // namespace xbarsim

#endif
