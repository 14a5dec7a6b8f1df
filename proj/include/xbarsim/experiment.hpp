#ifndef XBARSIM_EXPERIMENT_HPP
#define XBARSIM_EXPERIMENT_HPP

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "xbarsim/analysis.hpp"
#include "xbarsim/checkpoint.hpp"
#include "xbarsim/config.hpp"
#include "xbarsim/tune.hpp"
#include "xbarsim/xbar.hpp"

namespace xbarsim {

namespace exp_detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace exp_detail

inline DatasetPair load_dataset(const DatasetConfig& dc) {
  if (dc.synthetic) return make_synthetic_dataset(dc.synth);
  auto load_split = [](const std::string& images, const std::string& labels) {
    Dataset d;
    d.images = read_float_tensor(images);
    if (d.images.rank() != 4)
      throw std::runtime_error("dataset: image tensor must be NxCxHxW, got " +
                               shape_str(d.images.shape()));
    PortableTensor lt = read_tensor_file(labels);
    if (lt.dtype != TensorDType::Uint8 || lt.numel() != d.images.extent(0))
      throw std::runtime_error("dataset: labels must be uint8 with one entry per image");
    d.labels.assign(lt.u8.begin(), lt.u8.end());
    return d;
  };
  DatasetPair p;
  p.train = load_split(dc.files.train_images, dc.files.train_labels);
  p.test = load_split(dc.files.test_images, dc.files.test_labels);
  return p;
}

/// Noise and device settings for one sweep point.
struct ResolvedDeploy {
  DeviceSpec device;
  NoiseConfig noise;
};

inline ResolvedDeploy resolve_sweep(const ExperimentConfig& cfg, const SweepEntry* entry) {
  ResolvedDeploy r{cfg.device, cfg.noise};
  if (!entry) return r;
  if (entry->sigma) {
    if (!std::holds_alternative<FractionalNoise>(r.device.read_noise))
      throw ConfigError("sweep: 'sigma' override applies only to fractional-noise devices");
    r.device.read_noise = FractionalNoise{*entry->sigma};
    r.noise.read_noise = true;
  }
  if (entry->read_noise) r.noise.read_noise = *entry->read_noise;
  if (entry->t_seconds) {
    r.noise.drift = true;
    r.noise.drift_cfg.t_seconds = *entry->t_seconds;
  }
  if (entry->parasitics) r.noise.parasitics = *entry->parasitics;
  r.noise.validate();
  return r;
}

struct RunRow {
  std::uint64_t seed = 0;
  int config_index = 0;
  std::string mode;
  bool read_noise = false;
  double sigma = -1.0;  // fractional sigma; -1 for affine-noise devices
  double t_seconds = 0.0;
  bool parasitics = false;
  double accuracy = 0.0;
  std::vector<double> pc2;
  std::vector<double> pc2_proj;
};

inline std::string results_csv_header(std::size_t conv_layers) {
  std::string h = "seed,config,mode,read_noise,sigma,T,parasitics,accuracy";
  for (std::size_t i = 0; i < conv_layers; ++i) {
    h += ",pc2_" + std::to_string(i);
    h += ",pc2proj_" + std::to_string(i);
  }
  return h;
}

inline void write_results_csv(const std::filesystem::path& path, std::vector<RunRow> rows,
                              std::size_t conv_layers) {
  std::sort(rows.begin(), rows.end(), [](const RunRow& a, const RunRow& b) {
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.config_index < b.config_index;
  });
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << results_csv_header(conv_layers) << "\n";
  for (const auto& r : rows) {
    os << r.seed << ',' << r.config_index << ',' << r.mode << ',' << (r.read_noise ? 1 : 0) << ','
       << exp_detail::fmt("%.6g", r.sigma) << ',' << exp_detail::fmt("%.6g", r.t_seconds) << ','
       << (r.parasitics ? 1 : 0) << ',' << exp_detail::fmt("%.6f", r.accuracy);
    for (std::size_t i = 0; i < conv_layers; ++i)
      os << ',' << exp_detail::fmt("%.9e", r.pc2[i]) << ',' << exp_detail::fmt("%.9e", r.pc2_proj[i]);
    os << "\n";
  }
}

inline void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochLog>& logs) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "epoch,lr,train_loss,test_accuracy\n";
  for (const auto& l : logs)
    os << l.epoch << ',' << exp_detail::fmt("%.6g", l.lr) << ','
       << exp_detail::fmt("%.6f", l.train_loss) << ',' << exp_detail::fmt("%.6f", l.test_accuracy)
       << "\n";
}

inline void write_dump(const std::filesystem::path& dir, const std::vector<DeployedLayer>& layers,
                       const ResolvedDeploy& rd) {
  std::filesystem::create_directories(dir);
  json files = json::array();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string ideal = "layer" + std::to_string(i) + "_ideal.tnsr";
    const std::string ni = "layer" + std::to_string(i) + "_ni.tnsr";
    write_tensor_file(dir / ideal, layers[i].w_ideal);
    write_tensor_file(dir / ni, layers[i].w_ni);
    files.push_back({{"ideal", ideal}, {"ni", ni}});
  }
  json meta = {{"format", "xbarsim-dump-1"},
               {"device", device_to_json(rd.device)},
               {"drift", rd.noise.drift},
               {"T", rd.noise.drift_cfg.t_seconds},
               {"T0", rd.noise.drift_cfg.t0_seconds},
               {"layers", files}};
  std::ofstream os(dir / "dump.json");
  os << meta.dump(2) << "\n";
}

/// One deployment + optional recovery + evaluation, the unit of work behind
/// every row of results.csv.
inline RunRow run_single(const ExperimentConfig& cfg, Model model, const DatasetPair& data,
                         const ResolvedDeploy& rd, std::uint64_t seed, int config_index,
                         int threads, const std::filesystem::path* out_dir) {
  NoiseConfig noise = rd.noise;
  noise.seed = seed;
  auto deployed = deploy_network(model, cfg.quant, rd.device, cfg.xbar, noise, threads, cfg.act_quant);

  RunRow row;
  row.seed = seed;
  row.config_index = config_index;
  row.mode = tune_mode_name(cfg.mode);
  row.read_noise = noise.read_noise;
  if (const auto* f = std::get_if<FractionalNoise>(&rd.device.read_noise)) row.sigma = f->sigma;
  row.t_seconds = noise.drift ? noise.drift_cfg.t_seconds : 0.0;
  row.parasitics = noise.parasitics;
  const double proj =
      noise.drift ? std::pow(noise.drift_cfg.t_seconds / noise.drift_cfg.t0_seconds, rd.device.nu)
                  : 1.0;
  for (const auto& dl : deployed) {
    const PCAResult p = pca2(dl.w_ideal, dl.w_ni);
    row.pc2.push_back(p.pc2);
    row.pc2_proj.push_back(p.pc2 * proj);
  }

  if (cfg.mode == TuneMode::Adapt) {
    bn_adapt(model, data.train, cfg.adapt);
  } else if (cfg.mode == TuneMode::Finetune) {
    FinetuneConfig fc = cfg.finetune;
    fc.seed = rng::mix(fc.seed, seed);
    auto logs = bn_finetune(model, data.train, nullptr, fc);
    if (out_dir)
      write_epoch_log(*out_dir / ("finetune_cfg" + std::to_string(config_index) + "_seed" +
                                  std::to_string(seed) + ".csv"),
                      logs);
  }
  row.accuracy = evaluate(model, data.test);

  if (cfg.dump && out_dir)
    write_dump(*out_dir / ("dump_cfg" + std::to_string(config_index) + "_seed" +
                           std::to_string(seed)),
               deployed, rd);
  return row;
}

/// Full deploy+eval pipeline: every sweep point x every seed, rows sorted by
/// (seed, config index) so the file content is independent of execution order.
inline std::vector<RunRow> run_deploy_eval(const ExperimentConfig& cfg,
                                           const std::filesystem::path& out_dir, int threads = 1) {
  if (cfg.checkpoint.empty()) throw ConfigError("config: deploy needs 'checkpoint'");
  Model base = load_checkpoint(cfg.checkpoint);
  const DatasetPair data = load_dataset(cfg.dataset);

  std::filesystem::create_directories(out_dir);
  std::vector<RunRow> rows;
  const std::size_t n_cfg = cfg.sweep.empty() ? 1 : cfg.sweep.size();
  for (std::size_t k = 0; k < n_cfg; ++k) {
    const ResolvedDeploy rd = resolve_sweep(cfg, cfg.sweep.empty() ? nullptr : &cfg.sweep[k]);
    for (std::uint64_t seed : cfg.seeds)
      rows.push_back(run_single(cfg, base, data, rd, seed, static_cast<int>(k), threads, &out_dir));
  }
  write_results_csv(out_dir / "results.csv", rows, base.num_conv());
  return rows;
}

/// Train from scratch and write the checkpoint directory.
inline double run_pretrain(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const DatasetPair data = load_dataset(cfg.dataset);
  Model model(cfg.network);
  auto logs = pretrain(model, data.train, &data.test, cfg.pretrain);
  std::filesystem::create_directories(out_dir);
  save_checkpoint(out_dir, model);
  write_epoch_log(out_dir / "pretrain_log.csv", logs);
  return logs.empty() ? 0.0 : logs.back().test_accuracy;
}

/// Re-analyze a deployment dump: per-layer PCA rows plus histograms.
inline void run_analyze(const std::filesystem::path& dump_dir, int bins,
                        const std::filesystem::path& out_dir) {
  const json meta = cfg_detail::load_json_file(dump_dir / "dump.json", "dump manifest");
  cfg_detail::check_keys(meta, "dump manifest", {"format", "device", "drift", "T", "T0", "layers"});
  if (cfg_detail::get_req<std::string>(meta, "format", "dump manifest") != "xbarsim-dump-1")
    throw ConfigError("dump manifest: unsupported format");
  const DeviceSpec device = device_from_json(meta.at("device"), "dump manifest.device");
  const bool drift = cfg_detail::get_or<bool>(meta, "drift", false, "dump manifest");
  const double t = cfg_detail::get_or<double>(meta, "T", 1.0, "dump manifest");
  const double t0 = cfg_detail::get_or<double>(meta, "T0", 1.0, "dump manifest");

  std::filesystem::create_directories(out_dir);
  std::ofstream pca_csv(out_dir / "pca.csv");
  std::ofstream hist_csv(out_dir / "hist.csv");
  pca_csv << "layer_id,n,pc1,pc2,pc2_proj,min_ni,max_ni\n";
  hist_csv << "layer_id,tensor,bin,edge_lo,edge_hi,count\n";

  int layer_id = 0;
  for (const auto& lj : meta.at("layers")) {
    const Tensor ideal = read_float_tensor(
        dump_dir / cfg_detail::get_req<std::string>(lj, "ideal", "dump manifest.layers"));
    const Tensor ni = read_float_tensor(
        dump_dir / cfg_detail::get_req<std::string>(lj, "ni", "dump manifest.layers"));
    const PCAResult p = pca2(ideal, ni);
    const double proj = drift ? pc2_projected(p.pc2, t, t0, device.nu) : p.pc2;
    const DistStats si = dist_stats(ideal, bins);
    const DistStats sn = dist_stats(ni, bins);
    pca_csv << layer_id << ',' << p.n << ',' << exp_detail::fmt("%.9e", p.pc1) << ','
            << exp_detail::fmt("%.9e", p.pc2) << ',' << exp_detail::fmt("%.9e", proj) << ','
            << exp_detail::fmt("%.9e", sn.min) << ',' << exp_detail::fmt("%.9e", sn.max) << "\n";
    auto emit_hist = [&](const char* tag, const DistStats& s) {
      for (std::size_t b = 0; b < s.counts.size(); ++b)
        hist_csv << layer_id << ',' << tag << ',' << b << ','
                 << exp_detail::fmt("%.9e", s.bin_edges[b]) << ','
                 << exp_detail::fmt("%.9e", s.bin_edges[b + 1]) << ',' << s.counts[b] << "\n";
    };
    emit_hist("ideal", si);
    emit_hist("ni", sn);
    ++layer_id;
  }
}

}  // namespace xbarsim

#endif
