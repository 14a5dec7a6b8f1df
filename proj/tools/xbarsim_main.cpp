// Command-line front end: pretrain / deploy / analyze / cost subcommands.
// Exit codes: 0 success, 2 configuration error, 3 numerical or I/O failure.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>

#include "xbarsim/cost.hpp"
#include "xbarsim/experiment.hpp"

namespace {

int thread_count_from_env() {
  const char* env = std::getenv("XBARSIM_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

struct CostJob {
  std::vector<xbarsim::ArchSummary> archs;
  xbarsim::CostModelParams params;
  int epochs = 1;
  std::int64_t dataset_size = 1;
};

xbarsim::ArchSummary arch_by_name(const xbarsim::json& j, const std::string& ctx) {
  using namespace xbarsim;
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "vgg16_cifar10") return vgg16_cifar10_summary();
    if (name == "resnet18_tinyimagenet") return resnet18_tinyimagenet_summary();
    if (name == "smallconv") return arch_from_network(smallconv_spec());
    throw ConfigError(ctx + ": unknown architecture '" + name + "'");
  }
  return arch_from_network(network_from_config(j, ctx));
}

CostJob cost_job_from_json(const xbarsim::json& j) {
  using namespace xbarsim;
  const std::string ctx = "config";
  cfg_detail::check_keys(j, ctx, {"archs", "batch", "params", "epochs", "dataset_size"});
  CostJob job;
  if (j.contains("archs")) {
    if (!j.at("archs").is_array()) throw ConfigError("config.archs: expected an array");
    for (const auto& aj : j.at("archs")) job.archs.push_back(arch_by_name(aj, "config.archs"));
  } else {
    job.archs = {vgg16_cifar10_summary(), resnet18_tinyimagenet_summary()};
  }
  const std::int64_t batch = cfg_detail::get_or<std::int64_t>(j, "batch", 1, ctx);
  if (batch < 1) throw ConfigError("config.batch: must be >= 1");
  for (auto& a : job.archs) a.batch = batch;
  if (j.contains("params")) {
    const std::string pctx = "config.params";
    const json& pj = j.at("params");
    cfg_detail::check_keys(pj, pctx,
                           {"bytes_per_weight_grad", "bytes_per_act", "bytes_per_act_grad",
                            "e_write_j", "e_mac_fwd_j", "e_mac_bwd_j", "devices_per_weight"});
    auto& p = job.params;
    p.bytes_per_weight_grad = cfg_detail::get_or<double>(pj, "bytes_per_weight_grad", p.bytes_per_weight_grad, pctx);
    p.bytes_per_act = cfg_detail::get_or<double>(pj, "bytes_per_act", p.bytes_per_act, pctx);
    p.bytes_per_act_grad = cfg_detail::get_or<double>(pj, "bytes_per_act_grad", p.bytes_per_act_grad, pctx);
    p.e_write_j = cfg_detail::get_or<double>(pj, "e_write_j", p.e_write_j, pctx);
    p.e_mac_fwd_j = cfg_detail::get_or<double>(pj, "e_mac_fwd_j", p.e_mac_fwd_j, pctx);
    p.e_mac_bwd_j = cfg_detail::get_or<double>(pj, "e_mac_bwd_j", p.e_mac_bwd_j, pctx);
    p.devices_per_weight = cfg_detail::get_or<int>(pj, "devices_per_weight", p.devices_per_weight, pctx);
    try {
      p.validate();
    } catch (const std::exception& e) {
      throw ConfigError(pctx + ": " + std::string(e.what()));
    }
  }
  job.epochs = cfg_detail::get_or<int>(j, "epochs", 1, ctx);
  job.dataset_size = cfg_detail::get_or<std::int64_t>(j, "dataset_size", 1, ctx);
  if (job.epochs < 1 || job.dataset_size < 1)
    throw ConfigError("config: epochs and dataset_size must be >= 1");
  return job;
}

int run_cost(const std::filesystem::path& config_path, const std::filesystem::path& out_dir) {
  using namespace xbarsim;
  const CostJob job = cost_job_from_json(cfg_detail::load_json_file(config_path, "config"));

  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir / "cost.csv");
  csv << "arch,baseline_mem_mb,bnonly_mem_mb,mem_savings_pct,baseline_energy_mj,bnonly_energy_mj,"
         "energy_savings_pct\n";
  std::printf("%-24s %14s %14s %9s %16s %16s %9s\n", "arch", "base mem(MB)", "bn mem(MB)", "mem %",
              "base E(mJ)", "bn E(mJ)", "E %");
  for (const auto& arch : job.archs) {
    const CostReport r = full_cost_report(arch, job.params, job.epochs, job.dataset_size);
    const double mb = 1.0 / (1024.0 * 1024.0);
    std::printf("%-24s %14.3f %14.3f %9.2f %16.4g %16.4g %9.2f\n", arch.name.c_str(),
                r.baseline_mem_bytes * mb, r.bnonly_mem_bytes * mb, r.mem_savings_pct,
                r.baseline_energy_j * 1e3, r.bnonly_energy_j * 1e3, r.energy_savings_pct);
    char line[512];
    std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.4f,%.8g,%.8g,%.4f", arch.name.c_str(),
                  r.baseline_mem_bytes * mb, r.bnonly_mem_bytes * mb, r.mem_savings_pct,
                  r.baseline_energy_j * 1e3, r.bnonly_energy_j * 1e3, r.energy_savings_pct);
    csv << line << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memristive-crossbar deployment simulator with batchnorm-only recovery"};
  app.require_subcommand(1);

  std::string config_path, out_dir, dump_dir;
  int bins = 64;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
  };
  CLI::App* sub_pretrain = app.add_subcommand("pretrain", "train a baseline and write a checkpoint");
  add_common(sub_pretrain);
  CLI::App* sub_deploy = app.add_subcommand("deploy", "deploy onto modeled crossbars, tune, evaluate");
  add_common(sub_deploy);
  CLI::App* sub_analyze = app.add_subcommand("analyze", "PCA and histograms from a deployment dump");
  add_common(sub_analyze);
  sub_analyze->add_option("--bins", bins, "histogram bins (default 64)");
  CLI::App* sub_cost = app.add_subcommand("cost", "training memory and energy savings estimate");
  add_common(sub_cost);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const int threads = thread_count_from_env();
  try {
    if (sub_pretrain->parsed()) {
      const auto cfg = xbarsim::load_experiment_config(config_path);
      const double acc = xbarsim::run_pretrain(cfg, out_dir);
      std::printf("pretrain done: test accuracy %.4f, checkpoint in %s\n", acc, out_dir.c_str());
    } else if (sub_deploy->parsed()) {
      const auto cfg = xbarsim::load_experiment_config(config_path);
      const auto rows = xbarsim::run_deploy_eval(cfg, out_dir, threads);
      std::printf("deploy done: %zu rows in %s/results.csv\n", rows.size(), out_dir.c_str());
    } else if (sub_analyze->parsed()) {
      const auto j = xbarsim::cfg_detail::load_json_file(config_path, "config");
      xbarsim::cfg_detail::check_keys(j, "config", {"dump_dir", "bins"});
      dump_dir = xbarsim::cfg_detail::get_req<std::string>(j, "dump_dir", "config");
      bins = xbarsim::cfg_detail::get_or<int>(j, "bins", bins, "config");
      if (bins < 1) throw xbarsim::ConfigError("config.bins: must be >= 1");
      xbarsim::run_analyze(dump_dir, bins, out_dir);
      std::printf("analyze done: pca.csv and hist.csv in %s\n", out_dir.c_str());
    } else if (sub_cost->parsed()) {
      return run_cost(config_path, out_dir);
    }
  } catch (const xbarsim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
