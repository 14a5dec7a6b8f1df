#ifndef XBARSIM_CHECKPOINT_HPP
#define XBARSIM_CHECKPOINT_HPP

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "xbarsim/config.hpp"
#include "xbarsim/io.hpp"
#include "xbarsim/network.hpp"

namespace xbarsim {

// A checkpoint is a directory: manifest.json plus one tensor file per
// parameter (conv weights, BN vectors, fc weight/bias).

namespace ckpt_detail {

inline Tensor from_vec(const std::vector<float>& v) {
  return Tensor({static_cast<std::int64_t>(v.size())}, v);
}

}  // namespace ckpt_detail

inline void save_checkpoint(const std::filesystem::path& dir, const Model& model) {
  std::filesystem::create_directories(dir);
  json params = json::array();
  auto emit = [&](const std::string& name, const Tensor& t) {
    const std::string file = name + ".tnsr";
    write_tensor_file(dir / file, t);
    params.push_back({{"name", name}, {"file", file}});
  };
  for (std::size_t i = 0; i < model.num_conv(); ++i)
    emit("conv" + std::to_string(i) + ".weight", model.conv_weight(i));
  json bn_meta = json::array();
  for (std::size_t i = 0; i < model.num_bn(); ++i) {
    const BNState& st = model.bn_state(i);
    const std::string base = "bn" + std::to_string(i);
    emit(base + ".gamma", ckpt_detail::from_vec(st.gamma));
    emit(base + ".beta", ckpt_detail::from_vec(st.beta));
    emit(base + ".running_mean", ckpt_detail::from_vec(st.running_mean));
    emit(base + ".running_var", ckpt_detail::from_vec(st.running_var));
    bn_meta.push_back({{"eps", st.eps}, {"momentum", st.momentum}});
  }
  emit("fc.weight", model.fc_weight());
  emit("fc.bias", model.fc_bias());

  json manifest = {{"format", "xbarsim-checkpoint-1"},
                   {"network", network_to_json(model.spec())},
                   {"bn", bn_meta},
                   {"params", params}};
  std::ofstream os(dir / "manifest.json");
  if (!os) throw std::runtime_error("save_checkpoint: cannot write manifest in " + dir.string());
  os << manifest.dump(2) << "\n";
}

inline Model load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  json manifest = cfg_detail::load_json_file(manifest_path, "checkpoint manifest");
  cfg_detail::check_keys(manifest, "checkpoint manifest", {"format", "network", "bn", "params"});
  const std::string format = cfg_detail::get_req<std::string>(manifest, "format", "checkpoint manifest");
  if (format != "xbarsim-checkpoint-1")
    throw ConfigError("checkpoint manifest: unsupported format '" + format + "'");
  if (!manifest.contains("network"))
    throw ConfigError("checkpoint manifest: missing key 'network'");

  Model model(network_from_json(manifest.at("network"), "checkpoint manifest.network"));

  auto load = [&dir](const std::string& name) { return read_float_tensor(dir / (name + ".tnsr")); };
  auto load_vec = [&load](const std::string& name, std::vector<float>& dst, const char* what) {
    Tensor t = load(name);
    if (t.numel() != static_cast<std::int64_t>(dst.size()))
      throw std::runtime_error(std::string("load_checkpoint: ") + what + " length mismatch for " + name);
    dst = t.vec();
  };

  for (std::size_t i = 0; i < model.num_conv(); ++i) {
    Tensor w = load("conv" + std::to_string(i) + ".weight");
    if (w.shape() != model.conv_weight(i).shape())
      throw std::runtime_error("load_checkpoint: conv weight shape mismatch at layer " +
                               std::to_string(i));
    model.conv_weight(i) = std::move(w);
  }
  const json bn_meta = manifest.contains("bn") ? manifest.at("bn") : json::array();
  for (std::size_t i = 0; i < model.num_bn(); ++i) {
    BNState& st = model.bn_state(i);
    const std::string base = "bn" + std::to_string(i);
    load_vec(base + ".gamma", st.gamma, "gamma");
    load_vec(base + ".beta", st.beta, "beta");
    load_vec(base + ".running_mean", st.running_mean, "running_mean");
    load_vec(base + ".running_var", st.running_var, "running_var");
    if (i < bn_meta.size()) {
      st.eps = cfg_detail::get_or<float>(bn_meta.at(i), "eps", st.eps, "checkpoint manifest.bn");
      st.momentum =
          cfg_detail::get_or<float>(bn_meta.at(i), "momentum", st.momentum, "checkpoint manifest.bn");
    }
    st.validate();
  }
  {
    Tensor w = load("fc.weight");
    if (w.shape() != model.fc_weight().shape())
      throw std::runtime_error("load_checkpoint: fc weight shape mismatch");
    model.fc_weight() = std::move(w);
    Tensor b = load("fc.bias");
    if (b.shape() != model.fc_bias().shape())
      throw std::runtime_error("load_checkpoint: fc bias shape mismatch");
    model.fc_bias() = std::move(b);
  }
  return model;
}

}  // namespace xbarsim

#endif
