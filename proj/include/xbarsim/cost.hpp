#ifndef XBARSIM_COST_HPP
#define XBARSIM_COST_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbarsim/network.hpp"

namespace xbarsim {

struct LayerCostEntry {
  std::string name;
  std::int64_t weight_params = 0;  // conv/fc parameters (frozen in BN-only training)
  std::int64_t bn_params = 0;      // gamma + beta
  std::int64_t act_elems = 0;      // stored output activations per sample
  std::int64_t macs = 0;           // forward multiply-accumulates per sample
};

/// Per-layer bookkeeping behind the training-cost estimates. Activation
/// counts cover conv, BN, pooling and fc outputs; ReLU runs in place and
/// stores nothing.
struct ArchSummary {
  std::string name;
  std::vector<LayerCostEntry> layers;
  std::int64_t batch = 1;

  std::int64_t total_weight_params() const {
    std::int64_t s = 0;
    for (auto& l : layers) s += l.weight_params;
    return s;
  }
  std::int64_t total_bn_params() const {
    std::int64_t s = 0;
    for (auto& l : layers) s += l.bn_params;
    return s;
  }
  std::int64_t total_act_elems() const {
    std::int64_t s = 0;
    for (auto& l : layers) s += l.act_elems;
    return s;
  }
  std::int64_t total_macs() const {
    std::int64_t s = 0;
    for (auto& l : layers) s += l.macs;
    return s;
  }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("ArchSummary: no layers");
    if (batch < 1) throw std::invalid_argument("ArchSummary: batch must be >= 1");
  }
};

inline ArchSummary arch_from_network(const NetworkSpec& spec, std::int64_t batch = 1) {
  ArchSummary a;
  a.name = spec.name;
  a.batch = batch;
  const auto shapes = spec.infer_shapes();
  Shape cur = spec.input_shape;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerDesc& d = spec.layers[li];
    const Shape& out = shapes[li];
    LayerCostEntry e;
    switch (d.kind) {
      case LayerKind::Conv:
        e.name = "conv" + std::to_string(li);
        e.weight_params = d.out_channels * cur[0] * d.kernel * d.kernel;
        e.act_elems = shape_numel(out);
        e.macs = e.weight_params / d.out_channels * shape_numel(out);
        break;
      case LayerKind::BatchNorm:
        e.name = "bn" + std::to_string(li);
        e.bn_params = 2 * cur[0];
        e.act_elems = shape_numel(out);
        break;
      case LayerKind::MaxPool:
      case LayerKind::AvgPool:
        e.name = "pool" + std::to_string(li);
        e.act_elems = shape_numel(out);
        break;
      case LayerKind::Fc:
        e.name = "fc" + std::to_string(li);
        e.weight_params = d.out_features * shape_numel(cur) + d.out_features;
        e.act_elems = shape_numel(out);
        e.macs = d.out_features * shape_numel(cur);
        break;
      case LayerKind::ReLU:
        cur = out;
        continue;  // in-place, nothing stored
    }
    a.layers.push_back(e);
    cur = out;
  }
  return a;
}

namespace detail {

inline void push_conv_bn(ArchSummary& a, const std::string& name, std::int64_t in_ch,
                         std::int64_t out_ch, std::int64_t k, std::int64_t out_h,
                         std::int64_t out_w) {
  LayerCostEntry conv;
  conv.name = name;
  conv.weight_params = out_ch * in_ch * k * k;
  conv.act_elems = out_ch * out_h * out_w;
  conv.macs = conv.weight_params * out_h * out_w;
  a.layers.push_back(conv);
  LayerCostEntry bn;
  bn.name = name + ".bn";
  bn.bn_params = 2 * out_ch;
  bn.act_elems = out_ch * out_h * out_w;
  a.layers.push_back(bn);
}

inline void push_pool(ArchSummary& a, const std::string& name, std::int64_t ch, std::int64_t h,
                      std::int64_t w) {
  LayerCostEntry p;
  p.name = name;
  p.act_elems = ch * h * w;
  a.layers.push_back(p);
}

inline void push_fc(ArchSummary& a, const std::string& name, std::int64_t in, std::int64_t out) {
  LayerCostEntry fc;
  fc.name = name;
  fc.weight_params = out * in + out;
  fc.act_elems = out;
  fc.macs = out * in;
  a.layers.push_back(fc);
}

}  // namespace detail

/// 13 conv layers with BN on 32x32 inputs, one 10-way classifier.
inline ArchSummary vgg16_cifar10_summary() {
  ArchSummary a;
  a.name = "vgg16_cifar10";
  const std::int64_t cfg[5][2] = {{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}};
  std::int64_t in_ch = 3, hw = 32;
  int idx = 0;
  for (auto& [ch, reps] : cfg) {
    for (std::int64_t r = 0; r < reps; ++r) {
      detail::push_conv_bn(a, "conv" + std::to_string(++idx), in_ch, ch, 3, hw, hw);
      in_ch = ch;
    }
    hw /= 2;
    detail::push_pool(a, "pool" + std::to_string(idx), ch, hw, hw);
  }
  detail::push_fc(a, "fc", 512, 10);
  return a;
}

/// Basic-block variant with a 3x3 stride-1 stem, as commonly used for 64x64
/// inputs; downsample projections included, 200-way classifier.
inline ArchSummary resnet18_tinyimagenet_summary() {
  ArchSummary a;
  a.name = "resnet18_tinyimagenet";
  std::int64_t hw = 64;
  detail::push_conv_bn(a, "stem", 3, 64, 3, hw, hw);

  const std::int64_t plan[4][2] = {{64, 1}, {128, 2}, {256, 2}, {512, 2}};  // {channels, first stride}
  std::int64_t in_ch = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const std::int64_t ch = plan[stage][0];
    const std::int64_t stride = plan[stage][1];
    for (int block = 0; block < 2; ++block) {
      const bool down = block == 0 && stride == 2;
      if (down) hw /= 2;
      const std::string base = "layer" + std::to_string(stage + 1) + "." + std::to_string(block);
      detail::push_conv_bn(a, base + ".conv1", in_ch, ch, 3, hw, hw);
      detail::push_conv_bn(a, base + ".conv2", ch, ch, 3, hw, hw);
      if (block == 0 && in_ch != ch) detail::push_conv_bn(a, base + ".down", in_ch, ch, 1, hw, hw);
      in_ch = ch;
    }
  }
  detail::push_pool(a, "avgpool", 512, 1, 1);
  detail::push_fc(a, "fc", 512, 200);
  return a;
}

struct CostModelParams {
  double bytes_per_weight_grad = 1.0;
  double bytes_per_act = 1.0;
  double bytes_per_act_grad = 1.0;
  // Energy constants are configuration, not measured values; the shipped
  // defaults are order-of-magnitude placeholders.
  double e_write_j = 1e-11;
  double e_mac_fwd_j = 2e-13;
  double e_mac_bwd_j = 2e-13;
  int devices_per_weight = 2;

  void validate() const {
    if (bytes_per_weight_grad < 0 || bytes_per_act < 0 || bytes_per_act_grad < 0 ||
        e_write_j < 0 || e_mac_fwd_j < 0 || e_mac_bwd_j < 0 || devices_per_weight < 0)
      throw std::invalid_argument("CostModelParams: negative parameter");
  }
};

struct CostReport {
  double baseline_mem_bytes = 0.0;
  double bnonly_mem_bytes = 0.0;
  double mem_savings_pct = 0.0;
  double baseline_energy_j = 0.0;
  double bnonly_energy_j = 0.0;
  double energy_savings_pct = 0.0;
};

inline double savings_pct(double baseline, double bnonly) {
  if (baseline <= 0.0) return 0.0;
  return 100.0 * (1.0 - bnonly / baseline);
}

/// Training-memory accounting per step: weight gradients + stored activations
/// + activation gradients + BN-parameter gradients. Freezing the weights
/// removes exactly the weight-gradient term.
inline CostReport memory_savings(const ArchSummary& arch, const CostModelParams& p) {
  arch.validate();
  p.validate();
  const double b = static_cast<double>(arch.batch);
  const double wg = static_cast<double>(arch.total_weight_params()) * p.bytes_per_weight_grad;
  const double act = static_cast<double>(arch.total_act_elems()) * b * p.bytes_per_act;
  const double actg = static_cast<double>(arch.total_act_elems()) * b * p.bytes_per_act_grad;
  const double bng = static_cast<double>(arch.total_bn_params()) * p.bytes_per_weight_grad;
  CostReport r;
  r.baseline_mem_bytes = wg + act + actg + bng;
  r.bnonly_mem_bytes = r.baseline_mem_bytes - wg;
  r.mem_savings_pct = savings_pct(r.baseline_mem_bytes, r.bnonly_mem_bytes);
  return r;
}

/// Per-training-run energy: forward MACs, backward MACs (activation and
/// weight gradients) and device reprogramming. BN-only training drops the
/// weight-gradient MACs and every device write.
inline CostReport energy_savings(const ArchSummary& arch, const CostModelParams& p, int epochs,
                                 std::int64_t dataset_size) {
  arch.validate();
  p.validate();
  if (epochs < 1 || dataset_size < 1)
    throw std::invalid_argument("energy_savings: epochs and dataset_size must be >= 1");

  const double macs = static_cast<double>(arch.total_macs());
  const double samples = static_cast<double>(dataset_size) * epochs;
  const double steps =
      static_cast<double>((dataset_size + arch.batch - 1) / arch.batch) * epochs;
  const double devices =
      static_cast<double>(arch.total_weight_params()) * p.devices_per_weight;

  const double fwd = macs * samples * p.e_mac_fwd_j;
  const double dx = macs * samples * p.e_mac_bwd_j;
  const double dw = macs * samples * p.e_mac_bwd_j;
  const double writes = devices * steps * p.e_write_j;

  CostReport r;
  r.baseline_energy_j = fwd + dx + dw + writes;
  r.bnonly_energy_j = fwd + dx;
  r.energy_savings_pct = savings_pct(r.baseline_energy_j, r.bnonly_energy_j);
  return r;
}

inline CostReport full_cost_report(const ArchSummary& arch, const CostModelParams& p, int epochs,
                                   std::int64_t dataset_size) {
  CostReport mem = memory_savings(arch, p);
  CostReport en = energy_savings(arch, p, epochs, dataset_size);
  mem.baseline_energy_j = en.baseline_energy_j;
  mem.bnonly_energy_j = en.bnonly_energy_j;
  mem.energy_savings_pct = en.energy_savings_pct;
  return mem;
}

}  // namespace xbarsim

#endif
