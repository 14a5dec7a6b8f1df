#ifndef XBARSIM_XBAR_HPP
#define XBARSIM_XBAR_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "xbarsim/device.hpp"
#include "xbarsim/network.hpp"
#include "xbarsim/parasitics.hpp"
#include "xbarsim/rng.hpp"
#include "xbarsim/tensor.hpp"

namespace xbarsim {

struct DriftConfig {
  double t_seconds = 1.0;
  double t0_seconds = 1.0;
};

struct NoiseConfig {
  bool read_noise = false;
  bool drift = false;
  DriftConfig drift_cfg;
  bool parasitics = false;
  std::uint64_t seed = 0;
  bool clamp_nonneg = false;

  void validate() const {
    if (drift && !(drift_cfg.t0_seconds > 0.0 && drift_cfg.t_seconds >= drift_cfg.t0_seconds))
      throw std::invalid_argument("NoiseConfig: drift needs T >= T0 > 0");
  }
};

/// One crossbar instance: a full rows x cols conductance matrix per bit
/// slice. Cells beyond rows_used/cols_used are padding programmed to slice
/// level 0; they load the wires but never contribute reconstructed weights.
struct Tile {
  int rows_used = 0;
  int cols_used = 0;
  std::vector<std::vector<double>> slice_g_us;  // [slice][r * cols + c]
};

/// Crossbar-mapped form of one convolution layer plus everything needed to
/// invert the mapping.
struct TileGrid {
  Shape weight_shape;            // OIKK
  std::int64_t mat_rows = 0;     // I*K*K
  std::int64_t mat_cols = 0;     // O
  double delta = 1.0;
  QuantSpec quant;
  DeviceSpec device;
  XbarConfig xcfg;
  int tiles_r = 0, tiles_c = 0;
  std::vector<Tile> tiles;  // tile (tr, tc) at tr * tiles_c + tc
  int layer_id = 0;

  const Tile& tile(int tr, int tc) const { return tiles[static_cast<std::size_t>(tr) * tiles_c + tc]; }
  Tile& tile(int tr, int tc) { return tiles[static_cast<std::size_t>(tr) * tiles_c + tc]; }

  std::int64_t device_count() const {
    return static_cast<std::int64_t>(tiles.size()) * quant.num_slices() * xcfg.rows * xcfg.cols;
  }
};

/// Reshape an OIKK weight tensor onto crossbar tiles: matrix rows follow the
/// input dimension (i, kh, kw), columns the output neurons; each weight is
/// quantized, offset-encoded, bit-sliced and programmed as conductances.
inline TileGrid map_layer(const Tensor& w, const QuantSpec& q, const DeviceSpec& d,
                          const XbarConfig& xcfg, int layer_id = 0) {
  if (w.rank() != 4)
    throw std::invalid_argument("map_layer: expected OIKK weight tensor, got " +
                                shape_str(w.shape()));
  q.validate();
  d.validate();
  xcfg.validate();

  const QuantizedLayer ql = quantize_layer(w, q);
  const std::int64_t O = w.extent(0), I = w.extent(1), KH = w.extent(2), KW = w.extent(3);

  TileGrid grid;
  grid.weight_shape = w.shape();
  grid.mat_rows = I * KH * KW;
  grid.mat_cols = O;
  grid.delta = ql.delta;
  grid.quant = q;
  grid.device = d;
  grid.xcfg = xcfg;
  grid.layer_id = layer_id;
  grid.tiles_r = static_cast<int>((grid.mat_rows + xcfg.rows - 1) / xcfg.rows);
  grid.tiles_c = static_cast<int>((grid.mat_cols + xcfg.cols - 1) / xcfg.cols);

  const int n_slices = q.num_slices();
  const double g_pad = level_to_conductance(0, d);
  grid.tiles.assign(static_cast<std::size_t>(grid.tiles_r) * grid.tiles_c, Tile{});
  for (int tr = 0; tr < grid.tiles_r; ++tr)
    for (int tc = 0; tc < grid.tiles_c; ++tc) {
      Tile& t = grid.tile(tr, tc);
      const std::int64_t row0 = static_cast<std::int64_t>(tr) * xcfg.rows;
      const std::int64_t col0 = static_cast<std::int64_t>(tc) * xcfg.cols;
      t.rows_used = static_cast<int>(std::min<std::int64_t>(xcfg.rows, grid.mat_rows - row0));
      t.cols_used = static_cast<int>(std::min<std::int64_t>(xcfg.cols, grid.mat_cols - col0));
      t.slice_g_us.assign(static_cast<std::size_t>(n_slices),
                          std::vector<double>(static_cast<std::size_t>(xcfg.rows) * xcfg.cols, g_pad));
      for (int r = 0; r < t.rows_used; ++r)
        for (int c = 0; c < t.cols_used; ++c) {
          // matrix element (row0 + r, col0 + c) <- weight [col][row decomposed]
          const std::int64_t mrow = row0 + r;
          const std::int64_t o = col0 + c;
          const std::int32_t level = ql.levels[static_cast<std::size_t>(o * grid.mat_rows + mrow)];
          const auto slices = encode_slices(level, q);
          for (int s = 0; s < n_slices; ++s)
            t.slice_g_us[static_cast<std::size_t>(s)][static_cast<std::size_t>(r) * xcfg.cols + c] =
                level_to_conductance(slices[static_cast<std::size_t>(s)], d);
        }
    }
  return grid;
}

/// Gaussian read perturbation, Eq.-(1) style: G <- G + n, n ~ N(0, sigma(G)^2).
/// Each draw is addressed by (seed, layer, tile, slice, row, col), so the
/// result does not depend on iteration order or thread count.
inline void apply_read_noise(TileGrid& grid, std::uint64_t seed, bool clamp_nonneg = false) {
  const std::uint64_t base = rng::mix(rng::mix(0x9d2c5680u, seed), static_cast<std::uint64_t>(grid.layer_id));
  for (int tr = 0; tr < grid.tiles_r; ++tr)
    for (int tc = 0; tc < grid.tiles_c; ++tc) {
      Tile& t = grid.tile(tr, tc);
      const std::uint64_t tkey = rng::mix(rng::mix(base, static_cast<std::uint64_t>(tr)),
                                          static_cast<std::uint64_t>(tc));
      for (std::size_t s = 0; s < t.slice_g_us.size(); ++s) {
        const std::uint64_t skey = rng::mix(tkey, s);
        auto& g = t.slice_g_us[s];
        for (int r = 0; r < grid.xcfg.rows; ++r) {
          const std::uint64_t rkey = rng::mix(skey, static_cast<std::uint64_t>(r));
          for (int c = 0; c < grid.xcfg.cols; ++c) {
            auto& gv = g[static_cast<std::size_t>(r) * grid.xcfg.cols + c];
            const double sigma = read_noise_sigma(gv, grid.device);
            if (sigma > 0.0)
              gv += sigma * rng::normal(rng::mix(rkey, static_cast<std::uint64_t>(c)));
            if (clamp_nonneg && gv < 0.0) gv = 0.0;
          }
        }
      }
    }
}

/// Deterministic conductance decay G0 * (T/T0)^(-nu).
inline void apply_drift(TileGrid& grid, double t_seconds, double t0_seconds, double nu) {
  if (!(t0_seconds > 0.0) || t_seconds < t0_seconds)
    throw std::invalid_argument("apply_drift: need T >= T0 > 0");
  const double factor = std::pow(t_seconds / t0_seconds, -nu);
  for (auto& t : grid.tiles)
    for (auto& slice : t.slice_g_us)
      for (auto& g : slice) g *= factor;
}

inline double drift_factor(double t_seconds, double t0_seconds, double nu) {
  return std::pow(t_seconds / t0_seconds, -nu);
}

/// Replace every tile/slice conductance matrix by the effective conductances
/// of its parasitic mesh. Tiles are independent; `threads` > 1 fans them out
/// without changing the result.
inline void apply_parasitics(TileGrid& grid, int threads = 1) {
  struct Job {
    Tile* tile;
    std::size_t slice;
  };
  std::vector<Job> jobs;
  for (auto& t : grid.tiles)
    for (std::size_t s = 0; s < t.slice_g_us.size(); ++s) jobs.push_back({&t, s});

  auto run = [&grid](Job j) {
    EffectiveConductances eff = effective_conductance_parasitic(j.tile->slice_g_us[j.slice], grid.xcfg);
    j.tile->slice_g_us[j.slice] = std::move(eff.g_us);
  };

  if (threads <= 1 || jobs.size() <= 1) {
    for (Job j : jobs) run(j);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t stride = static_cast<std::size_t>(threads);
  for (std::size_t t = 0; t < stride; ++t)
    pool.emplace_back([&jobs, &run, t, stride]() {
      for (std::size_t i = t; i < jobs.size(); i += stride) run(jobs[i]);
    });
  for (auto& th : pool) th.join();
}

/// Invert the mapping: conductances -> continuous slice levels -> offset word
/// -> weight, reassembled into the original OIKK shape. Padding is skipped.
inline Tensor reconstruct_weights(const TileGrid& grid) {
  if (grid.weight_shape.size() != 4 || grid.tiles.empty())
    throw std::invalid_argument("reconstruct_weights: grid metadata incomplete");
  Tensor w(grid.weight_shape);
  const int n_slices = grid.quant.num_slices();
  const double offset = static_cast<double>(grid.quant.offset());
  for (int tr = 0; tr < grid.tiles_r; ++tr)
    for (int tc = 0; tc < grid.tiles_c; ++tc) {
      const Tile& t = grid.tile(tr, tc);
      const std::int64_t row0 = static_cast<std::int64_t>(tr) * grid.xcfg.rows;
      const std::int64_t col0 = static_cast<std::int64_t>(tc) * grid.xcfg.cols;
      for (int r = 0; r < t.rows_used; ++r)
        for (int c = 0; c < t.cols_used; ++c) {
          double word = 0.0;
          for (int s = 0; s < n_slices; ++s) {
            const double level = conductance_to_level(
                t.slice_g_us[static_cast<std::size_t>(s)][static_cast<std::size_t>(r) * grid.xcfg.cols + c],
                grid.device);
            word = word * static_cast<double>(std::int64_t{1} << grid.quant.slice_bits) + level;
          }
          const std::int64_t o = col0 + c;
          const std::int64_t mrow = row0 + r;
          w[o * grid.mat_rows + mrow] = static_cast<float>((word - offset) * grid.delta);
        }
    }
  return w;
}

struct DeployedLayer {
  Tensor w_ideal;  // pre-deployment weights
  Tensor w_ni;     // reconstructed non-ideal weights
};

/// Full pipeline per conv layer: quantize -> program -> drift -> read noise
/// -> parasitics -> reconstruct, then swap the layer weights for W_NI.
/// BN and the fc classifier stay untouched. Noise is sampled once here and
/// frozen into the model.
inline std::vector<DeployedLayer> deploy_network(Model& model, const QuantSpec& q,
                                                 const DeviceSpec& d, const XbarConfig& xcfg,
                                                 const NoiseConfig& noise, int threads = 1,
                                                 bool quantize_activations = true) {
  noise.validate();
  if (model.num_conv() == 0) throw std::invalid_argument("deploy_network: model has no conv layers");
  std::vector<DeployedLayer> out;
  out.reserve(model.num_conv());
  for (std::size_t li = 0; li < model.num_conv(); ++li) {
    TileGrid grid = map_layer(model.conv_weight(li), q, d, xcfg, static_cast<int>(li));
    if (noise.drift)
      apply_drift(grid, noise.drift_cfg.t_seconds, noise.drift_cfg.t0_seconds, d.nu);
    if (noise.read_noise) apply_read_noise(grid, noise.seed, noise.clamp_nonneg);
    if (noise.parasitics) apply_parasitics(grid, threads);
    DeployedLayer dl;
    dl.w_ideal = model.conv_weight(li);
    dl.w_ni = reconstruct_weights(grid);
    model.conv_weight(li) = dl.w_ni;
    out.push_back(std::move(dl));
  }
  model.set_act_quant_bits(quantize_activations ? q.act_bits : 0);
  return out;
}

}  // namespace xbarsim

#endif
