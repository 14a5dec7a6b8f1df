#ifndef XBARSIM_DATASET_HPP
#define XBARSIM_DATASET_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "xbarsim/rng.hpp"
#include "xbarsim/tensor.hpp"

namespace xbarsim {

struct Dataset {
  Tensor images;  // N,C,H,W
  std::vector<int> labels;

  std::int64_t size() const { return images.empty() ? 0 : images.extent(0); }
};

struct SyntheticDatasetSpec {
  int classes = 4;
  int train_per_class = 2000;
  int test_per_class = 400;
  int channels = 1;
  int height = 16;
  int width = 16;
  double noise = 0.6;  // pixel noise standard deviation
  std::uint64_t seed = 7;

  void validate() const {
    if (classes < 2) throw std::invalid_argument("SyntheticDatasetSpec: need >= 2 classes");
    if (train_per_class < 1 || test_per_class < 1 || channels < 1 || height < 1 || width < 1)
      throw std::invalid_argument("SyntheticDatasetSpec: non-positive extent");
    if (noise < 0.0) throw std::invalid_argument("SyntheticDatasetSpec: negative noise");
  }
};

namespace detail {

/// Each class owns a fixed oriented spatial frequency; samples are that
/// grating under a jittered Gaussian envelope plus pixel noise.
inline void synth_sample(float* dst, int cls, const SyntheticDatasetSpec& sp, rng::Sequence& rs) {
  const double theta = rng::kPi * static_cast<double>(cls) / static_cast<double>(sp.classes);
  const double freq = 2.0 + 1.5 * static_cast<double>(cls);
  const double kx = freq * std::cos(theta) / static_cast<double>(sp.height);
  const double ky = freq * std::sin(theta) / static_cast<double>(sp.width);

  const double amp = 1.0 + 0.25 * rs.normal();
  const double phase = 2.0 * rng::kPi * rs.uniform();
  const double ch = 0.5 * sp.height + 3.0 * (rs.uniform() - 0.5);
  const double cw = 0.5 * sp.width + 3.0 * (rs.uniform() - 0.5);
  const double env_sigma = 0.35 * static_cast<double>(std::min(sp.height, sp.width));
  const double inv2s2 = 1.0 / (2.0 * env_sigma * env_sigma);

  for (int c = 0; c < sp.channels; ++c) {
    const double chan_phase = phase + rng::kPi * static_cast<double>(c) / 2.0;
    for (int h = 0; h < sp.height; ++h)
      for (int w = 0; w < sp.width; ++w) {
        const double grating =
            std::sin(2.0 * rng::kPi * (kx * static_cast<double>(h) + ky * static_cast<double>(w)) +
                     chan_phase);
        const double dh = static_cast<double>(h) - ch;
        const double dw = static_cast<double>(w) - cw;
        const double env = std::exp(-(dh * dh + dw * dw) * inv2s2);
        const double v = amp * env * grating + sp.noise * rs.normal();
        dst[(c * sp.height + h) * sp.width + w] = static_cast<float>(v);
      }
  }
}

inline Dataset synth_split(const SyntheticDatasetSpec& sp, int per_class, std::uint64_t seed) {
  const std::int64_t n = static_cast<std::int64_t>(sp.classes) * per_class;
  Dataset ds;
  ds.images = Tensor({n, sp.channels, sp.height, sp.width});
  ds.labels.resize(static_cast<std::size_t>(n));
  rng::Sequence rs(seed);
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng::shuffle(order, rs);
  const std::int64_t sample_elems = static_cast<std::int64_t>(sp.channels) * sp.height * sp.width;
  std::int64_t idx = 0;
  for (int cls = 0; cls < sp.classes; ++cls)
    for (int k = 0; k < per_class; ++k, ++idx) {
      const std::int64_t slot = order[static_cast<std::size_t>(idx)];
      synth_sample(ds.images.data() + slot * sample_elems, cls, sp, rs);
      ds.labels[static_cast<std::size_t>(slot)] = cls;
    }
  return ds;
}

}  // namespace detail

struct DatasetPair {
  Dataset train;
  Dataset test;
};

inline DatasetPair make_synthetic_dataset(const SyntheticDatasetSpec& sp) {
  sp.validate();
  DatasetPair p;
  p.train = detail::synth_split(sp, sp.train_per_class, rng::mix(sp.seed, 0x7261696eull));
  p.test = detail::synth_split(sp, sp.test_per_class, rng::mix(sp.seed, 0x74657374ull));
  return p;
}

}  // namespace xbarsim

#endif
