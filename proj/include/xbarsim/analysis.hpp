#ifndef XBARSIM_ANALYSIS_HPP
#define XBARSIM_ANALYSIS_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "xbarsim/tensor.hpp"

namespace xbarsim {

/// Proportions of variance of the 2-D (ideal weight, non-ideal weight) point
/// cloud. pc2 > 0 measures spread orthogonal to the best-fit line, i.e. the
/// distortion an affine correction cannot undo.
struct PCAResult {
  double pc1 = 0.0;
  double pc2 = 0.0;
  double eig1 = 0.0;
  double eig2 = 0.0;
  std::int64_t n = 0;
};

/// Closed-form 2x2 population-covariance eigendecomposition; no iterative
/// solver, so results are exactly reproducible.
inline PCAResult pca2(std::span<const float> w_ideal, std::span<const float> w_ni) {
  if (w_ideal.size() != w_ni.size())
    throw std::invalid_argument("pca2: coordinate arrays differ in length");
  const std::int64_t n = static_cast<std::int64_t>(w_ideal.size());
  if (n < 2) throw std::invalid_argument("pca2: need at least two points");

  double mx = 0.0, my = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    mx += static_cast<double>(w_ideal[static_cast<std::size_t>(i)]);
    my += static_cast<double>(w_ni[static_cast<std::size_t>(i)]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(w_ideal[static_cast<std::size_t>(i)]) - mx;
    const double dy = static_cast<double>(w_ni[static_cast<std::size_t>(i)]) - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  sxx *= inv_n;
  syy *= inv_n;
  sxy *= inv_n;

  const double tr = sxx + syy;
  if (tr <= 0.0) throw std::invalid_argument("pca2: degenerate cloud with zero total variance");
  const double half_gap = 0.5 * (sxx - syy);
  const double disc = std::sqrt(half_gap * half_gap + sxy * sxy);

  PCAResult r;
  r.n = n;
  r.eig1 = 0.5 * tr + disc;
  r.eig2 = std::max(0.0, 0.5 * tr - disc);
  r.pc1 = r.eig1 / tr;
  r.pc2 = r.eig2 / tr;
  return r;
}

inline PCAResult pca2(const Tensor& w_ideal, const Tensor& w_ni) {
  return pca2(std::span<const float>(w_ideal.data(), static_cast<std::size_t>(w_ideal.numel())),
              std::span<const float>(w_ni.data(), static_cast<std::size_t>(w_ni.numel())));
}

/// Drift constricts the non-ideal weight range by (T/T0)^-nu; scaling the
/// measured pc2 back up by (T/T0)^nu makes values comparable across T.
inline double pc2_projected(double pc2, double t_seconds, double t0_seconds, double nu) {
  return pc2 * std::pow(t_seconds / t0_seconds, nu);
}

struct DistStats {
  double min = 0.0, max = 0.0, mean = 0.0, std = 0.0;
  std::vector<double> bin_edges;       // bins + 1 edges over [min, max]
  std::vector<std::int64_t> counts;    // last bin closed on the right
  std::int64_t n = 0;
};

inline DistStats dist_stats(const Tensor& w, int bins) {
  if (w.empty()) throw std::invalid_argument("dist_stats: empty tensor");
  if (bins < 1) throw std::invalid_argument("dist_stats: bins must be >= 1");
  DistStats s;
  s.n = w.numel();
  s.min = s.max = static_cast<double>(w[0]);
  double sum = 0.0;
  for (std::int64_t i = 0; i < w.numel(); ++i) {
    const double v = static_cast<double>(w[i]);
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    sum += v;
  }
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (std::int64_t i = 0; i < w.numel(); ++i) {
    const double d = static_cast<double>(w[i]) - s.mean;
    ss += d * d;
  }
  s.std = std::sqrt(ss / static_cast<double>(s.n));

  s.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  const double width = (s.max - s.min) / static_cast<double>(bins);
  for (int b = 0; b <= bins; ++b)
    s.bin_edges[static_cast<std::size_t>(b)] = s.min + width * static_cast<double>(b);
  s.counts.assign(static_cast<std::size_t>(bins), 0);
  for (std::int64_t i = 0; i < w.numel(); ++i) {
    int b;
    if (width == 0.0) {
      b = 0;  // constant tensor: everything lands in the first bin
    } else {
      b = static_cast<int>((static_cast<double>(w[i]) - s.min) / width);
      if (b >= bins) b = bins - 1;  // max value closes the last bin
      if (b < 0) b = 0;
    }
    ++s.counts[static_cast<std::size_t>(b)];
  }
  return s;
}

}  // namespace xbarsim

#endif
