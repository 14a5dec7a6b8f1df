#ifndef XBARSIM_TESTS_FINITE_DIFF_HPP
#define XBARSIM_TESTS_FINITE_DIFF_HPP

#include <cmath>
#include <functional>

#include "xbarsim/tensor.hpp"

namespace xbarsim::testing {

/// Central finite differences of a scalar loss with respect to `param`.
/// The loss is evaluated on temporarily perturbed f32 values; differences are
/// accumulated in double.
inline Tensor finite_diff_grad(Tensor& param, const std::function<double()>& loss,
                               double h = 1e-3) {
  Tensor grad(param.shape());
  for (std::int64_t i = 0; i < param.numel(); ++i) {
    const float saved = param[i];
    param[i] = static_cast<float>(static_cast<double>(saved) + h);
    const double up = loss();
    param[i] = static_cast<float>(static_cast<double>(saved) - h);
    const double down = loss();
    param[i] = saved;
    grad[i] = static_cast<float>((up - down) / (2.0 * h));
  }
  return grad;
}

/// Worst-case elementwise difference normalized by the largest gradient
/// magnitude; a scale-free relative error for whole gradient tensors.
inline double grad_rel_err(const Tensor& analytic, const Tensor& numeric) {
  double max_mag = 1e-8, max_diff = 0.0;
  for (std::int64_t i = 0; i < analytic.numel(); ++i) {
    max_mag = std::max({max_mag, std::abs(static_cast<double>(analytic[i])),
                        std::abs(static_cast<double>(numeric[i]))});
    max_diff = std::max(max_diff,
                        std::abs(static_cast<double>(analytic[i]) - static_cast<double>(numeric[i])));
  }
  return max_diff / max_mag;
}

inline double grad_rel_err(const std::vector<float>& analytic, const Tensor& numeric) {
  return grad_rel_err(Tensor({static_cast<std::int64_t>(analytic.size())}, analytic), numeric);
}

}  // namespace xbarsim::testing

#endif
