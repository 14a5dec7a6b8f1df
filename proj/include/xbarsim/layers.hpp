#ifndef XBARSIM_LAYERS_HPP
#define XBARSIM_LAYERS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "xbarsim/tensor.hpp"

namespace xbarsim {

using MatrixXd = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Convolution (NCHW input, OIKK weight, no bias; bias lives in the BN layer)
// ---------------------------------------------------------------------------

inline std::int64_t conv_out_extent(std::int64_t in, std::int64_t k, std::int64_t stride,
                                    std::int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

struct ConvCache {
  Tensor input;  // saved for dweight
  Shape input_shape;
  std::int64_t stride = 1;
  std::int64_t pad = 0;
  Shape weight_shape;
  bool has_input = false;  // dweight needs the input; dinput does not
};

namespace detail {

// Unfold input patches into a (C*K*K) x (H_out*W_out) column matrix for one
// image. Accumulation happens in double inside the GEMM.
inline void im2col(const float* x, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t K,
                   std::int64_t stride, std::int64_t pad, std::int64_t Ho, std::int64_t Wo,
                   MatrixXd& cols) {
  cols.resize(C * K * K, Ho * Wo);
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t kh = 0; kh < K; ++kh) {
      for (std::int64_t kw = 0; kw < K; ++kw) {
        const std::int64_t row = (c * K + kh) * K + kw;
        for (std::int64_t oh = 0; oh < Ho; ++oh) {
          const std::int64_t ih = oh * stride - pad + kh;
          for (std::int64_t ow = 0; ow < Wo; ++ow) {
            const std::int64_t iw = ow * stride - pad + kw;
            double v = 0.0;
            if (ih >= 0 && ih < H && iw >= 0 && iw < W)
              v = static_cast<double>(x[(c * H + ih) * W + iw]);
            cols(row, oh * Wo + ow) = v;
          }
        }
      }
    }
  }
}

inline void col2im_add(const MatrixXd& cols, std::int64_t C, std::int64_t H, std::int64_t W,
                       std::int64_t K, std::int64_t stride, std::int64_t pad, std::int64_t Ho,
                       std::int64_t Wo, float* dx) {
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t kh = 0; kh < K; ++kh) {
      for (std::int64_t kw = 0; kw < K; ++kw) {
        const std::int64_t row = (c * K + kh) * K + kw;
        for (std::int64_t oh = 0; oh < Ho; ++oh) {
          const std::int64_t ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= H) continue;
          for (std::int64_t ow = 0; ow < Wo; ++ow) {
            const std::int64_t iw = ow * stride - pad + kw;
            if (iw < 0 || iw >= W) continue;
            dx[(c * H + ih) * W + iw] += static_cast<float>(cols(row, oh * Wo + ow));
          }
        }
      }
    }
  }
}

inline MatrixXd weight_as_matrix(const Tensor& w) {
  const std::int64_t O = w.extent(0), I = w.extent(1), K = w.extent(2);
  MatrixXd m(O, I * K * K);
  for (std::int64_t o = 0; o < O; ++o)
    for (std::int64_t j = 0; j < I * K * K; ++j)
      m(o, j) = static_cast<double>(w[o * I * K * K + j]);
  return m;
}

}  // namespace detail

inline Tensor conv2d_forward(const Tensor& input, const Tensor& weight, std::int64_t stride,
                             std::int64_t pad, ConvCache* cache = nullptr,
                             bool keep_input = true) {
  if (input.rank() != 4 || weight.rank() != 4)
    throw std::invalid_argument("conv2d_forward: need NCHW input and OIKK weight, got " +
                                shape_str(input.shape()) + " and " + shape_str(weight.shape()));
  const std::int64_t N = input.extent(0), C = input.extent(1), H = input.extent(2),
                     W = input.extent(3);
  const std::int64_t O = weight.extent(0), I = weight.extent(1), K = weight.extent(2);
  if (weight.extent(3) != K)
    throw std::invalid_argument("conv2d_forward: non-square kernel " + shape_str(weight.shape()));
  if (C != I)
    throw std::invalid_argument("conv2d_forward: input channels " + std::to_string(C) +
                                " != weight input channels " + std::to_string(I));
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d_forward: bad stride/pad");
  const std::int64_t Ho = conv_out_extent(H, K, stride, pad);
  const std::int64_t Wo = conv_out_extent(W, K, stride, pad);
  if (Ho < 1 || Wo < 1)
    throw std::invalid_argument("conv2d_forward: empty output for input " +
                                shape_str(input.shape()));

  Tensor out({N, O, Ho, Wo});
  const MatrixXd wm = detail::weight_as_matrix(weight);
  MatrixXd cols;
  for (std::int64_t n = 0; n < N; ++n) {
    detail::im2col(input.data() + n * C * H * W, C, H, W, K, stride, pad, Ho, Wo, cols);
    MatrixXd y = wm * cols;  // O x (Ho*Wo)
    float* dst = out.data() + n * O * Ho * Wo;
    for (std::int64_t o = 0; o < O; ++o)
      for (std::int64_t p = 0; p < Ho * Wo; ++p) dst[o * Ho * Wo + p] = static_cast<float>(y(o, p));
  }
  if (cache) {
    cache->input_shape = input.shape();
    cache->stride = stride;
    cache->pad = pad;
    cache->weight_shape = weight.shape();
    cache->has_input = keep_input;
    if (keep_input) cache->input = input;
  }
  return out;
}

struct ConvGrads {
  Tensor dinput;
  std::optional<Tensor> dweight;
};

inline ConvGrads conv2d_backward(const Tensor& dout, const Tensor& weight, const ConvCache& cache,
                                 bool want_dweight) {
  if (cache.input_shape.empty()) throw std::runtime_error("conv2d_backward: missing forward cache");
  if (want_dweight && !cache.has_input)
    throw std::runtime_error("conv2d_backward: cache kept no input, cannot form dweight");
  const std::int64_t N = cache.input_shape[0], C = cache.input_shape[1], H = cache.input_shape[2],
                     W = cache.input_shape[3];
  const std::int64_t O = weight.extent(0), I = weight.extent(1), K = weight.extent(2);
  const std::int64_t Ho = conv_out_extent(H, K, cache.stride, cache.pad);
  const std::int64_t Wo = conv_out_extent(W, K, cache.stride, cache.pad);
  if (dout.rank() != 4 || dout.extent(0) != N || dout.extent(1) != O || dout.extent(2) != Ho ||
      dout.extent(3) != Wo)
    throw std::invalid_argument("conv2d_backward: dout shape " + shape_str(dout.shape()) +
                                " does not match forward output");

  ConvGrads g;
  g.dinput = Tensor(cache.input_shape);
  const MatrixXd wm = detail::weight_as_matrix(weight);
  MatrixXd dw = MatrixXd::Zero(O, I * K * K);
  MatrixXd cols, dcols, doutm(O, Ho * Wo);
  for (std::int64_t n = 0; n < N; ++n) {
    const float* dsrc = dout.data() + n * O * Ho * Wo;
    for (std::int64_t o = 0; o < O; ++o)
      for (std::int64_t p = 0; p < Ho * Wo; ++p)
        doutm(o, p) = static_cast<double>(dsrc[o * Ho * Wo + p]);
    dcols = wm.transpose() * doutm;  // (C*K*K) x (Ho*Wo)
    detail::col2im_add(dcols, C, H, W, K, cache.stride, cache.pad, Ho, Wo,
                       g.dinput.data() + n * C * H * W);
    if (want_dweight) {
      detail::im2col(cache.input.data() + n * C * H * W, C, H, W, K, cache.stride, cache.pad, Ho,
                     Wo, cols);
      dw.noalias() += doutm * cols.transpose();
    }
  }
  if (want_dweight) {
    Tensor dweight(cache.weight_shape);
    for (std::int64_t i = 0; i < dweight.numel(); ++i) dweight[i] = static_cast<float>(dw(i / (I * K * K), i % (I * K * K)));
    g.dweight = std::move(dweight);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

struct BNState {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> running_mean;
  std::vector<float> running_var;  // population variance
  float eps = 1e-5f;
  float momentum = 0.1f;

  explicit BNState(std::int64_t channels = 0)
      : gamma(static_cast<std::size_t>(channels), 1.0f),
        beta(static_cast<std::size_t>(channels), 0.0f),
        running_mean(static_cast<std::size_t>(channels), 0.0f),
        running_var(static_cast<std::size_t>(channels), 1.0f) {}

  std::int64_t channels() const { return static_cast<std::int64_t>(gamma.size()); }

  void validate() const {
    if (gamma.size() != beta.size() || gamma.size() != running_mean.size() ||
        gamma.size() != running_var.size())
      throw std::invalid_argument("BNState: per-channel vectors disagree in length");
    if (!(eps > 0.0f)) throw std::invalid_argument("BNState: eps must be > 0");
    for (float v : running_var)
      if (v < 0.0f) throw std::invalid_argument("BNState: negative running variance");
  }
};

enum class BNMode { Train, Adapt, Eval };

struct BNCache {
  Tensor xhat;
  std::vector<double> inv_std;  // per channel, 1/sqrt(var+eps)
  std::vector<float> gamma;
  std::int64_t per_channel = 0;  // normalization set size
  bool batch_stats = false;
};

namespace detail {

// x has channel axis 1; works for NCHW and NC layouts.
struct ChannelIter {
  std::int64_t n, c, spatial;
  explicit ChannelIter(const Tensor& x) {
    if (x.rank() < 2) throw std::invalid_argument("batchnorm: input rank must be >= 2");
    n = x.extent(0);
    c = x.extent(1);
    spatial = 1;
    for (int a = 2; a < x.rank(); ++a) spatial *= x.extent(a);
  }
};

}  // namespace detail

/// Eq.-style standardization y = gamma*(x-mean)/sqrt(var+eps) + beta, per
/// channel. Train/Adapt use batch statistics (population variance) and fold
/// them into the running stats with `momentum`; Eval uses the running stats.
inline Tensor batchnorm_forward(const Tensor& x, BNState& state, BNMode mode,
                                BNCache* cache = nullptr, bool update_running = true) {
  const detail::ChannelIter it(x);
  if (it.c != state.channels())
    throw std::invalid_argument("batchnorm_forward: channel extent " + std::to_string(it.c) +
                                " != state channels " + std::to_string(state.channels()));
  const std::int64_t per_channel = it.n * it.spatial;
  if (mode != BNMode::Eval && per_channel == 0)
    throw std::invalid_argument("batchnorm_forward: empty batch in batch-statistics mode");

  Tensor y(x.shape());
  if (cache) {
    cache->xhat = Tensor(x.shape());
    cache->inv_std.assign(static_cast<std::size_t>(it.c), 0.0);
    cache->gamma.assign(state.gamma.begin(), state.gamma.end());
    cache->per_channel = per_channel;
    cache->batch_stats = (mode != BNMode::Eval);
  }

  for (std::int64_t c = 0; c < it.c; ++c) {
    double mean, var;
    if (mode == BNMode::Eval) {
      mean = static_cast<double>(state.running_mean[static_cast<std::size_t>(c)]);
      var = static_cast<double>(state.running_var[static_cast<std::size_t>(c)]);
    } else {
      double sum = 0.0, sumsq = 0.0;
      for (std::int64_t n = 0; n < it.n; ++n) {
        const float* p = x.data() + (n * it.c + c) * it.spatial;
        for (std::int64_t s = 0; s < it.spatial; ++s) {
          const double v = static_cast<double>(p[s]);
          sum += v;
          sumsq += v * v;
        }
      }
      mean = sum / static_cast<double>(per_channel);
      var = sumsq / static_cast<double>(per_channel) - mean * mean;
      if (var < 0.0) var = 0.0;
      if (update_running) {
        const double m = static_cast<double>(state.momentum);
        auto& rm = state.running_mean[static_cast<std::size_t>(c)];
        auto& rv = state.running_var[static_cast<std::size_t>(c)];
        rm = static_cast<float>((1.0 - m) * static_cast<double>(rm) + m * mean);
        rv = static_cast<float>((1.0 - m) * static_cast<double>(rv) + m * var);
      }
    }
    const double inv_std = 1.0 / std::sqrt(var + static_cast<double>(state.eps));
    const double g = static_cast<double>(state.gamma[static_cast<std::size_t>(c)]);
    const double b = static_cast<double>(state.beta[static_cast<std::size_t>(c)]);
    if (cache) cache->inv_std[static_cast<std::size_t>(c)] = inv_std;
    for (std::int64_t n = 0; n < it.n; ++n) {
      const float* p = x.data() + (n * it.c + c) * it.spatial;
      float* q = y.data() + (n * it.c + c) * it.spatial;
      float* xh = cache ? cache->xhat.data() + (n * it.c + c) * it.spatial : nullptr;
      for (std::int64_t s = 0; s < it.spatial; ++s) {
        const double xhat = (static_cast<double>(p[s]) - mean) * inv_std;
        if (xh) xh[s] = static_cast<float>(xhat);
        q[s] = static_cast<float>(g * xhat + b);
      }
    }
  }
  return y;
}

struct BNGrads {
  std::vector<float> dgamma;
  std::vector<float> dbeta;
  Tensor dx;
};

inline BNGrads batchnorm_backward(const Tensor& dy, const BNCache& cache) {
  if (cache.per_channel == 0) throw std::runtime_error("batchnorm_backward: missing forward cache");
  if (!cache.batch_stats)
    throw std::runtime_error("batchnorm_backward: forward ran in eval mode; gradients need batch statistics");
  check_same_shape(dy, cache.xhat, "batchnorm_backward");
  const detail::ChannelIter it(dy);

  BNGrads g;
  g.dgamma.assign(static_cast<std::size_t>(it.c), 0.0f);
  g.dbeta.assign(static_cast<std::size_t>(it.c), 0.0f);
  g.dx = Tensor(dy.shape());
  const double inv_n = 1.0 / static_cast<double>(cache.per_channel);

  for (std::int64_t c = 0; c < it.c; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::int64_t n = 0; n < it.n; ++n) {
      const float* d = dy.data() + (n * it.c + c) * it.spatial;
      const float* xh = cache.xhat.data() + (n * it.c + c) * it.spatial;
      for (std::int64_t s = 0; s < it.spatial; ++s) {
        sum_dy += static_cast<double>(d[s]);
        sum_dy_xhat += static_cast<double>(d[s]) * static_cast<double>(xh[s]);
      }
    }
    g.dgamma[static_cast<std::size_t>(c)] = static_cast<float>(sum_dy_xhat);
    g.dbeta[static_cast<std::size_t>(c)] = static_cast<float>(sum_dy);
    const double gamma = static_cast<double>(cache.gamma[static_cast<std::size_t>(c)]);
    const double k = gamma * cache.inv_std[static_cast<std::size_t>(c)];
    for (std::int64_t n = 0; n < it.n; ++n) {
      const float* d = dy.data() + (n * it.c + c) * it.spatial;
      const float* xh = cache.xhat.data() + (n * it.c + c) * it.spatial;
      float* out = g.dx.data() + (n * it.c + c) * it.spatial;
      for (std::int64_t s = 0; s < it.spatial; ++s) {
        const double v = static_cast<double>(d[s]) - inv_n * sum_dy -
                         static_cast<double>(xh[s]) * inv_n * sum_dy_xhat;
        out[s] = static_cast<float>(k * v);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// ReLU / pooling / fully connected / softmax cross-entropy
// ---------------------------------------------------------------------------

inline Tensor relu_forward(const Tensor& x, Tensor* mask = nullptr) {
  Tensor y(x.shape());
  if (mask) *mask = Tensor(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const bool on = x[i] > 0.0f;
    y[i] = on ? x[i] : 0.0f;
    if (mask) (*mask)[i] = on ? 1.0f : 0.0f;
  }
  return y;
}

inline Tensor relu_backward(const Tensor& dy, const Tensor& mask) {
  check_same_shape(dy, mask, "relu_backward");
  Tensor dx(dy.shape());
  for (std::int64_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * mask[i];
  return dx;
}

struct PoolCache {
  Shape input_shape;
  std::int64_t window = 2, stride = 2;
  std::vector<std::int64_t> argmax;  // max pooling only
};

inline Tensor maxpool_forward(const Tensor& x, std::int64_t window, std::int64_t stride,
                              PoolCache* cache = nullptr) {
  if (x.rank() != 4) throw std::invalid_argument("maxpool_forward: need NCHW input");
  const std::int64_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  const std::int64_t Ho = (H - window) / stride + 1, Wo = (W - window) / stride + 1;
  if (window < 1 || stride < 1 || Ho < 1 || Wo < 1)
    throw std::invalid_argument("maxpool_forward: window does not fit input");
  Tensor y({N, C, Ho, Wo});
  if (cache) {
    cache->input_shape = x.shape();
    cache->window = window;
    cache->stride = stride;
    cache->argmax.assign(static_cast<std::size_t>(y.numel()), 0);
  }
  std::int64_t oi = 0;
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t oh = 0; oh < Ho; ++oh)
        for (std::int64_t ow = 0; ow < Wo; ++ow, ++oi) {
          float best = -std::numeric_limits<float>::infinity();
          std::int64_t best_idx = 0;
          for (std::int64_t kh = 0; kh < window; ++kh)
            for (std::int64_t kw = 0; kw < window; ++kw) {
              const std::int64_t ih = oh * stride + kh, iw = ow * stride + kw;
              const std::int64_t idx = ((n * C + c) * H + ih) * W + iw;
              if (x[idx] > best) {
                best = x[idx];
                best_idx = idx;
              }
            }
          y[oi] = best;
          if (cache) cache->argmax[static_cast<std::size_t>(oi)] = best_idx;
        }
  return y;
}

inline Tensor maxpool_backward(const Tensor& dy, const PoolCache& cache) {
  if (cache.input_shape.empty()) throw std::runtime_error("maxpool_backward: missing cache");
  Tensor dx(cache.input_shape);
  for (std::int64_t i = 0; i < dy.numel(); ++i)
    dx[cache.argmax[static_cast<std::size_t>(i)]] += dy[i];
  return dx;
}

inline Tensor avgpool_forward(const Tensor& x, std::int64_t window, std::int64_t stride,
                              PoolCache* cache = nullptr) {
  if (x.rank() != 4) throw std::invalid_argument("avgpool_forward: need NCHW input");
  const std::int64_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  const std::int64_t Ho = (H - window) / stride + 1, Wo = (W - window) / stride + 1;
  if (window < 1 || stride < 1 || Ho < 1 || Wo < 1)
    throw std::invalid_argument("avgpool_forward: window does not fit input");
  Tensor y({N, C, Ho, Wo});
  if (cache) {
    cache->input_shape = x.shape();
    cache->window = window;
    cache->stride = stride;
  }
  const double inv = 1.0 / static_cast<double>(window * window);
  std::int64_t oi = 0;
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t oh = 0; oh < Ho; ++oh)
        for (std::int64_t ow = 0; ow < Wo; ++ow, ++oi) {
          double acc = 0.0;
          for (std::int64_t kh = 0; kh < window; ++kh)
            for (std::int64_t kw = 0; kw < window; ++kw)
              acc += static_cast<double>(
                  x[((n * C + c) * H + oh * stride + kh) * W + ow * stride + kw]);
          y[oi] = static_cast<float>(acc * inv);
        }
  return y;
}

inline Tensor avgpool_backward(const Tensor& dy, const PoolCache& cache) {
  if (cache.input_shape.empty()) throw std::runtime_error("avgpool_backward: missing cache");
  const std::int64_t N = cache.input_shape[0], C = cache.input_shape[1], H = cache.input_shape[2],
                     W = cache.input_shape[3];
  const std::int64_t Ho = dy.extent(2), Wo = dy.extent(3);
  Tensor dx(cache.input_shape);
  const float inv = 1.0f / static_cast<float>(cache.window * cache.window);
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t oh = 0; oh < Ho; ++oh)
        for (std::int64_t ow = 0; ow < Wo; ++ow) {
          const float v = dy.at4(n, c, oh, ow) * inv;
          for (std::int64_t kh = 0; kh < cache.window; ++kh)
            for (std::int64_t kw = 0; kw < cache.window; ++kw)
              dx[((n * C + c) * H + oh * cache.stride + kh) * W + ow * cache.stride + kw] += v;
        }
  return dx;
}

struct FcCache {
  Tensor input;  // N x F
};

/// weight is (out_features x in_features), bias (out_features).
inline Tensor fc_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                         FcCache* cache = nullptr) {
  const std::int64_t N = x.extent(0);
  const std::int64_t F = x.numel() / N;
  const std::int64_t O = weight.extent(0);
  if (weight.rank() != 2 || weight.extent(1) != F)
    throw std::invalid_argument("fc_forward: weight " + shape_str(weight.shape()) +
                                " incompatible with flattened input of " + std::to_string(F));
  if (bias.numel() != O) throw std::invalid_argument("fc_forward: bias length mismatch");
  Tensor y({N, O});
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t o = 0; o < O; ++o) {
      double acc = static_cast<double>(bias[o]);
      const float* xp = x.data() + n * F;
      const float* wp = weight.data() + o * F;
      for (std::int64_t f = 0; f < F; ++f)
        acc += static_cast<double>(xp[f]) * static_cast<double>(wp[f]);
      y.at2(n, o) = static_cast<float>(acc);
    }
  if (cache) cache->input = x.reshaped({N, F});
  return y;
}

struct FcGrads {
  Tensor dinput;
  Tensor dweight;
  Tensor dbias;
};

inline FcGrads fc_backward(const Tensor& dy, const Tensor& weight, const FcCache& cache,
                           bool want_dweight) {
  if (cache.input.empty()) throw std::runtime_error("fc_backward: missing forward cache");
  const std::int64_t N = cache.input.extent(0), F = cache.input.extent(1), O = weight.extent(0);
  FcGrads g;
  g.dinput = Tensor({N, F});
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t f = 0; f < F; ++f) {
      double acc = 0.0;
      for (std::int64_t o = 0; o < O; ++o)
        acc += static_cast<double>(dy.at2(n, o)) * static_cast<double>(weight.at2(o, f));
      g.dinput.at2(n, f) = static_cast<float>(acc);
    }
  if (want_dweight) {
    g.dweight = Tensor({O, F});
    g.dbias = Tensor({O});
    for (std::int64_t o = 0; o < O; ++o) {
      double db = 0.0;
      for (std::int64_t f = 0; f < F; ++f) {
        double acc = 0.0;
        for (std::int64_t n = 0; n < N; ++n)
          acc += static_cast<double>(dy.at2(n, o)) * static_cast<double>(cache.input.at2(n, f));
        g.dweight.at2(o, f) = static_cast<float>(acc);
      }
      for (std::int64_t n = 0; n < N; ++n) db += static_cast<double>(dy.at2(n, o));
      g.dbias[o] = static_cast<float>(db);
    }
  }
  return g;
}

struct SoftmaxResult {
  double loss = 0.0;        // mean cross-entropy over the batch
  Tensor dlogits;           // gradient of the mean loss
  std::vector<int> argmax;  // predicted class per sample, ties -> lowest index
};

inline SoftmaxResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  const std::int64_t N = logits.extent(0), C = logits.extent(1);
  if (static_cast<std::int64_t>(targets.size()) != N)
    throw std::invalid_argument("softmax_cross_entropy: target count mismatch");
  SoftmaxResult r;
  r.dlogits = Tensor({N, C});
  r.argmax.resize(static_cast<std::size_t>(N));
  double total = 0.0;
  for (std::int64_t n = 0; n < N; ++n) {
    const int t = targets[static_cast<std::size_t>(n)];
    if (t < 0 || t >= C)
      throw std::invalid_argument("softmax_cross_entropy: target " + std::to_string(t) +
                                  " out of range for " + std::to_string(C) + " classes");
    double maxv = -std::numeric_limits<double>::infinity();
    std::int64_t arg = 0;
    for (std::int64_t c = 0; c < C; ++c) {
      const double v = static_cast<double>(logits.at2(n, c));
      if (v > maxv) {
        maxv = v;
        arg = c;
      }
    }
    r.argmax[static_cast<std::size_t>(n)] = static_cast<int>(arg);
    double z = 0.0;
    for (std::int64_t c = 0; c < C; ++c)
      z += std::exp(static_cast<double>(logits.at2(n, c)) - maxv);
    const double logz = std::log(z) + maxv;
    total += logz - static_cast<double>(logits.at2(n, t));
    for (std::int64_t c = 0; c < C; ++c) {
      const double p = std::exp(static_cast<double>(logits.at2(n, c)) - logz);
      r.dlogits.at2(n, c) =
          static_cast<float>((p - (c == t ? 1.0 : 0.0)) / static_cast<double>(N));
    }
  }
  r.loss = total / static_cast<double>(N);
  return r;
}

/// Uniform symmetric fake quantization with per-tensor dynamic range; models
/// limited-precision inputs feeding the crossbar rows. bits == 0 disables.
inline Tensor fake_quantize(const Tensor& x, int bits) {
  if (bits <= 0) return x;
  float maxabs = 0.0f;
  for (std::int64_t i = 0; i < x.numel(); ++i) maxabs = std::max(maxabs, std::abs(x[i]));
  if (maxabs == 0.0f) return x;
  const double qmax = static_cast<double>((1 << (bits - 1)) - 1);
  const double delta = static_cast<double>(maxabs) / qmax;
  Tensor y(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    double l = std::round(std::abs(static_cast<double>(x[i])) / delta);
    l = std::min(l, qmax);
    y[i] = static_cast<float>((x[i] < 0.0f ? -l : l) * delta);
  }
  return y;
}

}  // namespace xbarsim

#endif
