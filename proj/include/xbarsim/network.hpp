#ifndef XBARSIM_NETWORK_HPP
#define XBARSIM_NETWORK_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbarsim/layers.hpp"
#include "xbarsim/rng.hpp"
#include "xbarsim/tensor.hpp"

namespace xbarsim {

enum class LayerKind { Conv, BatchNorm, ReLU, MaxPool, AvgPool, Fc };

struct LayerDesc {
  LayerKind kind = LayerKind::ReLU;
  // conv
  std::int64_t out_channels = 0, kernel = 0, stride = 1, pad = 0;
  // pooling
  std::int64_t window = 2, pool_stride = 2;
  // fc
  std::int64_t out_features = 0;

  static LayerDesc conv(std::int64_t out_ch, std::int64_t k, std::int64_t s = 1, std::int64_t p = 0) {
    LayerDesc d;
    d.kind = LayerKind::Conv;
    d.out_channels = out_ch;
    d.kernel = k;
    d.stride = s;
    d.pad = p;
    return d;
  }
  static LayerDesc bn() { return LayerDesc{LayerKind::BatchNorm}; }
  static LayerDesc relu() { return LayerDesc{LayerKind::ReLU}; }
  static LayerDesc maxpool(std::int64_t w, std::int64_t s) {
    LayerDesc d;
    d.kind = LayerKind::MaxPool;
    d.window = w;
    d.pool_stride = s;
    return d;
  }
  static LayerDesc avgpool(std::int64_t w, std::int64_t s) {
    LayerDesc d;
    d.kind = LayerKind::AvgPool;
    d.window = w;
    d.pool_stride = s;
    return d;
  }
  static LayerDesc fc(std::int64_t out) {
    LayerDesc d;
    d.kind = LayerKind::Fc;
    d.out_features = out;
    return d;
  }
};

struct NetworkSpec {
  std::string name = "custom";
  Shape input_shape;  // C,H,W
  std::int64_t num_classes = 0;
  std::vector<LayerDesc> layers;

  /// Per-layer output shapes (without the batch axis); throws if consecutive
  /// layers do not compose or the classifier is missing/misplaced.
  std::vector<Shape> infer_shapes() const {
    if (input_shape.size() != 3) throw std::invalid_argument("NetworkSpec: input shape must be CxHxW");
    if (layers.empty() || layers.back().kind != LayerKind::Fc)
      throw std::invalid_argument("NetworkSpec: network must end in one fc classifier");
    std::vector<Shape> shapes;
    Shape cur = input_shape;
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const LayerDesc& d = layers[li];
      if (d.kind == LayerKind::Fc && li + 1 != layers.size())
        throw std::invalid_argument("NetworkSpec: fc allowed only as the final layer");
      switch (d.kind) {
        case LayerKind::Conv: {
          if (cur.size() != 3) throw std::invalid_argument("NetworkSpec: conv needs CxHxW input");
          const std::int64_t ho = conv_out_extent(cur[1], d.kernel, d.stride, d.pad);
          const std::int64_t wo = conv_out_extent(cur[2], d.kernel, d.stride, d.pad);
          if (ho < 1 || wo < 1)
            throw std::invalid_argument("NetworkSpec: conv output empty at layer " + std::to_string(li));
          cur = {d.out_channels, ho, wo};
          break;
        }
        case LayerKind::BatchNorm:
        case LayerKind::ReLU:
          break;
        case LayerKind::MaxPool:
        case LayerKind::AvgPool: {
          if (cur.size() != 3) throw std::invalid_argument("NetworkSpec: pool needs CxHxW input");
          const std::int64_t ho = (cur[1] - d.window) / d.pool_stride + 1;
          const std::int64_t wo = (cur[2] - d.window) / d.pool_stride + 1;
          if (ho < 1 || wo < 1)
            throw std::invalid_argument("NetworkSpec: pool window does not fit at layer " + std::to_string(li));
          cur = {cur[0], ho, wo};
          break;
        }
        case LayerKind::Fc: {
          if (d.out_features != num_classes)
            throw std::invalid_argument("NetworkSpec: classifier width must equal class count");
          cur = {d.out_features};
          break;
        }
      }
      shapes.push_back(cur);
    }
    return shapes;
  }
};

/// Two conv/BN blocks and a classifier; small enough for desk-scale
/// experiments yet wide enough that the second conv spans multiple tiles on
/// a 64x64 crossbar.
inline NetworkSpec smallconv_spec(std::int64_t in_channels = 1, std::int64_t image = 16,
                                  std::int64_t classes = 4) {
  NetworkSpec s;
  s.name = "smallconv";
  s.input_shape = {in_channels, image, image};
  s.num_classes = classes;
  s.layers = {LayerDesc::conv(16, 3, 1, 1), LayerDesc::bn(),          LayerDesc::relu(),
              LayerDesc::maxpool(2, 2),     LayerDesc::conv(32, 3, 1, 1), LayerDesc::bn(),
              LayerDesc::relu(),            LayerDesc::maxpool(2, 2), LayerDesc::fc(classes)};
  return s;
}

struct GradientSet {
  std::vector<std::vector<float>> dgamma;  // per BN layer
  std::vector<std::vector<float>> dbeta;
  std::vector<Tensor> dconv;  // per conv layer, pretraining only
  Tensor dfc_weight;
  Tensor dfc_bias;
  bool has_weight_grads = false;
};

class Model {
 public:
  Model() = default;

  explicit Model(NetworkSpec spec) : spec_(std::move(spec)) {
    const auto shapes = spec_.infer_shapes();
    Shape cur = spec_.input_shape;
    for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
      const LayerDesc& d = spec_.layers[li];
      if (d.kind == LayerKind::Conv) {
        conv_weights_.emplace_back(Shape{d.out_channels, cur[0], d.kernel, d.kernel});
      } else if (d.kind == LayerKind::BatchNorm) {
        bn_states_.emplace_back(cur[0]);
      } else if (d.kind == LayerKind::Fc) {
        fc_weight_ = Tensor({d.out_features, shape_numel(cur)});
        fc_bias_ = Tensor({d.out_features});
      }
      cur = shapes[li];
    }
  }

  void init_params(std::uint64_t seed) {
    rng::Sequence rs(seed);
    for (auto& w : conv_weights_) {
      const double fan_in = static_cast<double>(w.extent(1) * w.extent(2) * w.extent(3));
      const double std = std::sqrt(2.0 / fan_in);
      for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<float>(rs.normal() * std);
    }
    const double fan_in = static_cast<double>(fc_weight_.extent(1));
    const double std = std::sqrt(2.0 / fan_in);
    for (std::int64_t i = 0; i < fc_weight_.numel(); ++i)
      fc_weight_[i] = static_cast<float>(rs.normal() * std);
    for (std::int64_t i = 0; i < fc_bias_.numel(); ++i) fc_bias_[i] = 0.0f;
  }

  const NetworkSpec& spec() const { return spec_; }
  std::size_t num_conv() const { return conv_weights_.size(); }
  std::size_t num_bn() const { return bn_states_.size(); }

  Tensor& conv_weight(std::size_t i) { return conv_weights_.at(i); }
  const Tensor& conv_weight(std::size_t i) const { return conv_weights_.at(i); }
  BNState& bn_state(std::size_t i) { return bn_states_.at(i); }
  const BNState& bn_state(std::size_t i) const { return bn_states_.at(i); }
  Tensor& fc_weight() { return fc_weight_; }
  const Tensor& fc_weight() const { return fc_weight_; }
  Tensor& fc_bias() { return fc_bias_; }
  const Tensor& fc_bias() const { return fc_bias_; }

  /// Activation precision fed to each conv layer; 0 keeps full precision.
  int act_quant_bits() const { return act_quant_bits_; }
  void set_act_quant_bits(int b) { act_quant_bits_ = b; }

  struct Caches {
    std::vector<ConvCache> conv;
    std::vector<BNCache> bn;
    std::vector<Tensor> relu_mask;
    std::vector<PoolCache> pool;
    FcCache fc;
  };

  Tensor forward(const Tensor& x, BNMode mode, Caches* caches = nullptr,
                 bool keep_conv_inputs = false, bool update_running = true) {
    if (x.rank() != 4 || x.extent(1) != spec_.input_shape[0] ||
        x.extent(2) != spec_.input_shape[1] || x.extent(3) != spec_.input_shape[2])
      throw std::invalid_argument("Model::forward: input " + shape_str(x.shape()) +
                                  " does not match network input " + shape_str(spec_.input_shape));
    if (caches) {
      caches->conv.resize(conv_weights_.size());
      caches->bn.resize(bn_states_.size());
      caches->relu_mask.clear();
      caches->pool.clear();
    }
    Tensor cur = x;
    std::size_t ci = 0, bi = 0;
    for (const LayerDesc& d : spec_.layers) {
      switch (d.kind) {
        case LayerKind::Conv: {
          if (act_quant_bits_ > 0) cur = fake_quantize(cur, act_quant_bits_);
          cur = conv2d_forward(cur, conv_weights_[ci], d.stride, d.pad,
                               caches ? &caches->conv[ci] : nullptr, keep_conv_inputs);
          ++ci;
          break;
        }
        case LayerKind::BatchNorm: {
          cur = batchnorm_forward(cur, bn_states_[bi], mode, caches ? &caches->bn[bi] : nullptr,
                                  update_running);
          ++bi;
          break;
        }
        case LayerKind::ReLU: {
          if (caches) {
            caches->relu_mask.emplace_back();
            cur = relu_forward(cur, &caches->relu_mask.back());
          } else {
            cur = relu_forward(cur);
          }
          break;
        }
        case LayerKind::MaxPool: {
          if (caches) caches->pool.emplace_back();
          cur = maxpool_forward(cur, d.window, d.pool_stride, caches ? &caches->pool.back() : nullptr);
          break;
        }
        case LayerKind::AvgPool: {
          if (caches) caches->pool.emplace_back();
          cur = avgpool_forward(cur, d.window, d.pool_stride, caches ? &caches->pool.back() : nullptr);
          break;
        }
        case LayerKind::Fc:
          cur = fc_forward(cur, fc_weight_, fc_bias_, caches ? &caches->fc : nullptr);
          break;
      }
    }
    return cur;
  }

  /// Backpropagates dlogits through the whole stack. Weight gradients are
  /// formed only when requested; BN gradients always are.
  GradientSet backward(const Tensor& dlogits, const Caches& caches, bool want_weight_grads) const {
    GradientSet g;
    g.dgamma.resize(bn_states_.size());
    g.dbeta.resize(bn_states_.size());
    if (want_weight_grads) g.dconv.resize(conv_weights_.size());
    g.has_weight_grads = want_weight_grads;

    Tensor cur = dlogits;
    std::size_t ci = conv_weights_.size(), bi = bn_states_.size();
    std::size_t ri = caches.relu_mask.size(), pi = caches.pool.size();
    for (auto it = spec_.layers.rbegin(); it != spec_.layers.rend(); ++it) {
      switch (it->kind) {
        case LayerKind::Fc: {
          FcGrads fg = fc_backward(cur, fc_weight_, caches.fc, want_weight_grads);
          if (want_weight_grads) {
            g.dfc_weight = std::move(fg.dweight);
            g.dfc_bias = std::move(fg.dbias);
          }
          cur = std::move(fg.dinput);
          break;
        }
        case LayerKind::Conv: {
          --ci;
          // dinput ignores the activation quantizer (straight-through)
          ConvGrads cg = conv2d_backward(reshape_like_conv_out(cur, caches.conv[ci]),
                                         conv_weights_[ci], caches.conv[ci], want_weight_grads);
          if (want_weight_grads) g.dconv[ci] = std::move(*cg.dweight);
          cur = std::move(cg.dinput);
          break;
        }
        case LayerKind::BatchNorm: {
          --bi;
          BNGrads bg = batchnorm_backward(reshape_like(cur, caches.bn[bi].xhat.shape()), caches.bn[bi]);
          g.dgamma[bi] = std::move(bg.dgamma);
          g.dbeta[bi] = std::move(bg.dbeta);
          cur = std::move(bg.dx);
          break;
        }
        case LayerKind::ReLU: {
          --ri;
          cur = relu_backward(reshape_like(cur, caches.relu_mask[ri].shape()), caches.relu_mask[ri]);
          break;
        }
        case LayerKind::MaxPool: {
          --pi;
          cur = maxpool_backward(reshape_like_pool_out(cur, caches.pool[pi]), caches.pool[pi]);
          break;
        }
        case LayerKind::AvgPool: {
          --pi;
          cur = avgpool_backward(reshape_like_pool_out(cur, caches.pool[pi]), caches.pool[pi]);
          break;
        }
      }
    }
    return g;
  }

  void sgd_step_all(const GradientSet& g, double lr) {
    if (!g.has_weight_grads) throw std::invalid_argument("sgd_step_all: gradients lack weight terms");
    for (std::size_t i = 0; i < conv_weights_.size(); ++i) apply_step(conv_weights_[i], g.dconv[i], lr);
    apply_step(fc_weight_, g.dfc_weight, lr);
    apply_step(fc_bias_, g.dfc_bias, lr);
    sgd_step_bn(g, lr);
  }

  void sgd_step_bn(const GradientSet& g, double lr) {
    for (std::size_t i = 0; i < bn_states_.size(); ++i) {
      auto& st = bn_states_[i];
      for (std::size_t c = 0; c < st.gamma.size(); ++c) {
        st.gamma[c] = static_cast<float>(static_cast<double>(st.gamma[c]) -
                                         lr * static_cast<double>(g.dgamma[i][c]));
        st.beta[c] = static_cast<float>(static_cast<double>(st.beta[c]) -
                                        lr * static_cast<double>(g.dbeta[i][c]));
      }
    }
  }

  /// FNV-1a over the bit patterns of every conv and fc weight. Unchanged
  /// checksum == bit-identical weights.
  std::uint64_t weight_checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    auto fold = [&h](const Tensor& t) {
      for (std::int64_t i = 0; i < t.numel(); ++i) {
        std::uint32_t bits;
        const float v = t[i];
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, sizeof(bits));
        for (int b = 0; b < 4; ++b) {
          h ^= (bits >> (8 * b)) & 0xFFu;
          h *= 1099511628211ull;
        }
      }
    };
    for (const auto& w : conv_weights_) fold(w);
    fold(fc_weight_);
    fold(fc_bias_);
    return h;
  }

 private:
  static Tensor reshape_like(const Tensor& t, const Shape& s) {
    return t.shape() == s ? t : t.reshaped(s);
  }
  static Tensor reshape_like_conv_out(const Tensor& t, const ConvCache& c) {
    if (t.rank() == 4) return t;
    const std::int64_t N = c.input_shape[0];
    const std::int64_t O = c.weight_shape[0];
    const std::int64_t Ho = conv_out_extent(c.input_shape[2], c.weight_shape[2], c.stride, c.pad);
    const std::int64_t Wo = conv_out_extent(c.input_shape[3], c.weight_shape[3], c.stride, c.pad);
    return t.reshaped({N, O, Ho, Wo});
  }
  static Tensor reshape_like_pool_out(const Tensor& t, const PoolCache& c) {
    if (t.rank() == 4) return t;
    const std::int64_t N = c.input_shape[0], C = c.input_shape[1];
    const std::int64_t Ho = (c.input_shape[2] - c.window) / c.stride + 1;
    const std::int64_t Wo = (c.input_shape[3] - c.window) / c.stride + 1;
    return t.reshaped({N, C, Ho, Wo});
  }
  static void apply_step(Tensor& w, const Tensor& dw, double lr) {
    for (std::int64_t i = 0; i < w.numel(); ++i)
      w[i] = static_cast<float>(static_cast<double>(w[i]) - lr * static_cast<double>(dw[i]));
  }

  NetworkSpec spec_;
  std::vector<Tensor> conv_weights_;
  std::vector<BNState> bn_states_;
  Tensor fc_weight_;
  Tensor fc_bias_;
  int act_quant_bits_ = 0;
};

}  // namespace xbarsim

#endif
