#ifndef XBARSIM_DEVICE_HPP
#define XBARSIM_DEVICE_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "xbarsim/tensor.hpp"

namespace xbarsim {

/// sigma expressed as a fraction of the programmable conductance range.
struct FractionalNoise {
  double sigma = 0.0;
};

/// sigma(G) = a*G + b with G and sigma in microsiemens.
struct AffineNoise {
  double a = 0.0;
  double b = 0.0;
};

using ReadNoiseModel = std::variant<FractionalNoise, AffineNoise>;

struct DeviceSpec {
  std::string name;
  int bits = 4;
  double r_on_ohm = 0.0;      // G_MAX = 1/r_on
  double on_off_ratio = 0.0;  // G_MAX / G_MIN
  double nu = 0.0;            // temporal drift coefficient
  ReadNoiseModel read_noise = FractionalNoise{0.0};

  double g_max_us() const { return 1.0e6 / r_on_ohm; }
  double g_min_us() const { return g_max_us() / on_off_ratio; }
  int levels() const { return (1 << bits) - 1; }
  double level_step_us() const { return (g_max_us() - g_min_us()) / levels(); }

  void validate() const {
    if (!(r_on_ohm > 0.0)) throw std::invalid_argument("DeviceSpec " + name + ": r_on must be > 0");
    if (!(on_off_ratio > 1.0))
      throw std::invalid_argument("DeviceSpec " + name + ": ON/OFF ratio must be > 1");
    if (bits < 1) throw std::invalid_argument("DeviceSpec " + name + ": bits must be >= 1");
    if (nu < 0.0) throw std::invalid_argument("DeviceSpec " + name + ": nu must be >= 0");
    if (const auto* f = std::get_if<FractionalNoise>(&read_noise)) {
      if (f->sigma < 0.0)
        throw std::invalid_argument("DeviceSpec " + name + ": fractional sigma must be >= 0");
    } else {
      const auto& aff = std::get<AffineNoise>(read_noise);
      if (aff.a * g_min_us() + aff.b < 0.0 || aff.a * g_max_us() + aff.b < 0.0)
        throw std::invalid_argument("DeviceSpec " + name +
                                    ": affine sigma is negative inside [G_MIN, G_MAX]");
    }
  }
};

inline std::vector<DeviceSpec> builtin_devices() {
  return {
      DeviceSpec{"FeFET", 4, 222.22e3, 100.0, 0.10, FractionalNoise{0.05}},
      DeviceSpec{"PCM-i", 4, 250.0e3, 40.0, 0.04, AffineNoise{0.03, 0.13}},
      DeviceSpec{"PCM-ii", 4, 125.0e3, 80.0, 0.04, AffineNoise{0.03, 0.13}},
      DeviceSpec{"RRAM", 4, 50.0e3, 10.0, 0.04, FractionalNoise{0.1}},
  };
}

inline DeviceSpec find_device(const std::string& name) {
  for (auto& d : builtin_devices())
    if (d.name == name) return d;
  throw std::invalid_argument("unknown device preset '" + name + "'");
}

struct QuantSpec {
  int weight_bits = 8;
  int slice_bits = 4;
  int act_bits = 8;

  int num_slices() const { return weight_bits / slice_bits; }
  std::int64_t offset() const { return std::int64_t{1} << (weight_bits - 1); }
  std::int64_t level_max() const { return offset() - 1; }

  void validate() const {
    if (weight_bits < slice_bits || slice_bits < 1)
      throw std::invalid_argument("QuantSpec: need weight_bits >= slice_bits >= 1");
    if (weight_bits % slice_bits != 0)
      throw std::invalid_argument("QuantSpec: weight_bits must be divisible by slice_bits");
  }
};

struct QuantizedLayer {
  std::vector<std::int32_t> levels;  // signed, in [-2^(B-1), 2^(B-1)-1]
  Shape shape;
  double delta = 1.0;  // weight units per level
};

inline double round_half_away(double v) { return std::round(v); }

/// Symmetric per-layer quantization: delta = max|w| / (2^(B-1)-1).
inline QuantizedLayer quantize_layer(const Tensor& w, const QuantSpec& q) {
  q.validate();
  if (w.empty()) throw std::invalid_argument("quantize_layer: empty tensor");
  double maxabs = 0.0;
  for (std::int64_t i = 0; i < w.numel(); ++i) {
    const double v = static_cast<double>(w[i]);
    if (!std::isfinite(v)) throw std::invalid_argument("quantize_layer: non-finite weight");
    maxabs = std::max(maxabs, std::abs(v));
  }
  QuantizedLayer out;
  out.shape = w.shape();
  out.levels.resize(static_cast<std::size_t>(w.numel()));
  if (maxabs == 0.0) {
    out.delta = 1.0;
    return out;  // all levels zero, dequantizes to exact zeros
  }
  out.delta = maxabs / static_cast<double>(q.level_max());
  const double lo = -static_cast<double>(q.offset());
  const double hi = static_cast<double>(q.level_max());
  for (std::int64_t i = 0; i < w.numel(); ++i) {
    double l = round_half_away(static_cast<double>(w[i]) / out.delta);
    l = std::min(std::max(l, lo), hi);
    out.levels[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(l);
  }
  return out;
}

inline Tensor dequantize_layer(const QuantizedLayer& ql) {
  Tensor w(ql.shape);
  for (std::int64_t i = 0; i < w.numel(); ++i)
    w[i] = static_cast<float>(static_cast<double>(ql.levels[static_cast<std::size_t>(i)]) *
                              ql.delta);
  return w;
}

/// Offset encoding: u = level + 2^(B-1), split into base-2^slice_bits digits,
/// most significant first.
inline std::vector<std::int32_t> encode_slices(std::int32_t level, const QuantSpec& q) {
  if (level < -q.offset() || level > q.level_max())
    throw std::invalid_argument("encode_slices: level " + std::to_string(level) +
                                " outside signed " + std::to_string(q.weight_bits) + "-bit range");
  std::int64_t u = static_cast<std::int64_t>(level) + q.offset();
  const int n = q.num_slices();
  const std::int64_t base = std::int64_t{1} << q.slice_bits;
  std::vector<std::int32_t> slices(static_cast<std::size_t>(n));
  for (int s = n - 1; s >= 0; --s) {
    slices[static_cast<std::size_t>(s)] = static_cast<std::int32_t>(u % base);
    u /= base;
  }
  return slices;
}

inline std::int32_t decode_slices(const std::vector<std::int32_t>& slices, const QuantSpec& q) {
  std::int64_t u = 0;
  for (auto s : slices) u = (u << q.slice_bits) | static_cast<std::int64_t>(s);
  return static_cast<std::int32_t>(u - q.offset());
}

inline double level_to_conductance(std::int32_t slice_level, const DeviceSpec& d) {
  if (slice_level < 0 || slice_level > d.levels())
    throw std::invalid_argument("level_to_conductance: slice level " +
                                std::to_string(slice_level) + " outside [0, " +
                                std::to_string(d.levels()) + "]");
  return d.g_min_us() + static_cast<double>(slice_level) * d.level_step_us();
}

/// Continuous inverse of level_to_conductance. Noisy conductances may fall
/// outside [G_MIN, G_MAX]; the result is deliberately not rounded or clamped.
inline double conductance_to_level(double g_us, const DeviceSpec& d) {
  if (!std::isfinite(g_us)) throw std::invalid_argument("conductance_to_level: non-finite input");
  return (g_us - d.g_min_us()) / d.level_step_us();
}

/// Absolute read-noise sigma in microsiemens for a device at conductance G.
inline double read_noise_sigma(double g_us, const DeviceSpec& d) {
  if (const auto* f = std::get_if<FractionalNoise>(&d.read_noise))
    return f->sigma * (d.g_max_us() - d.g_min_us());
  const auto& a = std::get<AffineNoise>(d.read_noise);
  return a.a * g_us + a.b;
}

}  // namespace xbarsim

#endif
