#ifndef XBARSIM_RNG_HPP
#define XBARSIM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace xbarsim::rng {

inline constexpr double kPi = 3.14159265358979323846;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Order-free key derivation: fold one index into a key. Chaining mixes is
/// position sensitive, so (a,b) and (b,a) land on different streams.
inline std::uint64_t mix(std::uint64_t key, std::uint64_t v) {
  return splitmix64(key ^ (v + 0x9E3779B97F4A7C15ull + (key << 6) + (key >> 2)));
}

/// Uniform in the open interval (0,1).
inline double u01(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// One standard normal draw addressed purely by `key` (counter-based, no
/// state), so draws are identical no matter the order they are asked in.
inline double normal(std::uint64_t key) {
  const std::uint64_t a = splitmix64(key);
  const std::uint64_t b = splitmix64(key ^ 0xD1B54A32D192ED03ull);
  const double u1 = u01(a);
  const double u2 = u01(b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

/// Small sequential generator for weight init and shuffling. Avoids the
/// standard-library distributions so checkpoints are reproducible across
/// standard libraries too.
class Sequence {
 public:
  explicit Sequence(std::uint64_t seed) : state_(splitmix64(seed ^ 0x2545F4914F6CDD1Dull)) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return splitmix64(state_);
  }

  double uniform() { return u01(next_u64()); }

  double normal() {
    const double u1 = u01(next_u64());
    const double u2 = u01(next_u64());
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

template <typename T>
void shuffle(std::vector<T>& v, Sequence& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace xbarsim::rng

#endif
