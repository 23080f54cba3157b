#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace nstab {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace detail {

// Ziggurat tables (128 layers, Marsaglia & Tsang; double-precision layout after Doornik).
struct ZigguratTables {
  static constexpr int kLayers = 128;
  static constexpr double kR = 3.442619855899;
  static constexpr double kV = 9.91256303526217e-3;
  std::array<double, kLayers + 1> x{};
  std::array<double, kLayers> ratio{};

  ZigguratTables() {
    double f = std::exp(-0.5 * kR * kR);
    x[0] = kV / f;
    x[1] = kR;
    x[kLayers] = 0.0;
    for (int i = 2; i < kLayers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

inline const ZigguratTables& ziggurat() {
  static const ZigguratTables tables;
  return tables;
}

}  // namespace detail

/// Counter-based generator: output i is mix64(key + i * golden), so a stream is
/// fully determined by (seed, stream id) and can be split without shared state.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(seed ^ mix64(stream * kGolden + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix64(key_ + (++counter_) * kGolden); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal by the ziggurat method.
  double normal() {
    const auto& zt = detail::ziggurat();
    for (;;) {
      const std::uint64_t bits = (*this)();
      const int layer = static_cast<int>(bits & 127u);
      const double u = 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
      if (std::fabs(u) < zt.ratio[layer]) return u * zt.x[layer];
      if (layer == 0) return tail(u < 0.0);
      const double x = u * zt.x[layer];
      const double f0 = std::exp(-0.5 * (zt.x[layer] * zt.x[layer] - x * x));
      const double f1 = std::exp(-0.5 * (zt.x[layer + 1] * zt.x[layer + 1] - x * x));
      if (f1 + uniform() * (f0 - f1) < 1.0) return x;
    }
  }

  std::uint64_t counter() const { return counter_; }

 private:
  double tail(bool negative) {
    constexpr double r = detail::ZigguratTables::kR;
    double x, y;
    do {
      x = std::log(uniform()) / r;
      y = std::log(uniform());
    } while (-2.0 * y < x * x);
    return negative ? x - r : r - x;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace nstab
