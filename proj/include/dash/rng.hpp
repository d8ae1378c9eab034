#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace dash {

/// SplitMix64 finaliser; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `index` under `parent`. All randomness in the
/// project flows master -> command -> instance -> run through this function,
/// so results never depend on evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(parent ^ mix64(index + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag) noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return derive_seed(parent, h);
}

/// Portable random source. The engine is std::mt19937_64 (fully specified
/// by the standard); the variate transforms are written out here because
/// std::*_distribution output differs between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] (inclusive), rejection-sampled.
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(engine_());
    const std::uint64_t limit = (~std::uint64_t{0} / range) * range;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % range);
  }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(integer(0, static_cast<std::int64_t>(n) - 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (one value per call, no caching so the
  /// stream stays position-independent).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Weibull(shape k, scale lambda) by inverse CDF.
  double weibull(double shape, double scale) {
    const double u = uniform();
    return scale * std::pow(-std::log1p(-u), 1.0 / shape);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dash
