#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "absl/random/internal/pcg_engine.h"

namespace shs {

/// One SplitMix64 output for the given state word.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives independent stream seeds from a master seed.
///
/// stream(i, r) = splitmix64(master ^ (0x9E3779B97F4A7C15 * (i * 2^20 + r + 1)))
/// with all arithmetic modulo 2^64. Distinct (i, r) pairs with r < 2^20 map
/// to distinct multipliers, so agents and replications never share a stream.
struct SeedPolicy {
  std::uint64_t master = 0;

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kReplicationBits = 20;

  constexpr std::uint64_t stream(std::uint64_t agent, std::uint64_t replication) const noexcept {
    const std::uint64_t key = (agent << kReplicationBits) + replication + 1;
    return splitmix64(master ^ (kGolden * key));
  }
};

/// Random source for one logical stream: PCG64 (XSL-RR 128/64, one stream),
/// 16 bytes of state so that very large collectives stay cache friendly.
/// Transforms from raw bits are written out explicitly so that draws are
/// bit-identical across standard libraries.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  using Engine = absl::random_internal::pcg64_2018_engine;

  explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

  static constexpr result_type min() { return Engine::min(); }
  static constexpr result_type max() { return Engine::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

  /// Index drawn from an unnormalised discrete distribution.
  template <typename Weights>
  std::size_t discrete(const Weights& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    std::size_t last = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k] <= 0.0) continue;
      last = k;
      if (u < weights[k]) return k;
      u -= weights[k];
    }
    return last;
  }

 private:
  Engine engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace shs
