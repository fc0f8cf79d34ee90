#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hawkesmix {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; used to decorrelate seeds and derive streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent generator for replicate `index` under `master_seed`.
/// Streams depend only on the pair, never on scheduling order.
inline Rng make_stream(std::uint64_t master_seed, std::uint64_t index = 0) {
  const std::uint64_t a = splitmix64(master_seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
  return Rng(seq);
}

/// Uniform draw on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential(Rng& rng, double rate) {
  return -std::log(uniform_open(rng)) / rate;
}

/// Poisson(mean) draw. Sequential inversion for small means, libstdc++'s
/// rejection sampler otherwise.
inline std::uint64_t poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  if (mean < 30.0) {
    const double u = uniform_open(rng);
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (p == 0.0 && u > cdf) break;  // u in the rounding gap of the upper tail
    }
    return k;
  }
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(rng);
}

}  // namespace hawkesmix
