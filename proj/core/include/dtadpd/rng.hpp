#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace dtadpd {

// Engine state depends only on (seed, stream), so replicate r of a run is the
// same no matter which thread executes it.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(seed & 0xffffffffu), std::uint32_t(seed >> 32),
                    std::uint32_t(stream & 0xffffffffu), std::uint32_t(stream >> 32)};
  return std::mt19937_64(seq);
}

// The samplers below deliberately avoid std::*_distribution: those are
// implementation-defined, and simulation output is required to match bit for
// bit across standard libraries and thread counts.

inline double uniform01(std::mt19937_64& gen) {
  return double(gen() >> 11) * 0x1.0p-53;  // [0, 1)
}

inline double uniform_range(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform01(gen);
}

// Unbiased draw on [lo, hi] by rejecting the wrap-around remainder.
inline long uniform_int(std::mt19937_64& gen, long lo, long hi) {
  const std::uint64_t n = std::uint64_t(hi - lo) + 1;
  const std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
  for (;;) {
    const std::uint64_t r = gen();
    if (r >= rem) return lo + long(r % n);
  }
}

// Box-Muller pair; the first uniform is reflected into (0, 1] so the log is
// always finite.
inline std::array<double, 2> normal_pair(std::mt19937_64& gen) {
  const double u1 = 1.0 - uniform01(gen);
  const double u2 = uniform01(gen);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 6.283185307179586 * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

// Bernoulli sum; study sizes stay in the hundreds, so this is fast enough
// and has no tail-dependent branch structure to drift between platforms.
inline long binomial(std::mt19937_64& gen, long n, double p) {
  long k = 0;
  for (long i = 0; i < n; ++i) k += uniform01(gen) < p ? 1 : 0;
  return k;
}

// Recorded in run manifests so outputs can be tied to the generator that
// produced them.
inline const char* rng_algorithm() {
  return "mt19937_64/seedseq(seed,stream)/box-muller/bernoulli-sum/v1";
}

}  // namespace dtadpd
