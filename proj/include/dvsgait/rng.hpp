#pragma once

#include <cmath>
#include <cstdint>

namespace dvsgait {

// All randomness in the library goes through this generator so that results
// are bit-reproducible across platforms; std:: distributions are
// implementation-defined and deliberately avoided.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  // xoshiro256++
  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, 1) with 53 random mantissa bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  bool coin() { return (next_u64() & 1ULL) != 0; }

  // Box-Muller, no cached spare so the consumption pattern is predictable
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Knuth sampling; lambda is split to keep exp(-lambda) away from underflow.
  std::uint64_t poisson(double lambda) {
    std::uint64_t count = 0;
    while (lambda > 30.0) {
      // poisson(a + b) = poisson(a) + poisson(b) for independent draws
      count += poisson_small(30.0);
      lambda -= 30.0;
    }
    return count + poisson_small(lambda);
  }

 private:
  std::uint64_t poisson_small(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
};

// Counter-based key so per-pixel draws are independent of iteration order.
inline Rng keyed_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t sm = seed;
  std::uint64_t h = splitmix64(sm);
  sm = h ^ (a * 0xd6e8feb86659fd93ULL + 0x2545f4914f6cdd1dULL);
  h = splitmix64(sm);
  sm = h ^ (b * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
  return Rng(splitmix64(sm));
}

}  // namespace dvsgait
