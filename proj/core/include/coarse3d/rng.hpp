#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace coarse3d {

// Deterministic RNG with portable distributions. std:: distribution objects
// are implementation-defined, so all draws are derived from the raw engine
// output here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return std::ldexp(static_cast<double>(eng_() >> 11), -53); }

  // uniform in (0, 1], safe as a log argument
  double uniform_open() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return v % n;
  }

  int uniform_int(int lo, int hi) {  // inclusive range
    return lo + static_cast<int>(uniform_int(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  // Box-Muller, one value per call (the pair's second half is discarded so
  // draw counts stay predictable)
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // standard Gumbel(0, 1)
  double gumbel() { return -std::log(-std::log(uniform_open())); }

 private:
  std::mt19937_64 eng_;
};

// splitmix64-style mixing, used to derive independent stream seeds from
// (seed, epoch, frame, tag) tuples
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0,
                                 std::uint64_t d = 0) {
  return mix_seed(mix_seed(mix_seed(mix_seed(a) ^ b) ^ c) ^ d);
}

}  // namespace coarse3d
