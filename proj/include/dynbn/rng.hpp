#ifndef DYNBN_RNG_HPP
#define DYNBN_RNG_HPP

#include <cmath>
#include <cstdint>

namespace dynbn {

/// SplitMix64 generator with explicit floating-point conversions, so that
/// scenario generation is byte-reproducible for a given seed regardless of
/// the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Poisson count by inverse-CDF summation; adequate for the rates used in
  /// scenario templates (well below overflow territory).
  long poisson(double rate) {
    if (rate <= 0.0) return 0;
    const double u = uniform();
    double p = std::exp(-rate);
    double cdf = p;
    long k = 0;
    while (u > cdf && k < 100000) {
      ++k;
      p *= rate / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

 private:
  std::uint64_t state_;
};

}  // namespace dynbn

#endif  // DYNBN_RNG_HPP
