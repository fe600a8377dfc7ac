#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace cbipw {

// Seeded, portable random number generation.
//
// Every stochastic routine in the library draws from this generator rather
// than <random>, because the standard distributions are implementation
// defined and would break byte-identical reproducibility across toolchains.
// Generator: xoshiro256++ seeded through splitmix64. Substreams for parallel
// work are derived by index (see substream_seed), never by splitting state.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable substream seed for (master seed, stream index, salt). The salt
// separates independent uses that share a stream index, e.g. the MCMC of
// different methods inside one simulation replication.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t salt = 0) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64_next(s);
  s = a ^ (index * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
  std::uint64_t b = splitmix64_next(s);
  s = b ^ (salt * 0xd1b54a32d192ed03ULL + 1);
  return splitmix64_next(s);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on (0,1); never returns an exact endpoint.
  double uniform01() {
    double u;
    do {
      u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    } while (u <= 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double rate) { return -std::log(uniform01()) / rate; }

  // Gamma(shape, rate) by Marsaglia-Tsang, with the standard shape<1 boost.
  double gamma(double shape, double rate) {
    if (shape < 1.0) {
      const double u = uniform01();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  // Flat Dirichlet(1,...,1) weights scaled to sum to n.
  std::vector<double> dirichlet_times_n(std::size_t n) {
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& wi : w) {
      wi = exponential(1.0);
      total += wi;
    }
    const double scale = static_cast<double>(n) / total;
    for (auto& wi : w) wi *= scale;
    return w;
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cbipw
