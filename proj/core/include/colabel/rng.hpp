#pragma once

#include <cstdint>
#include <random>

namespace colabel {

// Deterministic random stream. std::mt19937_64 output is pinned by the
// standard, and the uniform mapping below avoids std::uniform_real_distribution
// (whose results vary across standard libraries), so a given seed produces the
// same doubles on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  // Uniform in [0, 1) with 53 bits of randomness.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n << 2^53.
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

  std::uint64_t seed() const { return seed_; }

  // Derives an independent stream for a submodule without perturbing this one.
  Rng fork(std::uint64_t salt) const {
    std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace colabel
