#ifndef MIHASH_RNG_HPP
#define MIHASH_RNG_HPP

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace mihash {

// Seeded deterministic random source. Every stochastic step in the project
// (data synthesis, weight init, shuffling, noise injection) draws from an
// explicit Rng instance; there is no global generator. Identical seeds give
// identical streams, and the distributions below are implemented by hand so
// the streams do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform real in [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; pairs are cached so draws stay cheap.
  double normal();
  double normal(double mean, double stddev);

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Independent generator derived from this generator's seed and a stream
  // id. Forking does not advance this generator's own stream.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer; used for seed derivation and content hashing.
std::uint64_t mix64(std::uint64_t x);

}  // namespace mihash

#endif  // MIHASH_RNG_HPP
