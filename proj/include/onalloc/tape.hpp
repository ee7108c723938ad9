#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace onalloc {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic uniform source. The bits-to-double conversion is pinned here
/// rather than delegated to std::uniform_real_distribution, whose output is
/// not specified identically across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed_scramble(seed)) {}

  std::uint64_t bits() { return eng_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below(0)");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = eng_();
    while (v >= limit) v = eng_();
    return v % n;
  }

  /// In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

 private:
  static std::uint64_t seed_scramble(std::uint64_t seed) {
    std::uint64_t s = seed;
    return detail::splitmix64(s);
  }
  std::mt19937_64 eng_;
};

/// Independent stream seed for trial `stream` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
  return detail::splitmix64(s);
}

/// One realization of the algorithm's randomness, replayable by index.
/// U tapes index offline vertices (thresholds), Z tapes index online arrivals
/// (the uniform variables whose sorted order defines a random arrival order).
struct RandomTape {
  enum class Variable { U, Z };
  Variable variable = Variable::U;
  std::uint64_t seed = 0;
  std::vector<double> values;
};

inline RandomTape make_tape(RandomTape::Variable var, std::size_t count, std::uint64_t seed) {
  RandomTape t;
  t.variable = var;
  t.seed = seed;
  t.values.resize(count);
  Rng rng(seed);
  for (auto& v : t.values) v = rng.uniform01();
  return t;
}

}  // namespace onalloc
