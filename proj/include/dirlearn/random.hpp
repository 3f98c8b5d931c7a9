#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "dirlearn/errors.hpp"

namespace dirlearn {

/// SplitMix64 step; used to derive independent seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministically derives a child seed from a master seed and a path of
/// stream labels, so that independent components never share a stream.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = master;
  (void)splitmix64(s);
  for (std::uint64_t p : path) {
    s ^= 0x9e3779b97f4a7c15ULL + p;
    (void)splitmix64(s);
  }
  return splitmix64(s);
}

/// Seeded random stream. All randomness in the library flows through one of
/// these; a fixed seed fixes every draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::mt19937_64& engine() { return engine_; }

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(engine_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    return d(engine_);
  }

  /// Uniform integer in [0, n).
  int uniform_int(int n) {
    std::uniform_int_distribution<int> d(0, n - 1);
    return d(engine_);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), engine_);
  }

  /// k distinct values from {0..n-1} \ {exclude}, in draw order.
  std::vector<int> sample_distinct(int n, int k, int exclude = -1) {
    std::vector<int> pool;
    pool.reserve(n);
    for (int i = 0; i < n; ++i) {
      if (i != exclude) pool.push_back(i);
    }
    if (k > static_cast<int>(pool.size())) {
      throw PoolExhaustedError("sample_distinct: requested " +
                               std::to_string(k) + " of " +
                               std::to_string(pool.size()) + " candidates");
    }
    // Partial Fisher-Yates.
    for (int i = 0; i < k; ++i) {
      int j = i + uniform_int(static_cast<int>(pool.size()) - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dirlearn
