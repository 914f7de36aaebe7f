#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cgcn {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Deterministic RNG. mt19937_64 supplies the bit stream (fully specified by
/// the standard); the distributions are hand-rolled because the std::
/// distribution algorithms are implementation-defined and the pipeline
/// promises byte-identical results for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream),
        gen_(detail::splitmix64(detail::splitmix64(seed) ^ stream)) {}

  std::uint64_t next() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no cached spare; call order defines the stream).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Uniform integer in [lo, hi], inclusive, rejection-sampled (no modulo bias).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next());  // full 64-bit span
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return lo + static_cast<std::int64_t>(x % range);
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct indices from [0, n), returned sorted ascending.
  std::vector<std::size_t> sample_sorted(std::size_t n, std::size_t k);

  /// Independent sub-stream derived from this RNG's identity (not its state).
  Rng fork(std::uint64_t tag) const { return Rng(seed_, detail::splitmix64(stream_ ^ tag) | 1); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 gen_;
};

inline std::vector<std::size_t> Rng::sample_sorted(std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  // Partial Fisher-Yates: the first k slots end up holding the sample.
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const auto j = static_cast<std::size_t>(
        uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n) - 1));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k < n ? k : n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace cgcn
