#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "drcn/error.hpp"
#include "drcn/tensor.hpp"

namespace drcn {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

// Deterministic random stream with named substreams. A substream's seed is a
// pure function of the parent's *seed* and the name — never of how many draws
// the parent has made — so adding a consumer in one part of the engine cannot
// shift the draws seen anywhere else.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  Rng substream(std::string_view name) const {
    return Rng(detail::splitmix64(seed_ ^ detail::fnv1a64(name)));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (!(lo <= hi)) throw ArgumentError("uniform range is empty: lo > hi");
    return lo + uniform() * (hi - lo);
  }

  // Integer translation offsets and the like: inclusive range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw ArgumentError("uniform_int range is empty: lo > hi");
    return lo + static_cast<std::int64_t>(
                    uniform_index(static_cast<std::size_t>(hi - lo) + 1));
  }

  // Unbiased index in [0, n) via rejection sampling.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw ArgumentError("uniform_index needs n > 0");
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % static_cast<std::uint64_t>(n);
    std::uint64_t draw;
    do {
      draw = next_u64();
    } while (draw >= bound);
    return static_cast<std::size_t>(draw % n);
  }

  // Box-Muller; no spare is cached so the draw count per call is fixed.
  double normal(double mean, double stddev) {
    if (stddev < 0) throw ArgumentError("normal stddev must be >= 0");
    const double u1 = 1.0 - uniform();  // (0,1] keeps the log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    return mean + stddev * (r * std::cos(two_pi * u2));
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

inline Tensor rand_normal(Rng& rng, std::vector<std::size_t> shape, double mean,
                          double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(mean, stddev);
  return t;
}

}  // namespace drcn
