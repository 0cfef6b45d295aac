#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "msad/tensor.hpp"

namespace msad {

// splitmix64 finalizer; used for keyed hashing so generated data depends only
// on the key tuple, never on call order.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_key(std::uint64_t seed, std::string_view tag, std::uint64_t a = 0,
                       std::uint64_t b = 0);

// Deterministic random stream. The mt19937_64 bit stream is pinned by the
// standard; doubles are derived with exact arithmetic only.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(gen_() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; consumes two uniforms per draw
  double gaussian();

  void fill_gaussian(const Tensor& t, double stddev);

 private:
  std::mt19937_64 gen_;
};

// Named-parameter initializer: each tensor gets its own stream keyed by
// (seed, name), so layouts can change without reshuffling unrelated weights.
Tensor gaussian_tensor(Shape shape, double stddev, std::uint64_t seed, std::string_view name);

}  // namespace msad
