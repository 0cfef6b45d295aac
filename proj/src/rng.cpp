#include "msad/rng.hpp"

#include <cmath>

namespace msad {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_key(std::uint64_t seed, std::string_view tag, std::uint64_t a,
                       std::uint64_t b) {
  std::uint64_t h = mix64(seed);
  for (unsigned char c : tag) h = mix64(h ^ c);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

double Rng::gaussian() {
  // guard against log(0); u1 in (0, 1]
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

void Rng::fill_gaussian(const Tensor& t, double stddev) {
  double* d = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) d[i] = stddev * gaussian();
}

Tensor gaussian_tensor(Shape shape, double stddev, std::uint64_t seed, std::string_view name) {
  Tensor t(std::move(shape));
  Rng rng(hash_key(seed, name));
  rng.fill_gaussian(t, stddev);
  return t;
}

}  // namespace msad
