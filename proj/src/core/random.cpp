#include "deepfactor/random.hpp"

#include <cmath>

namespace deepfactor {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

double sample_uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double sample_normal(Rng& rng, double mean, double sd) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

double sample_gamma(Rng& rng, double shape, double scale) {
  return std::gamma_distribution<double>(shape, scale)(rng);
}

double sample_beta(Rng& rng, double a, double b) {
  const double x = sample_gamma(rng, a, 1.0);
  const double y = sample_gamma(rng, b, 1.0);
  const double s = x + y;
  return s > 0.0 ? x / s : 0.0;
}

double sample_inverse_gamma(Rng& rng, double shape, double scale) {
  return 1.0 / sample_gamma(rng, shape, 1.0 / scale);
}

std::size_t sample_poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  return static_cast<std::size_t>(std::poisson_distribution<long long>(mean)(rng));
}

bool sample_bernoulli(Rng& rng, double p) {
  return sample_uniform(rng) < p;
}

std::size_t sample_uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace deepfactor
