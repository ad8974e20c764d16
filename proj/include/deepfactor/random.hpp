#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace deepfactor {

using Rng = std::mt19937_64;

/// Combines seed components into one well-mixed 64-bit seed (splitmix64
/// chain). Used to derive per-trial and per-layer streams from a base seed so
/// results do not depend on execution order.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

/// Seed drawn from std::random_device.
std::uint64_t entropy_seed();

double sample_uniform(Rng& rng);
double sample_normal(Rng& rng, double mean, double sd);
double sample_gamma(Rng& rng, double shape, double scale);
double sample_beta(Rng& rng, double a, double b);
/// Inverse-gamma with shape `shape` and scale `scale` (density ∝ x^{-shape-1} e^{-scale/x}).
double sample_inverse_gamma(Rng& rng, double shape, double scale);
std::size_t sample_poisson(Rng& rng, double mean);
bool sample_bernoulli(Rng& rng, double p);
std::size_t sample_uniform_int(Rng& rng, std::size_t lo, std::size_t hi);

}  // namespace deepfactor
