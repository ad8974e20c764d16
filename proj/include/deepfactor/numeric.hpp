#pragma once

#include <cmath>
#include <numbers>

namespace deepfactor {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;

inline double log_normal_pdf(double x, double sd) {
  const double z = x / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

inline double log_poisson_pmf(std::size_t k, double mean) {
  const double kd = static_cast<double>(k);
  if (mean == 0.0) return k == 0 ? 0.0 : -INFINITY;
  return kd * std::log(mean) - mean - std::lgamma(kd + 1.0);
}

}  // namespace deepfactor
