#include "deepfactor/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/inverse_gamma.hpp>

#include "deepfactor/error.hpp"

namespace deepfactor::oracle {

namespace {

// x * log(y) with the 0 * log(0) = 0 convention.
double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

double log_factorial(double n) { return std::lgamma(n + 1.0); }

}  // namespace

Grid1D::Grid1D(double lo, double hi, std::size_t num_points) : lo_(lo), hi_(hi) {
  if (!(lo < hi)) throw_invalid("Grid1D: lo must be below hi");
  if (num_points < 3) throw_invalid("Grid1D: need at least 3 points");
  values_.resize(num_points);
  const double h = (hi - lo) / static_cast<double>(num_points - 1);
  for (std::size_t i = 0; i < num_points; ++i) values_[i] = lo + h * static_cast<double>(i);
  values_.back() = hi;
}

std::vector<double> Grid1D::trapezoid_weights() const {
  std::vector<double> w(values_.size(), step());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

double grid_integrate(const std::function<double(double)>& f, const Grid1D& grid) {
  const auto w = grid.trapezoid_weights();
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += w[i] * f(grid.values()[i]);
  return total;
}

std::vector<BinaryMatrix> enumerate_masks(std::size_t n, std::size_t k) {
  const std::size_t bits = n * k;
  if (bits > 12) throw_invalid("enumerate_masks: N*K must not exceed 12");
  std::vector<BinaryMatrix> out;
  out.reserve(std::size_t{1} << bits);
  for (std::size_t code = 0; code < (std::size_t{1} << bits); ++code) {
    BinaryMatrix m(n, k);
    for (std::size_t b = 0; b < bits; ++b) m.set(b / k, b % k, ((code >> b) & 1U) != 0);
    out.push_back(std::move(m));
  }
  return out;
}

WeightPredictive marginal_weight_quadrature(double w, std::span<const double> other_slab_values,
                                            std::size_t n, double alpha_over_k, double ig_shape,
                                            double ig_scale, const QuadratureOptions& options) {
  const std::size_t m = other_slab_values.size();
  if (n < 1 || m > n - 1) throw_invalid("marginal_weight_quadrature: need m_minus <= N - 1");
  if (!(alpha_over_k > 0.0 && ig_shape > 0.0 && ig_scale > 0.0))
    throw_invalid("marginal_weight_quadrature: parameters must be positive");
  double ss = 0.0;
  for (double g : other_slab_values) ss += g * g;
  const double md = static_cast<double>(m);
  const double zeros = static_cast<double>(n - 1 - m);

  // p axis: posterior ∝ p^{m + c - 1} (1 - p)^{N-1-m}. With p = s^q and
  // q = 4/(m + c) the integrand in s behaves like s^3 at the origin, so the
  // Beta(c, 1) endpoint singularity does not spoil the trapezoid rule.
  std::vector<double> p_val;
  std::vector<double> p_logw;
  if (options.fixed_p) {
    p_val = {*options.fixed_p};
    p_logw = {0.0};
  } else {
    const Grid1D sgrid(0.0, 1.0, options.p_points);
    const auto tw = sgrid.trapezoid_weights();
    const double q = 4.0 / (md + alpha_over_k);
    for (std::size_t i = 0; i < sgrid.num_points(); ++i) {
      const double s = sgrid.values()[i];
      const double p = std::pow(s, q);
      const double lw = std::log(q) + xlogy(q * (md + alpha_over_k) - 1.0, s) +
                        xlogy(zeros, 1.0 - p) + std::log(tw[i]);
      p_val.push_back(p);
      p_logw.push_back(lw);
    }
  }

  // σ² axis on a log grid, u = log σ².
  boost::math::inverse_gamma_distribution<double> post(ig_shape + 0.5 * md, ig_scale + 0.5 * ss);
  const double upper = boost::math::quantile(boost::math::complement(post, 1e-10));
  const Grid1D ugrid(std::log(1e-6), std::log(std::max(upper, 1.0)), options.sigma2_points);
  const auto uw = ugrid.trapezoid_weights();
  std::vector<double> s_logw(ugrid.num_points());
  std::vector<double> s_slab(ugrid.num_points());
  const double log_prior_norm = ig_shape * std::log(ig_scale) - std::lgamma(ig_shape);
  for (std::size_t j = 0; j < ugrid.num_points(); ++j) {
    const double u = ugrid.values()[j];
    const double s2 = std::exp(u);
    double lw = log_prior_norm - (ig_shape + 1.0) * u - ig_scale / s2 + u + std::log(uw[j]);
    for (double g : other_slab_values)
      lw += -0.5 * std::log(2.0 * std::numbers::pi * s2) - 0.5 * g * g / s2;
    s_logw[j] = lw;
    s_slab[j] = std::exp(-0.5 * std::log(2.0 * std::numbers::pi * s2) - 0.5 * w * w / s2);
  }

  const double p_shift = *std::max_element(p_logw.begin(), p_logw.end());
  const double s_shift = *std::max_element(s_logw.begin(), s_logw.end());
  std::vector<double> p_w(p_logw.size());
  std::vector<double> s_w(s_logw.size());
  for (std::size_t i = 0; i < p_w.size(); ++i) p_w[i] = std::exp(p_logw[i] - p_shift);
  for (std::size_t j = 0; j < s_w.size(); ++j) s_w[j] = std::exp(s_logw[j] - s_shift);

  double z = 0.0;
  double spike = 0.0;
  double slab = 0.0;
  for (std::size_t i = 0; i < p_w.size(); ++i) {
    const double p = p_val[i];
    for (std::size_t j = 0; j < s_w.size(); ++j) {
      const double cell = p_w[i] * s_w[j];
      z += cell;
      spike += cell * (1.0 - p);
      slab += cell * p * s_slab[j];
    }
  }
  return {spike / z, slab / z};
}

std::map<ibp::LofClass, ClassFrequency> mc_lof_histogram(const MaskSampler& sampler, std::size_t n,
                                                         double alpha, std::size_t num_draws,
                                                         Rng& rng) {
  if (n > 3) throw_invalid("mc_lof_histogram: class space only enumerable for N <= 3");
  std::map<ibp::LofClass, ClassFrequency> out;
  for (std::size_t d = 0; d < num_draws; ++d) ++out[ibp::left_order_form(sampler(n, alpha, rng))].count;
  const double total = static_cast<double>(num_draws);
  for (auto& [cls, f] : out) {
    f.frequency = static_cast<double>(f.count) / total;
    f.standard_error = std::sqrt(f.frequency * (1.0 - f.frequency) / total);
  }
  return out;
}

double log_lof_correction_equal_history(const BinaryMatrix& Z) {
  // Brute-force grouping: compare every column against every other.
  std::vector<bool> seen(Z.cols(), false);
  double total = 0.0;
  for (std::size_t a = 0; a < Z.cols(); ++a) {
    if (seen[a] || Z.column_is_empty(a)) continue;
    std::size_t group = 0;
    for (std::size_t b = a; b < Z.cols(); ++b) {
      if (seen[b]) continue;
      bool same = true;
      for (std::size_t r = 0; r < Z.rows() && same; ++r) same = Z(r, a) == Z(r, b);
      if (same) {
        seen[b] = true;
        ++group;
      }
    }
    total += log_factorial(static_cast<double>(group));
  }
  return total;
}

double log_lof_correction_row_counts(const BinaryMatrix& Z) {
  double total = 0.0;
  for (std::size_t r = 0; r < Z.rows(); ++r) {
    std::size_t selected = 0;
    for (std::size_t c = 0; c < Z.cols(); ++c) selected += Z(r, c) ? 1 : 0;
    total += log_factorial(static_cast<double>(selected));
  }
  return total;
}

double ibp_class_mass_n2(double alpha, std::size_t max_per_history, bool row_count_correction) {
  // Histories for N = 2: "11" (m = 2), "10" and "01" (m = 1).
  const double h2 = 1.5;
  const double log_col_m2 = log_factorial(0) + log_factorial(1) - log_factorial(2);
  const double log_col_m1 = log_factorial(1) + log_factorial(0) - log_factorial(2);
  double total = 0.0;
  for (std::size_t a = 0; a <= max_per_history; ++a)
    for (std::size_t b = 0; b <= max_per_history; ++b)
      for (std::size_t c = 0; c <= max_per_history; ++c) {
        const double ad = static_cast<double>(a);
        const double bd = static_cast<double>(b);
        const double cd = static_cast<double>(c);
        double correction;
        if (row_count_correction) {
          // Row 0 selects the "11" and "10" columns, row 1 the "11" and "01" ones.
          correction = log_factorial(ad + bd) + log_factorial(ad + cd);
        } else {
          correction = log_factorial(ad) + log_factorial(bd) + log_factorial(cd);
        }
        const double lp = (ad + bd + cd) * std::log(alpha) - correction - alpha * h2 +
                          ad * log_col_m2 + (bd + cd) * log_col_m1;
        total += std::exp(lp);
      }
  return total;
}

double total_variation(std::span<const double> samples, const MixedLaw& law, std::size_t num_bins,
                       std::size_t grid_points) {
  if (num_bins < 1) throw_invalid("total_variation: need at least one bin");
  if (samples.empty()) throw_invalid("total_variation: no samples");
  const Grid1D grid(law.lo, law.hi, grid_points);
  const auto& x = grid.values();
  std::vector<double> cdf(x.size(), 0.0);
  double prev = law.density(x[0]);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double cur = law.density(x[i]);
    cdf[i] = cdf[i - 1] + 0.5 * grid.step() * (prev + cur);
    prev = cur;
  }
  const double continuous = cdf.back();
  const double mass = law.zero_mass + continuous;
  const double p_zero = law.zero_mass / mass;

  // Equal-probability bin edges under the continuous part.
  std::vector<double> edges;
  for (std::size_t b = 1; b < num_bins; ++b) {
    const double target = continuous * static_cast<double>(b) / static_cast<double>(num_bins);
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    const std::size_t i = static_cast<std::size_t>(it - cdf.begin());
    const double frac = i == 0 ? 0.0 : (target - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
    edges.push_back(i == 0 ? x[0] : x[i - 1] + frac * grid.step());
  }
  const double p_bin = (1.0 - p_zero) / static_cast<double>(num_bins);

  std::size_t zero_count = 0;
  std::vector<std::size_t> counts(num_bins, 0);
  for (double s : samples) {
    if (s == 0.0) {
      ++zero_count;
      continue;
    }
    const auto b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), s) - edges.begin());
    ++counts[b];
  }
  const double n = static_cast<double>(samples.size());
  double tv = std::abs(static_cast<double>(zero_count) / n - p_zero);
  for (std::size_t b = 0; b < num_bins; ++b) tv += std::abs(static_cast<double>(counts[b]) / n - p_bin);
  return 0.5 * tv;
}

}  // namespace deepfactor::oracle
