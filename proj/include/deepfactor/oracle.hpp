#pragma once

// Brute-force and quadrature references. Deliberately slow and independent
// of the closed forms used by the sampler.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "deepfactor/binary_matrix.hpp"
#include "deepfactor/ibp.hpp"
#include "deepfactor/random.hpp"

namespace deepfactor::oracle {

/// Uniform grid of `num_points` nodes on [lo, hi].
class Grid1D {
 public:
  Grid1D(double lo, double hi, std::size_t num_points);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::size_t num_points() const { return values_.size(); }
  double step() const { return (hi_ - lo_) / static_cast<double>(values_.size() - 1); }
  const std::vector<double>& values() const { return values_; }
  /// Trapezoid weights matching values().
  std::vector<double> trapezoid_weights() const;

 private:
  double lo_;
  double hi_;
  std::vector<double> values_;
};

double grid_integrate(const std::function<double(double)>& f, const Grid1D& grid);

/// All 2^{N·K} binary matrices, N·K ≤ 12.
std::vector<BinaryMatrix> enumerate_masks(std::size_t n, std::size_t k);

struct WeightPredictive {
  double spike_mass = 0.0;    // P(W = 0 | rest)
  double slab_density = 0.0;  // density of W at w ≠ 0
};

struct QuadratureOptions {
  std::size_t p_points = 2000;
  std::size_t sigma2_points = 2000;
  std::optional<double> fixed_p;  // degenerate point prior on p
};

/// Prior predictive of one weight entry given the other entries of its
/// column, by 2-D trapezoid integration over (p, σ²) of the spike-and-slab
/// law against the posterior of (p, σ²). `other_slab_values` are the nonzero
/// entries among the n − 1 others (so m_minus = other_slab_values.size()).
WeightPredictive marginal_weight_quadrature(double w, std::span<const double> other_slab_values,
                                            std::size_t n, double alpha_over_k,
                                            double ig_shape, double ig_scale,
                                            const QuadratureOptions& options = {});

struct ClassFrequency {
  std::size_t count = 0;
  double frequency = 0.0;
  double standard_error = 0.0;
};

using MaskSampler = std::function<BinaryMatrix(std::size_t n, double alpha, Rng& rng)>;

/// Empirical law of left-ordered classes produced by `sampler`. N ≤ 3.
std::map<ibp::LofClass, ClassFrequency> mc_lof_histogram(const MaskSampler& sampler, std::size_t n,
                                                         double alpha, std::size_t num_draws,
                                                         Rng& rng);

/// Σ_h log(K_h!) over groups of identical column histories (standard
/// normalizer correction).
double log_lof_correction_equal_history(const BinaryMatrix& Z);

/// Σ_n log(K₁ⁿ!) with K₁ⁿ the number of factors selected by row n (the
/// literal row-count reading). Kept only to show it does not normalize.
double log_lof_correction_row_counts(const BinaryMatrix& Z);

/// Enumerates every lof class of N = 2 with at most `max_per_history`
/// columns per history and sums exp(log law). `row_count_correction` swaps in
/// the row-count reading of the multiplicity term.
double ibp_class_mass_n2(double alpha, std::size_t max_per_history, bool row_count_correction);

/// Total variation between samples on {0} ∪ ℝ and a reference law given by a
/// point mass at zero plus an (unnormalized-together) density. Bins are
/// equal-probability under the reference on [lo, hi].
struct MixedLaw {
  double zero_mass = 0.0;                 // unnormalized
  std::function<double(double)> density;  // unnormalized, excludes zero
  double lo = 0.0;
  double hi = 0.0;
};

double total_variation(std::span<const double> samples, const MixedLaw& law,
                       std::size_t num_bins, std::size_t grid_points = 200001);

}  // namespace deepfactor::oracle
