#pragma once

// Domain types and forward generation for the hierarchical spike-and-slab
// factor model.
//
// Observation model (as written, mean-zero): every entry of a child layer is
// drawn from N(0, s²) where s = max(|Σ_j W_ij Y_jt|, sigma_floor). Parent
// factors influence the *scale* of their children, not the mean. This is not
// conventional factor analysis.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "deepfactor/binary_matrix.hpp"
#include "deepfactor/random.hpp"

namespace deepfactor {

/// Priors of one weight layer.
struct LayerHyper {
  double alpha_ibp = 3.0;  // Beta(α′/K, 1) concentration
  double ig_shape = 2.0;   // inverse-gamma shape on slab variances
  double ig_scale = 1.0;   // inverse-gamma scale
};

/// Scalar priors and truncation controls for a model instance. Per-layer
/// vectors are indexed from the first hidden layer (closest to the data)
/// upwards.
struct HyperParams {
  std::vector<double> alpha_ibp_per_layer{3.0};
  std::vector<double> ig_shape_per_layer{2.0};
  std::vector<double> ig_scale_per_layer{1.0};
  double sigma_top = 1.0;
  double sigma_floor = 1e-6;
  std::size_t num_layers = 1;
  std::vector<std::size_t> layer_widths{3};

  /// Throws Error(InvalidArgument) on any violated invariant.
  void validate() const;

  /// Priors of hidden layer `index` (0 = first hidden layer). Indices past
  /// the configured depth reuse the topmost layer's priors.
  LayerHyper layer(std::size_t index) const;

  static HyperParams single_layer(std::size_t width, LayerHyper priors = {});
};

/// A matrix of factor values: K×T hidden factors or N×T observations.
/// Entries are always finite.
class FactorMatrix {
 public:
  FactorMatrix() = default;
  FactorMatrix(std::size_t rows, std::size_t cols);
  explicit FactorMatrix(Eigen::MatrixXd values);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }

  double operator()(std::size_t r, std::size_t c) const {
    return values_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  double& operator()(std::size_t r, std::size_t c) {
    return values_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }

  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd& values() { return values_; }

  std::vector<double> column(std::size_t c) const;
  void append_row(const std::vector<double>& row);
  void remove_row(std::size_t r);

  friend bool operator==(const FactorMatrix& a, const FactorMatrix& b) {
    return a.values_ == b.values_;
  }

 private:
  Eigen::MatrixXd values_;
};

/// One layer's binary mask Z, slab G and effective weights W = Z ⊙ G.
/// Rows index the child layer, columns the parent layer.
struct WeightLayer {
  BinaryMatrix mask;
  Eigen::MatrixXd slab;
  std::vector<double> p_col;       // empty once marginalized out
  std::vector<double> sigma2_col;  // empty once marginalized out

  WeightLayer() = default;
  WeightLayer(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return mask.rows(); }
  std::size_t cols() const { return mask.cols(); }

  double weight(std::size_t r, std::size_t c) const {
    return mask(r, c) ? slab(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) : 0.0;
  }
  Eigen::MatrixXd effective() const;
  std::vector<double> effective_row(std::size_t r) const;

  void append_zero_column();
  void remove_column(std::size_t c);
  void validate() const;
};

/// Finite truncation of the generative model; layers ordered top to bottom,
/// the last one connects the first hidden layer to the N observed dimensions.
struct GenerativeModel {
  HyperParams hyper;
  std::vector<WeightLayer> layers;

  std::size_t observed_dim() const { return layers.empty() ? 0 : layers.back().rows(); }
  void validate() const;
};

enum class SpikeSlabPart { Continuous, PointMass };

/// Either the log-density of the continuous part at w ≠ 0, or the point mass
/// (1 − p) at w = 0. The two are never mixed.
struct SpikeSlabValue {
  SpikeSlabPart part;
  double value;
};

SpikeSlabValue spike_slab_logpdf(double w, double p, double sigma2);

/// max(|Σ_l w_l y_l|, sigma_floor).
double propagate_sigma(std::span<const double> weight_row,
                       std::span<const double> parent_factors,
                       double sigma_floor);

std::vector<double> sample_factor_column(const WeightLayer& parent_weights,
                                         std::span<const double> parent_factors,
                                         double sigma_floor, Rng& rng);

/// Per column r: p_r ~ Beta(α′/K, 1), Z(·,r) ~ Bernoulli(p_r),
/// σ²_r ~ InverseGamma(ig_shape, ig_scale), G(·,r) ~ N(0, σ²_r).
WeightLayer sample_weight_layer(std::size_t n_rows, std::size_t n_cols,
                                double alpha_ibp, double ig_shape,
                                double ig_scale, Rng& rng);

/// Draws every weight layer for `observed_dim` observed dimensions.
GenerativeModel sample_model(const HyperParams& hyper, std::size_t observed_dim, Rng& rng);

/// Returns one matrix per layer, top to bottom; the last one is X.
std::vector<FactorMatrix> generate_dataset(const GenerativeModel& model,
                                           std::size_t num_instances, Rng& rng);

}  // namespace deepfactor
