#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Core>

#include "deepfactor/model.hpp"

namespace deepfactor {

/// Prior scale of each hidden factor entry implied by a fixed upper layer:
/// sigma(k, t) = propagate_sigma(W_upper row k, Y_upper column t).
struct ParentContext {
  Eigen::MatrixXd sigma;  // K×T

  static ParentContext from_upper(const WeightLayer& upper_weights,
                                  const FactorMatrix& upper_factors,
                                  double sigma_floor);
};

/// Full sampler state for one layer's inference.
struct ChainState {
  FactorMatrix Y;        // K×T hidden factors
  WeightLayer weights;   // N×K
  std::size_t layer = 0; // 0 = first hidden layer
  std::optional<ParentContext> parent;
  double log_joint_cached = 0.0;

  std::size_t K() const { return Y.rows(); }
  std::size_t K_plus() const { return weights.mask.nonempty_columns(); }

  /// Prior standard deviation of Y(k, t).
  double prior_sigma(std::size_t k, std::size_t t, double sigma_top) const {
    if (parent) return parent->sigma(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
    return sigma_top;
  }

  void validate(std::size_t observed_dim, std::size_t num_instances) const;
};

/// Terms of log P(X, W, Y, K) for one layer.
struct LogJoint {
  double likelihood = 0.0;    // log P(X | W, Y)
  double factor_prior = 0.0;  // log P(Y | K)
  double weight_mask = 0.0;   // log P(Z | K), Beta-Bernoulli marginal
  double weight_slab = 0.0;   // log P(G_active | Z), Student-t marginal
  double k_prior = 0.0;       // log P(K), Poisson(α′ H_N)

  double weights() const { return weight_mask + weight_slab; }
  double total() const { return likelihood + factor_prior + weights() + k_prior; }
};

double log_likelihood(const FactorMatrix& X, const WeightLayer& weights,
                      const FactorMatrix& Y, double sigma_floor);
double log_factor_prior(const ChainState& state, double sigma_top);
double log_slab_marginal(const WeightLayer& weights, double ig_shape, double ig_scale);
/// log of the Student-t marginal of `m` slab values with sum of squares `sum_sq`.
double log_slab_column_marginal(std::size_t m, double sum_sq, double ig_shape, double ig_scale);
double log_k_prior(std::size_t K, double alpha_ibp, std::size_t observed_dim);

LogJoint log_joint(const FactorMatrix& X, const ChainState& state, const HyperParams& hyper);

}  // namespace deepfactor
