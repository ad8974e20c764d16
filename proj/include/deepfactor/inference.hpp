#pragma once

// Metropolis-Hastings / Gibbs inference of one layer's hidden factors, and
// the layer-wise recursion over several layers.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "deepfactor/model.hpp"
#include "deepfactor/random.hpp"
#include "deepfactor/state.hpp"

namespace deepfactor::infer {

struct MoveCounter {
  std::size_t proposed = 0;
  std::size_t accepted = 0;
};

struct MoveStats {
  MoveCounter add;
  MoveCounter remove;
  MoveCounter weight;
  MoveCounter factor;

  MoveStats& operator+=(const MoveStats& other);
};

/// How the initial number of factors is chosen.
struct InitStrategy {
  enum class Kind { Fixed, Uniform };
  Kind kind = Kind::Fixed;
  std::size_t lo = 2;
  std::size_t hi = 2;

  static InitStrategy fixed(std::size_t k) { return {Kind::Fixed, k, k}; }
  static InitStrategy uniform(std::size_t lo, std::size_t hi) { return {Kind::Uniform, lo, hi}; }

  std::size_t draw(Rng& rng) const;
  /// "fixed:2" or "uniform:3:10"; the form accepted by the config parser.
  std::string spec() const;
  /// File-name safe label such as "fixed2" or "uniform3to10".
  std::string label() const;

  friend bool operator==(const InitStrategy&, const InitStrategy&) = default;
};

struct InferenceConfig {
  std::size_t iterations = 200;
  InitStrategy init = InitStrategy::fixed(2);
  std::uint64_t seed = 0;
  /// Random-walk proposal std, relative to the reference scale of the entry
  /// being updated (slab predictive scale for weights, prior σ for factors).
  double gibbs_step_scale = 0.5;
  std::size_t layerwise_outer_loops = 5;
  double tolerance = 1e-3;
  /// Replaces K₊/K in the add-move proposal ratio when K = 0.
  double add_bootstrap = 1.0;

  void validate() const;
};

struct TraceRow {
  std::size_t iteration = 0;
  std::size_t K = 0;
  std::size_t K_plus = 0;
  double log_joint = 0.0;
  std::size_t accepted_adds = 0;
  std::size_t accepted_deletes = 0;
};

struct LayerRun {
  ChainState state;
  std::vector<TraceRow> trace;
  MoveStats stats;
  /// Largest relative gap between the incrementally tracked log-joint and a
  /// full recomputation, checked after every iteration.
  double max_log_joint_drift = 0.0;
};

/// Closed-form prior predictive of W(n, k) given the rest of column k, with
/// p_k and σ²_k integrated out.
struct WeightPredictive {
  double log_spike = 0.0;  // log P(W = 0 | rest)
  double log_slab = 0.0;   // log P(W ≠ 0 | rest)
  double post_shape = 0.0; // inverse-gamma posterior of σ²_k
  double post_scale = 0.0;

  /// Student-t log-density of the slab value.
  double log_slab_density(double w) const;
  /// Scale of that Student-t, sqrt(post_scale / post_shape).
  double reference_scale() const;
};

/// P(W ≠ 0 | m_minus of the other n − 1 entries are nonzero).
double slab_probability(std::size_t m_minus, std::size_t n, double alpha_over_k);

WeightPredictive weight_predictive(const WeightLayer& weights, std::size_t n, std::size_t k,
                                   const LayerHyper& priors);

/// log P(W | K+1) − log P(W | K) for appending an all-zero column
/// (mask marginal only; the slab term of an empty column is zero).
double log_weight_ratio_add(const BinaryMatrix& mask, double alpha);
/// Same for removing empty column `k`.
double log_weight_ratio_delete(const BinaryMatrix& mask, std::size_t k, double alpha);

/// Interior log-ratio of the add-factor move in its cancelled form:
/// log[(1/(K+1)) P(W|K+1) P(K+1) / ((K₊/K) P(W|K) P(K))].
double log_ratio_add(const ChainState& state, const HyperParams& hyper, double add_bootstrap = 1.0);

/// Interior log-ratio of deleting empty factor `k`; the exact reciprocal of
/// log_ratio_add taken from the smaller state. Throws if m_k > 0.
double log_ratio_delete(const ChainState& state, std::size_t k, const HyperParams& hyper,
                        double add_bootstrap = 1.0);

double accept_prob_add(const ChainState& state, const HyperParams& hyper, double add_bootstrap = 1.0);
double accept_prob_delete(const ChainState& state, std::size_t k, const HyperParams& hyper,
                          double add_bootstrap = 1.0);

/// Initial state with K factors drawn from the prior.
ChainState initial_state(const FactorMatrix& X, std::size_t K, const HyperParams& hyper,
                         std::size_t layer, std::optional<ParentContext> parent, Rng& rng);

/// Appends a factor with an all-zero mask column and the given factor row.
/// New factors have no parent row; their prior scale is sigma_top.
void append_factor(ChainState& state, const std::vector<double>& factor_row, double sigma_top);
void remove_factor(ChainState& state, std::size_t k);
/// Removes every factor with m_k = 0; returns how many were removed.
std::size_t prune_empty_factors(ChainState& state);

/// Transition kernels over one layer's state. Holds references to the data
/// and the state; keeps the activation cache W·Y and an incrementally
/// updated log-joint in state.log_joint_cached.
class LayerSampler {
 public:
  LayerSampler(const FactorMatrix& X, ChainState& state, const HyperParams& hyper,
               const InferenceConfig& config);

  /// Add/delete decision for data row `row` (examined column chosen cyclically).
  void dimension_move(std::size_t row, Rng& rng);
  bool propose_add(Rng& rng);
  bool propose_delete(std::size_t k, Rng& rng);

  void update_weight(std::size_t n, std::size_t k, Rng& rng);
  void update_factor(std::size_t k, std::size_t t, Rng& rng);

  void sweep_weight_row(std::size_t n, Rng& rng);
  void sweep_weights(Rng& rng);
  void sweep_factors(Rng& rng);

  /// One pass of the outer loop over all data rows: dimension move, weight
  /// row, then every factor entry.
  void iteration(Rng& rng);

  /// Recomputes the activation cache and the exact log-joint; returns the
  /// drift of the incremental value before the reset, relative to
  /// max(1, |log-joint|).
  double resync();

  const MoveStats& stats() const { return stats_; }
  const ChainState& state() const { return state_; }
  const LayerHyper& priors() const { return priors_; }

 private:
  double row_log_lik_delta(std::size_t n, std::size_t k, double delta) const;
  double column_log_lik_delta(std::size_t k, std::size_t t, double delta) const;
  void apply_weight(std::size_t n, std::size_t k, bool on, double value);
  void apply_factor(std::size_t k, std::size_t t, double value);

  const FactorMatrix& X_;
  ChainState& state_;
  const HyperParams& hyper_;
  const InferenceConfig& config_;
  LayerHyper priors_;
  Eigen::MatrixXd activation_;  // N×T, W·Y
  std::size_t cursor_ = 0;
  MoveStats stats_;
};

/// Algorithm driver for one layer; the chain starts from the prior with
/// cfg.init factors.
LayerRun run_mh_layer(const FactorMatrix& X, const InferenceConfig& cfg, const HyperParams& hyper,
                      std::optional<ParentContext> parent = std::nullopt, std::size_t layer = 0);

/// Continues an existing chain for cfg.iterations iterations.
LayerRun continue_mh_layer(const FactorMatrix& X, ChainState state, const InferenceConfig& cfg,
                           const HyperParams& hyper, Rng& rng);

struct LayerwiseResult {
  std::vector<LayerRun> layers;           // bottom (layer 1) first
  std::vector<double> total_log_joint;    // one per outer loop
};

/// Layer-at-a-time inference of `depth` hidden layers.
LayerwiseResult run_layerwise(const FactorMatrix& X, std::size_t depth, const InferenceConfig& cfg,
                              const HyperParams& hyper);

}  // namespace deepfactor::infer
