#include "deepfactor/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "deepfactor/error.hpp"
#include "deepfactor/ibp.hpp"
#include "deepfactor/numeric.hpp"

namespace deepfactor::infer {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

// Gaussian log-density of x under the floored scale |mu|, without the
// -log(sqrt(2π)) constant (it cancels in every difference taken here).
inline double lik_term(double x, double mu, double floor) {
  const double sd = std::max(std::abs(mu), floor);
  const double z = x / sd;
  return -std::log(sd) - 0.5 * z * z;
}

inline bool accept(double log_ratio, Rng& rng) {
  return std::log(sample_uniform(rng)) < log_ratio;
}

double log_add_proposal(std::size_t K, std::size_t K_plus, double bootstrap) {
  if (K == 0) return std::log(bootstrap);
  return std::log(static_cast<double>(K_plus) / static_cast<double>(K));
}

double log_expected_active(const LayerHyper& h, std::size_t observed_dim) {
  return std::log(h.alpha_ibp * ibp::harmonic_number(observed_dim));
}

}  // namespace

MoveStats& MoveStats::operator+=(const MoveStats& o) {
  for (auto [a, b] : {std::pair{&add, &o.add}, std::pair{&remove, &o.remove},
                      std::pair{&weight, &o.weight}, std::pair{&factor, &o.factor}}) {
    a->proposed += b->proposed;
    a->accepted += b->accepted;
  }
  return *this;
}

std::size_t InitStrategy::draw(Rng& rng) const {
  return kind == Kind::Fixed ? lo : sample_uniform_int(rng, lo, hi);
}

std::string InitStrategy::spec() const {
  if (kind == Kind::Fixed) return "fixed:" + std::to_string(lo);
  return "uniform:" + std::to_string(lo) + ":" + std::to_string(hi);
}

std::string InitStrategy::label() const {
  if (kind == Kind::Fixed) return "fixed" + std::to_string(lo);
  return "uniform" + std::to_string(lo) + "to" + std::to_string(hi);
}

void InferenceConfig::validate() const {
  if (!(gibbs_step_scale > 0.0) || !std::isfinite(gibbs_step_scale))
    throw_invalid("InferenceConfig: gibbs_step_scale must be positive");
  if (init.lo > init.hi) throw_invalid("InferenceConfig: init range is empty");
  if (!(add_bootstrap > 0.0)) throw_invalid("InferenceConfig: add_bootstrap must be positive");
  if (!(tolerance >= 0.0)) throw_invalid("InferenceConfig: tolerance must be non-negative");
}

// ---------------------------------------------------------------------------
// Closed-form pieces

double WeightPredictive::log_slab_density(double w) const {
  return std::lgamma(post_shape + 0.5) - std::lgamma(post_shape) -
         0.5 * std::log(2.0 * std::numbers::pi * post_scale) -
         (post_shape + 0.5) * std::log1p(w * w / (2.0 * post_scale));
}

double WeightPredictive::reference_scale() const { return std::sqrt(post_scale / post_shape); }

double slab_probability(std::size_t m_minus, std::size_t n, double alpha_over_k) {
  return (static_cast<double>(m_minus) + alpha_over_k) / (static_cast<double>(n) + alpha_over_k);
}

WeightPredictive weight_predictive(const WeightLayer& weights, std::size_t n, std::size_t k,
                                   const LayerHyper& priors) {
  const std::size_t N = weights.rows();
  const double c = priors.alpha_ibp / static_cast<double>(weights.cols());
  const std::size_t m_minus = weights.mask.column_count(k) - (weights.mask(n, k) ? 1 : 0);
  double ss = 0.0;
  for (std::size_t r = 0; r < N; ++r) {
    if (r == n) continue;
    const double g = weights.weight(r, k);
    ss += g * g;
  }
  const double nd = static_cast<double>(N);
  WeightPredictive out;
  out.log_spike = std::log((nd - static_cast<double>(m_minus)) / (nd + c));
  out.log_slab = std::log(slab_probability(m_minus, N, c));
  out.post_shape = priors.ig_shape + 0.5 * static_cast<double>(m_minus);
  out.post_scale = priors.ig_scale + 0.5 * ss;
  return out;
}

double log_weight_ratio_add(const BinaryMatrix& mask, double alpha) {
  const std::size_t N = mask.rows();
  const std::size_t K = mask.cols();
  const double c_new = alpha / static_cast<double>(K + 1);
  double r = ibp::log_mask_column_marginal(0, N, c_new);
  if (K == 0) return r;
  // α/K changes for every existing column as well.
  const double c_old = alpha / static_cast<double>(K);
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t m = mask.column_count(k);
    r += ibp::log_mask_column_marginal(m, N, c_new) - ibp::log_mask_column_marginal(m, N, c_old);
  }
  return r;
}

double log_weight_ratio_delete(const BinaryMatrix& mask, std::size_t k, double alpha) {
  const std::size_t N = mask.rows();
  const std::size_t K = mask.cols();
  if (k >= K) throw_invalid("log_weight_ratio_delete: factor index out of range");
  if (mask.column_count(k) != 0)
    throw_invalid("log_weight_ratio_delete: only factors with m_k = 0 can be deleted");
  const double c_old = alpha / static_cast<double>(K);
  double r = -ibp::log_mask_column_marginal(0, N, c_old);
  if (K == 1) return r;
  const double c_new = alpha / static_cast<double>(K - 1);
  for (std::size_t j = 0; j < K; ++j) {
    if (j == k) continue;
    const std::size_t m = mask.column_count(j);
    r += ibp::log_mask_column_marginal(m, N, c_new) - ibp::log_mask_column_marginal(m, N, c_old);
  }
  return r;
}

double log_ratio_add(const ChainState& state, const HyperParams& hyper, double add_bootstrap) {
  const LayerHyper h = hyper.layer(state.layer);
  const std::size_t K = state.K();
  const double k1 = std::log(static_cast<double>(K + 1));
  const double proposal = -k1 - log_add_proposal(K, state.K_plus(), add_bootstrap);
  const double target = log_weight_ratio_add(state.weights.mask, h.alpha_ibp) +
                        log_expected_active(h, state.weights.rows()) - k1;
  return proposal + target;
}

double log_ratio_delete(const ChainState& state, std::size_t k, const HyperParams& hyper,
                        double add_bootstrap) {
  const LayerHyper h = hyper.layer(state.layer);
  const std::size_t K = state.K();
  if (k >= K) throw_invalid("accept_prob_delete: factor index out of range");
  if (state.weights.mask.column_count(k) != 0)
    throw_invalid("accept_prob_delete: factor " + std::to_string(k) +
                  " still has linked edges (m_k > 0)");
  const double logk = std::log(static_cast<double>(K));
  // Reverse of an add from the (K−1)-factor state, whose K₊ is unchanged.
  const double proposal = log_add_proposal(K - 1, state.K_plus(), add_bootstrap) + logk;
  const double target = log_weight_ratio_delete(state.weights.mask, k, h.alpha_ibp) + logk -
                        log_expected_active(h, state.weights.rows());
  return proposal + target;
}

double accept_prob_add(const ChainState& state, const HyperParams& hyper, double add_bootstrap) {
  const double r = log_ratio_add(state, hyper, add_bootstrap);
  return r >= 0.0 ? 1.0 : std::exp(r);
}

double accept_prob_delete(const ChainState& state, std::size_t k, const HyperParams& hyper,
                          double add_bootstrap) {
  const double r = log_ratio_delete(state, k, hyper, add_bootstrap);
  return r >= 0.0 ? 1.0 : std::exp(r);
}

// ---------------------------------------------------------------------------
// State surgery

ChainState initial_state(const FactorMatrix& X, std::size_t K, const HyperParams& hyper,
                         std::size_t layer, std::optional<ParentContext> parent, Rng& rng) {
  const LayerHyper h = hyper.layer(layer);
  ChainState state;
  state.layer = layer;
  state.weights = sample_weight_layer(X.rows(), K, h.alpha_ibp, h.ig_shape, h.ig_scale, rng);
  state.weights.p_col.clear();
  state.weights.sigma2_col.clear();
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < K; ++c)
      if (!state.weights.mask(r, c)) state.weights.slab(idx(r), idx(c)) = 0.0;

  if (parent) {
    // Match the parent rows to K: extra factors get the top-layer prior.
    auto& s = parent->sigma;
    const Eigen::Index old_rows = s.rows();
    s.conservativeResize(idx(K), idx(X.cols()));
    for (Eigen::Index r = old_rows; r < s.rows(); ++r) s.row(r).setConstant(hyper.sigma_top);
  }
  state.parent = std::move(parent);

  state.Y = FactorMatrix(K, X.cols());
  for (std::size_t t = 0; t < X.cols(); ++t)
    for (std::size_t k = 0; k < K; ++k)
      state.Y(k, t) = sample_normal(rng, 0.0, state.prior_sigma(k, t, hyper.sigma_top));

  state.log_joint_cached = log_joint(X, state, hyper).total();
  return state;
}

void append_factor(ChainState& state, const std::vector<double>& factor_row, double sigma_top) {
  state.Y.append_row(factor_row);
  state.weights.append_zero_column();
  if (state.parent) {
    auto& s = state.parent->sigma;
    s.conservativeResize(s.rows() + 1, Eigen::NoChange);
    s.row(s.rows() - 1).setConstant(sigma_top);
  }
}

void remove_factor(ChainState& state, std::size_t k) {
  state.Y.remove_row(k);
  state.weights.remove_column(k);
  if (state.parent) {
    auto& s = state.parent->sigma;
    const Eigen::Index tail = s.rows() - idx(k) - 1;
    if (tail > 0) s.middleRows(idx(k), tail) = s.bottomRows(tail).eval();
    s.conservativeResize(s.rows() - 1, Eigen::NoChange);
  }
}

std::size_t prune_empty_factors(ChainState& state) {
  std::size_t removed = 0;
  for (std::size_t k = state.K(); k-- > 0;) {
    if (state.weights.mask.column_count(k) == 0) {
      remove_factor(state, k);
      ++removed;
    }
  }
  return removed;
}

// ---------------------------------------------------------------------------
// LayerSampler

LayerSampler::LayerSampler(const FactorMatrix& X, ChainState& state, const HyperParams& hyper,
                           const InferenceConfig& config)
    : X_(X), state_(state), hyper_(hyper), config_(config), priors_(hyper.layer(state.layer)) {
  state_.validate(X.rows(), X.cols());
  activation_ = state_.weights.effective() * state_.Y.values();
  state_.log_joint_cached = log_joint(X_, state_, hyper_).total();
}

double LayerSampler::row_log_lik_delta(std::size_t n, std::size_t k, double delta) const {
  const double floor = hyper_.sigma_floor;
  const auto& x = X_.values();
  const auto& y = state_.Y.values();
  double d = 0.0;
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    const double a = activation_(idx(n), t);
    const double xv = x(idx(n), t);
    d += lik_term(xv, a + delta * y(idx(k), t), floor) - lik_term(xv, a, floor);
  }
  return d;
}

double LayerSampler::column_log_lik_delta(std::size_t k, std::size_t t, double delta) const {
  const double floor = hyper_.sigma_floor;
  const auto& x = X_.values();
  const auto& w = state_.weights;
  double d = 0.0;
  for (std::size_t n = 0; n < w.rows(); ++n) {
    if (!w.mask(n, k)) continue;
    const double a = activation_(idx(n), idx(t));
    const double xv = x(idx(n), idx(t));
    d += lik_term(xv, a + w.slab(idx(n), idx(k)) * delta, floor) - lik_term(xv, a, floor);
  }
  return d;
}

void LayerSampler::apply_weight(std::size_t n, std::size_t k, bool on, double value) {
  auto& w = state_.weights;
  const double before = w.weight(n, k);
  w.mask.set(n, k, on);
  w.slab(idx(n), idx(k)) = on ? value : 0.0;
  const double change = (on ? value : 0.0) - before;
  activation_.row(idx(n)) += change * state_.Y.values().row(idx(k));
}

void LayerSampler::update_weight(std::size_t n, std::size_t k, Rng& rng) {
  const WeightPredictive pred = weight_predictive(state_.weights, n, k, priors_);
  bool on = state_.weights.mask(n, k);
  double w = on ? state_.weights.slab(idx(n), idx(k)) : 0.0;
  double& lj = state_.log_joint_cached;

  // Spike <-> slab jump; the slab value is proposed from its prior predictive
  // so only the likelihood and the inclusion odds enter the ratio.
  ++stats_.weight.proposed;
  if (!on) {
    const double s2 = sample_inverse_gamma(rng, pred.post_shape, pred.post_scale);
    const double proposal = sample_normal(rng, 0.0, std::sqrt(s2));
    const double dl = row_log_lik_delta(n, k, proposal);
    if (accept(dl + pred.log_slab - pred.log_spike, rng)) {
      apply_weight(n, k, true, proposal);
      lj += dl + pred.log_slab + pred.log_slab_density(proposal) - pred.log_spike;
      ++stats_.weight.accepted;
      on = true;
      w = proposal;
    }
  } else {
    const double dl = row_log_lik_delta(n, k, -w);
    if (accept(dl + pred.log_spike - pred.log_slab, rng)) {
      apply_weight(n, k, false, 0.0);
      lj += dl + pred.log_spike - pred.log_slab - pred.log_slab_density(w);
      ++stats_.weight.accepted;
      on = false;
    }
  }

  if (!on) return;
  // Independence draw from the predictive: reaches every mode of the
  // conditional, which the ε floor can split with deep barriers.
  ++stats_.weight.proposed;
  {
    const double s2 = sample_inverse_gamma(rng, pred.post_shape, pred.post_scale);
    const double fresh = sample_normal(rng, 0.0, std::sqrt(s2));
    const double dl = row_log_lik_delta(n, k, fresh - w);
    if (fresh != 0.0 && accept(dl, rng)) {
      apply_weight(n, k, true, fresh);
      lj += dl + pred.log_slab_density(fresh) - pred.log_slab_density(w);
      ++stats_.weight.accepted;
      w = fresh;
    }
  }

  ++stats_.weight.proposed;
  const double proposal =
      w + config_.gibbs_step_scale * pred.reference_scale() * sample_normal(rng, 0.0, 1.0);
  if (proposal == 0.0) return;
  const double dl = row_log_lik_delta(n, k, proposal - w);
  const double log_r = dl + pred.log_slab_density(proposal) - pred.log_slab_density(w);
  if (accept(log_r, rng)) {
    apply_weight(n, k, true, proposal);
    lj += log_r;
    ++stats_.weight.accepted;
  }
}

void LayerSampler::apply_factor(std::size_t k, std::size_t t, double value) {
  const double delta = value - state_.Y(k, t);
  state_.Y(k, t) = value;
  const auto& w = state_.weights;
  for (std::size_t n = 0; n < w.rows(); ++n)
    if (w.mask(n, k)) activation_(idx(n), idx(t)) += w.slab(idx(n), idx(k)) * delta;
}

void LayerSampler::update_factor(std::size_t k, std::size_t t, Rng& rng) {
  const double sigma = state_.prior_sigma(k, t, hyper_.sigma_top);
  auto log_prior = [sigma](double v) { return -0.5 * v * v / (sigma * sigma); };

  // Independence draw from the prior, then a random walk.
  ++stats_.factor.proposed;
  {
    const double y = state_.Y(k, t);
    const double fresh = sample_normal(rng, 0.0, sigma);
    const double dl = column_log_lik_delta(k, t, fresh - y);
    if (accept(dl, rng)) {
      apply_factor(k, t, fresh);
      state_.log_joint_cached += dl + log_prior(fresh) - log_prior(y);
      ++stats_.factor.accepted;
    }
  }

  ++stats_.factor.proposed;
  const double y = state_.Y(k, t);
  const double proposal = y + config_.gibbs_step_scale * sigma * sample_normal(rng, 0.0, 1.0);
  const double dl = column_log_lik_delta(k, t, proposal - y);
  const double dp = log_prior(proposal) - log_prior(y);
  if (accept(dl + dp, rng)) {
    apply_factor(k, t, proposal);
    state_.log_joint_cached += dl + dp;
    ++stats_.factor.accepted;
  }
}

bool LayerSampler::propose_add(Rng& rng) {
  ++stats_.add.proposed;
  const std::size_t K = state_.K();
  const double log_r = log_ratio_add(state_, hyper_, config_.add_bootstrap);
  // The new factor's values come from its prior; they cancel in log_r.
  std::vector<double> row(X_.cols());
  double log_row = 0.0;
  for (auto& v : row) {
    v = sample_normal(rng, 0.0, hyper_.sigma_top);
    log_row += log_normal_pdf(v, hyper_.sigma_top);
  }
  if (!accept(log_r, rng)) return false;
  const double dw = log_weight_ratio_add(state_.weights.mask, priors_.alpha_ibp);
  const double dk = log_expected_active(priors_, X_.rows()) - std::log(static_cast<double>(K + 1));
  append_factor(state_, row, hyper_.sigma_top);
  state_.log_joint_cached += log_row + dw + dk;
  ++stats_.add.accepted;
  return true;
}

bool LayerSampler::propose_delete(std::size_t k, Rng& rng) {
  ++stats_.remove.proposed;
  const std::size_t K = state_.K();
  const double log_r = log_ratio_delete(state_, k, hyper_, config_.add_bootstrap);
  if (!accept(log_r, rng)) return false;
  double log_row = 0.0;
  for (std::size_t t = 0; t < state_.Y.cols(); ++t)
    log_row += log_normal_pdf(state_.Y(k, t), state_.prior_sigma(k, t, hyper_.sigma_top));
  const double dw = log_weight_ratio_delete(state_.weights.mask, k, priors_.alpha_ibp);
  const double dk = std::log(static_cast<double>(K)) - log_expected_active(priors_, X_.rows());
  remove_factor(state_, k);
  state_.log_joint_cached += -log_row + dw + dk;
  ++stats_.remove.accepted;
  return true;
}

void LayerSampler::dimension_move(std::size_t row, Rng& rng) {
  const std::size_t K = state_.K();
  if (K == 0) {
    propose_add(rng);
    return;
  }
  const std::size_t k = cursor_++ % K;
  const std::size_t m = state_.weights.mask.column_count(k);
  const std::size_t m_minus = m - (state_.weights.mask(row, k) ? 1 : 0);
  if (m_minus > 0) {
    propose_add(rng);
  } else if (m == 0) {
    propose_delete(k, rng);
  }
}

void LayerSampler::sweep_weight_row(std::size_t n, Rng& rng) {
  for (std::size_t k = 0; k < state_.K(); ++k) update_weight(n, k, rng);
}

void LayerSampler::sweep_weights(Rng& rng) {
  for (std::size_t n = 0; n < X_.rows(); ++n) sweep_weight_row(n, rng);
}

void LayerSampler::sweep_factors(Rng& rng) {
  for (std::size_t t = 0; t < X_.cols(); ++t)
    for (std::size_t k = 0; k < state_.K(); ++k) update_factor(k, t, rng);
}

void LayerSampler::iteration(Rng& rng) {
  for (std::size_t i = 0; i < X_.rows(); ++i) {
    dimension_move(i, rng);
    sweep_weight_row(i, rng);
    sweep_factors(rng);
  }
}

double LayerSampler::resync() {
  activation_ = state_.weights.effective() * state_.Y.values();
  const double exact = log_joint(X_, state_, hyper_).total();
  const double drift =
      std::abs(state_.log_joint_cached - exact) / std::max(1.0, std::abs(exact));
  state_.log_joint_cached = exact;
  return drift;
}

// ---------------------------------------------------------------------------
// Drivers

LayerRun continue_mh_layer(const FactorMatrix& X, ChainState state, const InferenceConfig& cfg,
                           const HyperParams& hyper, Rng& rng) {
  cfg.validate();
  LayerRun run;
  run.state = std::move(state);
  LayerSampler sampler(X, run.state, hyper, cfg);
  run.trace.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const MoveStats before = sampler.stats();
    sampler.iteration(rng);
    run.max_log_joint_drift = std::max(run.max_log_joint_drift, sampler.resync());
    TraceRow row;
    row.iteration = it + 1;
    row.K = run.state.K();
    row.K_plus = run.state.K_plus();
    row.log_joint = run.state.log_joint_cached;
    row.accepted_adds = sampler.stats().add.accepted - before.add.accepted;
    row.accepted_deletes = sampler.stats().remove.accepted - before.remove.accepted;
    run.trace.push_back(row);
  }
  run.stats = sampler.stats();
  return run;
}

LayerRun run_mh_layer(const FactorMatrix& X, const InferenceConfig& cfg, const HyperParams& hyper,
                      std::optional<ParentContext> parent, std::size_t layer) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t K0 = cfg.init.draw(rng);
  ChainState state = initial_state(X, K0, hyper, layer, std::move(parent), rng);
  return continue_mh_layer(X, std::move(state), cfg, hyper, rng);
}

LayerwiseResult run_layerwise(const FactorMatrix& X, std::size_t depth, const InferenceConfig& cfg,
                              const HyperParams& hyper) {
  if (depth < 1) throw_invalid("run_layerwise: depth must be at least 1");
  cfg.validate();
  LayerwiseResult result;
  if (depth == 1) {
    result.layers.push_back(run_mh_layer(X, cfg, hyper));
    result.total_log_joint.push_back(result.layers.back().state.log_joint_cached);
    return result;
  }

  std::vector<std::optional<LayerRun>> runs(depth);
  const std::size_t outer_loops = std::max<std::size_t>(cfg.layerwise_outer_loops, 1);
  for (std::size_t outer = 0; outer < outer_loops; ++outer) {
    for (std::size_t l = 0; l < depth; ++l) {
      const FactorMatrix& data = l == 0 ? X : runs[l - 1]->state.Y;
      if (data.rows() == 0) {
        // Nothing left to explain above an empty layer.
        for (std::size_t u = l; u < depth; ++u) runs[u].reset();
        break;
      }
      std::optional<ParentContext> parent;
      if (l + 1 < depth && runs[l + 1] && runs[l] &&
          runs[l]->state.K() == runs[l + 1]->state.weights.rows()) {
        parent = ParentContext::from_upper(runs[l + 1]->state.weights, runs[l + 1]->state.Y,
                                           hyper.sigma_floor);
      }
      Rng rng(mix_seed({cfg.seed, l, outer}));
      LayerRun next;
      if (runs[l] && runs[l]->state.weights.rows() == data.rows()) {
        ChainState warm = runs[l]->state;
        warm.parent = std::move(parent);
        next = continue_mh_layer(data, std::move(warm), cfg, hyper, rng);
        // Keep the whole history of this layer in its trace.
        const std::size_t offset = runs[l]->trace.size();
        for (auto& row : next.trace) row.iteration += offset;
        next.trace.insert(next.trace.begin(), runs[l]->trace.begin(), runs[l]->trace.end());
        next.stats += runs[l]->stats;
        next.max_log_joint_drift = std::max(next.max_log_joint_drift, runs[l]->max_log_joint_drift);
      } else {
        const std::size_t K0 = cfg.init.draw(rng);
        ChainState fresh = initial_state(data, K0, hyper, l, std::move(parent), rng);
        next = continue_mh_layer(data, std::move(fresh), cfg, hyper, rng);
      }
      runs[l] = std::move(next);
    }

    double total = 0.0;
    std::size_t top = 0;
    for (std::size_t l = 0; l < depth; ++l) {
      if (!runs[l]) break;
      const FactorMatrix& data = l == 0 ? X : runs[l - 1]->state.Y;
      const LogJoint lj = log_joint(data, runs[l]->state, hyper);
      total += lj.likelihood + lj.weights() + lj.k_prior;
      top = l;
    }
    {
      const FactorMatrix& data = top == 0 ? X : runs[top - 1]->state.Y;
      total += log_joint(data, runs[top]->state, hyper).factor_prior;
    }
    const bool converged = !result.total_log_joint.empty() &&
                           total - result.total_log_joint.back() < cfg.tolerance;
    result.total_log_joint.push_back(total);
    if (converged) break;
  }
  for (auto& r : runs)
    if (r) result.layers.push_back(std::move(*r));
  return result;
}

}  // namespace deepfactor::infer
