#include "deepfactor/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deepfactor/error.hpp"
#include "deepfactor/ibp.hpp"
#include "deepfactor/numeric.hpp"
#include "deepfactor/state.hpp"

namespace deepfactor {

namespace {

bool all_positive(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x) && x > 0.0; });
}

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace

// ---------------------------------------------------------------------------
// HyperParams

void HyperParams::validate() const {
  if (num_layers < 1) throw_invalid("HyperParams: num_layers must be at least 1");
  if (layer_widths.size() != num_layers)
    throw_invalid("HyperParams: layer_widths must have num_layers entries");
  for (const auto* v : {&alpha_ibp_per_layer, &ig_shape_per_layer, &ig_scale_per_layer}) {
    if (v->size() != num_layers)
      throw_invalid("HyperParams: per-layer priors must have num_layers entries");
    if (!all_positive(*v)) throw_invalid("HyperParams: priors must be strictly positive");
  }
  if (!(std::isfinite(sigma_top) && sigma_top > 0.0))
    throw_invalid("HyperParams: sigma_top must be positive");
  if (!(std::isfinite(sigma_floor) && sigma_floor > 0.0))
    throw_invalid("HyperParams: sigma_floor must be positive");
  if (sigma_floor > sigma_top) throw_invalid("HyperParams: sigma_floor must not exceed sigma_top");
}

LayerHyper HyperParams::layer(std::size_t index) const {
  auto pick = [index](const std::vector<double>& v) {
    if (v.empty()) throw_invalid("HyperParams: empty per-layer prior");
    return v[std::min(index, v.size() - 1)];
  };
  return {pick(alpha_ibp_per_layer), pick(ig_shape_per_layer), pick(ig_scale_per_layer)};
}

HyperParams HyperParams::single_layer(std::size_t width, LayerHyper priors) {
  HyperParams h;
  h.alpha_ibp_per_layer = {priors.alpha_ibp};
  h.ig_shape_per_layer = {priors.ig_shape};
  h.ig_scale_per_layer = {priors.ig_scale};
  h.num_layers = 1;
  h.layer_widths = {width};
  return h;
}

// ---------------------------------------------------------------------------
// FactorMatrix

FactorMatrix::FactorMatrix(std::size_t rows, std::size_t cols)
    : values_(Eigen::MatrixXd::Zero(idx(rows), idx(cols))) {}

FactorMatrix::FactorMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (!values_.allFinite()) throw_invalid("FactorMatrix: entries must be finite");
}

std::vector<double> FactorMatrix::column(std::size_t c) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = (*this)(r, c);
  return out;
}

void FactorMatrix::append_row(const std::vector<double>& row) {
  if (row.size() != cols()) throw_invalid("FactorMatrix::append_row: length mismatch");
  values_.conservativeResize(values_.rows() + 1, Eigen::NoChange);
  for (std::size_t c = 0; c < row.size(); ++c) values_(values_.rows() - 1, idx(c)) = row[c];
}

void FactorMatrix::remove_row(std::size_t r) {
  if (r >= rows()) throw_invalid("FactorMatrix::remove_row: index out of range");
  const Eigen::Index n = values_.rows();
  const Eigen::Index tail = n - idx(r) - 1;
  if (tail > 0) values_.middleRows(idx(r), tail) = values_.bottomRows(tail).eval();
  values_.conservativeResize(n - 1, Eigen::NoChange);
}

// ---------------------------------------------------------------------------
// WeightLayer

WeightLayer::WeightLayer(std::size_t rows, std::size_t cols)
    : mask(rows, cols), slab(Eigen::MatrixXd::Zero(idx(rows), idx(cols))) {}

Eigen::MatrixXd WeightLayer::effective() const {
  Eigen::MatrixXd w(idx(rows()), idx(cols()));
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t c = 0; c < cols(); ++c) w(idx(r), idx(c)) = weight(r, c);
  return w;
}

std::vector<double> WeightLayer::effective_row(std::size_t r) const {
  std::vector<double> out(cols());
  for (std::size_t c = 0; c < cols(); ++c) out[c] = weight(r, c);
  return out;
}

void WeightLayer::append_zero_column() {
  mask.append_zero_column();
  slab.conservativeResize(Eigen::NoChange, slab.cols() + 1);
  slab.col(slab.cols() - 1).setZero();
  p_col.clear();
  sigma2_col.clear();
}

void WeightLayer::remove_column(std::size_t c) {
  mask.remove_column(c);
  const Eigen::Index k = slab.cols();
  const Eigen::Index tail = k - idx(c) - 1;
  if (tail > 0) slab.middleCols(idx(c), tail) = slab.rightCols(tail).eval();
  slab.conservativeResize(Eigen::NoChange, k - 1);
  if (c < p_col.size()) p_col.erase(p_col.begin() + static_cast<std::ptrdiff_t>(c));
  if (c < sigma2_col.size()) sigma2_col.erase(sigma2_col.begin() + static_cast<std::ptrdiff_t>(c));
}

void WeightLayer::validate() const {
  if (idx(mask.rows()) != slab.rows() || idx(mask.cols()) != slab.cols())
    throw_invalid("WeightLayer: mask and slab shapes differ");
  if (!slab.allFinite()) throw_invalid("WeightLayer: slab entries must be finite");
  if (!p_col.empty() && p_col.size() != cols()) throw_invalid("WeightLayer: p_col length");
  if (!sigma2_col.empty() && sigma2_col.size() != cols())
    throw_invalid("WeightLayer: sigma2_col length");
}

void GenerativeModel::validate() const {
  hyper.validate();
  if (layers.size() != hyper.num_layers)
    throw_invalid("GenerativeModel: one weight layer per hidden layer required");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].validate();
    if (i + 1 < layers.size() && layers[i].rows() != layers[i + 1].cols())
      throw_invalid("GenerativeModel: adjacent layer shapes do not chain");
  }
}

// ---------------------------------------------------------------------------
// Densities and sampling

SpikeSlabValue spike_slab_logpdf(double w, double p, double sigma2) {
  if (!std::isfinite(w)) throw_invalid("spike_slab_logpdf: weight must be finite");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw_invalid("spike_slab_logpdf: sigma2 must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw_invalid("spike_slab_logpdf: p must lie in [0, 1]");
  if (w == 0.0) return {SpikeSlabPart::PointMass, 1.0 - p};
  return {SpikeSlabPart::Continuous, std::log(p) + log_normal_pdf(w, std::sqrt(sigma2))};
}

double propagate_sigma(std::span<const double> weight_row, std::span<const double> parent_factors,
                       double sigma_floor) {
  if (weight_row.size() != parent_factors.size())
    throw_invalid("propagate_sigma: weight row and parent factors differ in length");
  double s = 0.0;
  for (std::size_t l = 0; l < weight_row.size(); ++l) s += weight_row[l] * parent_factors[l];
  return std::max(std::abs(s), sigma_floor);
}

std::vector<double> sample_factor_column(const WeightLayer& parent_weights,
                                         std::span<const double> parent_factors,
                                         double sigma_floor, Rng& rng) {
  if (parent_weights.cols() != parent_factors.size())
    throw_invalid("sample_factor_column: parent width mismatch");
  std::vector<double> out(parent_weights.rows());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto row = parent_weights.effective_row(j);
    out[j] = propagate_sigma(row, parent_factors, sigma_floor) * sample_normal(rng, 0.0, 1.0);
  }
  return out;
}

WeightLayer sample_weight_layer(std::size_t n_rows, std::size_t n_cols, double alpha_ibp,
                                double ig_shape, double ig_scale, Rng& rng) {
  if (!(alpha_ibp > 0.0 && ig_shape > 0.0 && ig_scale > 0.0))
    throw_invalid("sample_weight_layer: priors must be positive");
  WeightLayer layer(n_rows, n_cols);
  layer.p_col.resize(n_cols);
  layer.sigma2_col.resize(n_cols);
  const double a = alpha_ibp / static_cast<double>(std::max<std::size_t>(n_cols, 1));
  for (std::size_t c = 0; c < n_cols; ++c) {
    const double p = sample_beta(rng, a, 1.0);
    const double s2 = sample_inverse_gamma(rng, ig_shape, ig_scale);
    layer.p_col[c] = p;
    layer.sigma2_col[c] = s2;
    const double sd = std::sqrt(s2);
    for (std::size_t r = 0; r < n_rows; ++r) {
      layer.mask.set(r, c, sample_bernoulli(rng, p));
      layer.slab(idx(r), idx(c)) = sample_normal(rng, 0.0, sd);
    }
  }
  return layer;
}

GenerativeModel sample_model(const HyperParams& hyper, std::size_t observed_dim, Rng& rng) {
  hyper.validate();
  GenerativeModel model;
  model.hyper = hyper;
  // Top layer first.
  for (std::size_t i = hyper.num_layers; i-- > 0;) {
    const std::size_t rows = i == 0 ? observed_dim : hyper.layer_widths[i - 1];
    const std::size_t cols = hyper.layer_widths[i];
    const LayerHyper h = hyper.layer(i);
    model.layers.push_back(sample_weight_layer(rows, cols, h.alpha_ibp, h.ig_shape, h.ig_scale, rng));
  }
  return model;
}

std::vector<FactorMatrix> generate_dataset(const GenerativeModel& model, std::size_t num_instances,
                                           Rng& rng) {
  model.validate();
  const auto& hyper = model.hyper;
  std::vector<FactorMatrix> out;
  out.reserve(model.layers.size() + 1);

  FactorMatrix top(model.layers.front().cols(), num_instances);
  for (std::size_t t = 0; t < num_instances; ++t)
    for (std::size_t k = 0; k < top.rows(); ++k) top(k, t) = sample_normal(rng, 0.0, hyper.sigma_top);
  out.push_back(std::move(top));

  for (const auto& layer : model.layers) {
    const FactorMatrix& parent = out.back();
    const Eigen::MatrixXd w = layer.effective();
    FactorMatrix child(layer.rows(), num_instances);
    for (std::size_t t = 0; t < num_instances; ++t) {
      for (std::size_t j = 0; j < layer.rows(); ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < layer.cols(); ++l) s += w(idx(j), idx(l)) * parent(l, t);
        const double sd = std::max(std::abs(s), hyper.sigma_floor);
        child(j, t) = sd * sample_normal(rng, 0.0, 1.0);
      }
    }
    out.push_back(std::move(child));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chain state and log-joint

ParentContext ParentContext::from_upper(const WeightLayer& upper_weights,
                                        const FactorMatrix& upper_factors, double sigma_floor) {
  if (upper_weights.cols() != upper_factors.rows())
    throw_invalid("ParentContext: upper weights and factors do not chain");
  const Eigen::MatrixXd act = upper_weights.effective() * upper_factors.values();
  ParentContext ctx;
  ctx.sigma = act.cwiseAbs().cwiseMax(sigma_floor);
  return ctx;
}

void ChainState::validate(std::size_t observed_dim, std::size_t num_instances) const {
  weights.validate();
  if (weights.rows() != observed_dim) throw_invalid("ChainState: weight rows must equal N");
  if (weights.cols() != Y.rows()) throw_invalid("ChainState: K mismatch between W and Y");
  if (Y.cols() != num_instances) throw_invalid("ChainState: Y must have T columns");
  if (parent && (idx(K()) != parent->sigma.rows() || idx(num_instances) != parent->sigma.cols()))
    throw_invalid("ChainState: parent context shape mismatch");
}

double log_likelihood(const FactorMatrix& X, const WeightLayer& weights, const FactorMatrix& Y,
                      double sigma_floor) {
  if (X.rows() != weights.rows() || weights.cols() != Y.rows() || X.cols() != Y.cols())
    throw_invalid("log_likelihood: shape mismatch");
  const Eigen::MatrixXd act = weights.effective() * Y.values();
  double total = 0.0;
  for (Eigen::Index t = 0; t < act.cols(); ++t)
    for (Eigen::Index n = 0; n < act.rows(); ++n) {
      const double sd = std::max(std::abs(act(n, t)), sigma_floor);
      total += log_normal_pdf(X.values()(n, t), sd);
    }
  return total;
}

double log_factor_prior(const ChainState& state, double sigma_top) {
  double total = 0.0;
  for (std::size_t t = 0; t < state.Y.cols(); ++t)
    for (std::size_t k = 0; k < state.K(); ++k)
      total += log_normal_pdf(state.Y(k, t), state.prior_sigma(k, t, sigma_top));
  return total;
}

double log_slab_column_marginal(std::size_t m, double sum_sq, double ig_shape, double ig_scale) {
  if (m == 0) return 0.0;
  const double half_m = 0.5 * static_cast<double>(m);
  return ig_shape * std::log(ig_scale) + std::lgamma(ig_shape + half_m) - std::lgamma(ig_shape) -
         2.0 * half_m * kLogSqrt2Pi - (ig_shape + half_m) * std::log(ig_scale + 0.5 * sum_sq);
}

double log_slab_marginal(const WeightLayer& weights, double ig_shape, double ig_scale) {
  double total = 0.0;
  for (std::size_t c = 0; c < weights.cols(); ++c) {
    double ss = 0.0;
    for (std::size_t r = 0; r < weights.rows(); ++r) {
      const double g = weights.weight(r, c);
      ss += g * g;
    }
    total += log_slab_column_marginal(weights.mask.column_count(c), ss, ig_shape, ig_scale);
  }
  return total;
}

double log_k_prior(std::size_t K, double alpha_ibp, std::size_t observed_dim) {
  return log_poisson_pmf(K, alpha_ibp * ibp::harmonic_number(observed_dim));
}

LogJoint log_joint(const FactorMatrix& X, const ChainState& state, const HyperParams& hyper) {
  state.validate(X.rows(), X.cols());
  const LayerHyper h = hyper.layer(state.layer);
  LogJoint lj;
  lj.likelihood = log_likelihood(X, state.weights, state.Y, hyper.sigma_floor);
  lj.factor_prior = log_factor_prior(state, hyper.sigma_top);
  lj.weight_mask = ibp::logprob_mask_marginal(state.weights.mask, h.alpha_ibp);
  lj.weight_slab = log_slab_marginal(state.weights, h.ig_shape, h.ig_scale);
  lj.k_prior = log_k_prior(state.K(), h.alpha_ibp, X.rows());
  return lj;
}

}  // namespace deepfactor
