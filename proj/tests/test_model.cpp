#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "deepfactor/error.hpp"
#include "deepfactor/ibp.hpp"
#include "deepfactor/model.hpp"
#include "deepfactor/numeric.hpp"
#include "deepfactor/oracle.hpp"
#include "deepfactor/state.hpp"

using namespace deepfactor;

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

ChainState state_from_model(const GenerativeModel& model, const FactorMatrix& Y) {
  ChainState s;
  s.weights = model.layers.back();
  s.weights.p_col.clear();
  s.weights.sigma2_col.clear();
  s.Y = Y;
  return s;
}

}  // namespace

TEST_CASE("spike_slab_logpdf separates the point mass from the density") {
  const auto v = spike_slab_logpdf(1.0, 0.5, 1.0);
  CHECK(v.part == SpikeSlabPart::Continuous);
  CHECK(v.value == doctest::Approx(std::log(0.5) - 0.5 - 0.5 * std::log(2.0 * M_PI)).epsilon(1e-14));

  const auto zero = spike_slab_logpdf(0.0, 0.3, 2.0);
  CHECK(zero.part == SpikeSlabPart::PointMass);
  CHECK(zero.value == doctest::Approx(0.7));

  CHECK_THROWS_AS(spike_slab_logpdf(1.0, 1.5, 1.0), Error);
  CHECK_THROWS_AS(spike_slab_logpdf(1.0, -0.1, 1.0), Error);
}

TEST_CASE("continuous part of the spike-and-slab law integrates to p") {
  const oracle::Grid1D grid(-12.0, 12.0, 200001);
  for (double p : {0.5, 0.2, 0.9}) {
    auto f = [p](double w) { return std::exp(spike_slab_logpdf(w == 0.0 ? 1e-300 : w, p, 1.0).value); };
    CHECK(oracle::grid_integrate(f, grid) == doctest::Approx(p).epsilon(1e-8));
  }
}

TEST_CASE("propagate_sigma") {
  const std::vector<double> w{0.5, -2.0};
  const std::vector<double> y{2.0, 1.0};
  CHECK(propagate_sigma(w, y, 1e-6) == doctest::Approx(1.0));
  // |Σ w y| is invariant under flipping the sign of every parent factor.
  const std::vector<double> neg{-2.0, -1.0};
  CHECK(propagate_sigma(w, neg, 1e-6) == propagate_sigma(w, y, 1e-6));

  const std::vector<double> cancel{2.0, 0.5};
  CHECK(propagate_sigma(w, cancel, 1e-6) == 1e-6);

  const std::vector<double> short_y{1.0};
  CHECK_THROWS_AS(propagate_sigma(w, short_y, 1e-6), Error);
}

TEST_CASE("sample_factor_column with one parent has the propagated scale") {
  WeightLayer parent(1, 1);
  parent.mask.set(0, 0, true);
  parent.slab(0, 0) = 2.0;
  const std::vector<double> y{1.0};
  Rng rng(11);
  std::vector<double> draws(100000);
  for (double& d : draws) d = sample_factor_column(parent, y, 1e-6, rng)[0];
  const double se = 2.0 / std::sqrt(static_cast<double>(draws.size()));
  CHECK(std::abs(mean_of(draws)) < 3.0 * se);
  CHECK(sd_of(draws) == doctest::Approx(2.0).epsilon(0.01));

  // A masked-out weight leaves only the floor.
  parent.mask.set(0, 0, false);
  for (int i = 0; i < 100; ++i) CHECK(std::abs(sample_factor_column(parent, y, 1e-6, rng)[0]) < 1e-4);
}

TEST_CASE("sample_weight_layer with alpha equal to K includes half the entries") {
  Rng rng(12);
  const std::size_t K = 10;
  std::size_t on = 0, total = 0;
  std::vector<double> sigma2;
  for (int rep = 0; rep < 10000; ++rep) {
    const WeightLayer w = sample_weight_layer(1, K, static_cast<double>(K), 2.0, 1.0, rng);
    for (std::size_t c = 0; c < K; ++c) {
      on += w.mask(0, c) ? 1 : 0;
      ++total;
      sigma2.push_back(w.sigma2_col[c]);
    }
  }
  const double freq = static_cast<double>(on) / static_cast<double>(total);
  CHECK(std::abs(freq - 0.5) < 3.0 * 0.5 / std::sqrt(static_cast<double>(total)));
  // Inverse-gamma(2, 1) has mean 1 and infinite variance, so the tolerance is loose.
  CHECK(mean_of(sigma2) == doctest::Approx(1.0).epsilon(0.05));

  CHECK_THROWS_AS(sample_weight_layer(2, 2, 0.0, 2.0, 1.0, rng), Error);
}

TEST_CASE("generate_dataset shapes and reproducibility") {
  const HyperParams h = HyperParams::single_layer(3, {3.0, 2.0, 1.0});
  Rng a(5), b(5);
  const auto model_a = sample_model(h, 16, a);
  const auto model_b = sample_model(h, 16, b);
  const auto data_a = generate_dataset(model_a, 200, a);
  const auto data_b = generate_dataset(model_b, 200, b);
  REQUIRE(data_a.size() == 2);
  CHECK(data_a.back().rows() == 16);
  CHECK(data_a.back().cols() == 200);
  CHECK(data_a.front().rows() == 3);
  CHECK(data_a.back() == data_b.back());
  CHECK(model_a.layers.back().mask == model_b.layers.back().mask);

  // Without hidden factors every scale collapses to the floor.
  const HyperParams empty = HyperParams::single_layer(0);
  Rng c(6);
  const auto model0 = sample_model(empty, 4, c);
  const auto x0 = generate_dataset(model0, 50, c).back();
  CHECK(x0.values().cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("two-layer generation chains the widths") {
  HyperParams h;
  h.num_layers = 2;
  h.layer_widths = {3, 2};
  h.alpha_ibp_per_layer = {3.0, 2.0};
  h.ig_shape_per_layer = {2.0, 2.0};
  h.ig_scale_per_layer = {1.0, 1.0};
  Rng rng(7);
  const auto model = sample_model(h, 8, rng);
  REQUIRE(model.layers.size() == 2);
  CHECK(model.layers[0].rows() == 3);
  CHECK(model.layers[0].cols() == 2);
  CHECK(model.layers[1].rows() == 8);
  CHECK(model.layers[1].cols() == 3);
  const auto data = generate_dataset(model, 20, rng);
  REQUIRE(data.size() == 3);
  CHECK(data[0].rows() == 2);
  CHECK(data[1].rows() == 3);
  CHECK(data[2].rows() == 8);
}

TEST_CASE("HyperParams validation") {
  HyperParams h = HyperParams::single_layer(3);
  CHECK_NOTHROW(h.validate());
  h.alpha_ibp_per_layer = {0.0};
  CHECK_THROWS_AS(h.validate(), Error);
  h = HyperParams::single_layer(3);
  h.layer_widths = {3, 4};
  CHECK_THROWS_AS(h.validate(), Error);
  h = HyperParams::single_layer(3);
  h.sigma_floor = 2.0;
  CHECK_THROWS_AS(h.validate(), Error);
  // Layers past the configured depth reuse the top layer's priors.
  h = HyperParams::single_layer(3, {4.0, 3.0, 2.0});
  CHECK(h.layer(5).alpha_ibp == 4.0);
}

TEST_CASE("FactorMatrix rejects non-finite entries") {
  Eigen::MatrixXd m(1, 2);
  m << 1.0, NAN;
  CHECK_THROWS_AS(FactorMatrix{m}, Error);
  m << 1.0, INFINITY;
  CHECK_THROWS_AS(FactorMatrix{m}, Error);
}

TEST_CASE("log_joint decomposes and ignores column order") {
  const HyperParams h = HyperParams::single_layer(4, {3.0, 2.0, 1.0});
  Rng rng(8);
  const auto model = sample_model(h, 6, rng);
  const auto data = generate_dataset(model, 30, rng);
  const ChainState s = state_from_model(model, data.front());
  const FactorMatrix& X = data.back();
  const LogJoint lj = log_joint(X, s, h);
  CHECK(lj.total() == doctest::Approx(lj.likelihood + lj.factor_prior + lj.weight_mask + lj.weight_slab +
                                      lj.k_prior));
  CHECK(lj.likelihood == doctest::Approx(log_likelihood(X, s.weights, s.Y, h.sigma_floor)));
  CHECK(lj.k_prior == doctest::Approx(log_poisson_pmf(4, 3.0 * ibp::harmonic_number(6))));

  // Reverse the factor order: mask columns and factor rows together.
  ChainState r = s;
  const std::vector<std::size_t> order{3, 2, 1, 0};
  r.weights.mask = s.weights.mask.with_columns(order);
  for (std::size_t c = 0; c < 4; ++c) {
    r.weights.slab.col(static_cast<Eigen::Index>(c)) = s.weights.slab.col(static_cast<Eigen::Index>(order[c]));
    r.Y.values().row(static_cast<Eigen::Index>(c)) = s.Y.values().row(static_cast<Eigen::Index>(order[c]));
  }
  CHECK(log_joint(X, r, h).total() == doctest::Approx(lj.total()).epsilon(1e-12));
}

TEST_CASE("likelihood with no factors uses the floor everywhere") {
  FactorMatrix X(2, 3);
  X(0, 0) = 1e-6;
  WeightLayer w(2, 0);
  FactorMatrix Y(0, 3);
  const double expected = 5.0 * log_normal_pdf(0.0, 1e-6) + log_normal_pdf(1e-6, 1e-6);
  CHECK(log_likelihood(X, w, Y, 1e-6) == doctest::Approx(expected));
}

TEST_CASE("doubling T doubles the likelihood term in expectation") {
  // The per-instance terms are i.i.d. given the weights, so l(2T)/2 - l(T)
  // has mean zero. Near the floor the terms can take either sign, so a ratio
  // would be meaningless.
  const HyperParams h = HyperParams::single_layer(3, {3.0, 2.0, 1.0});
  std::vector<double> diff;
  for (int r = 0; r < 50; ++r) {
    Rng rng(100 + r);
    const auto model = sample_model(h, 10, rng);
    const auto d1 = generate_dataset(model, 200, rng);
    const auto d2 = generate_dataset(model, 400, rng);
    const auto& w = model.layers.back();
    const double l1 = log_likelihood(d1.back(), w, d1.front(), h.sigma_floor);
    const double l2 = log_likelihood(d2.back(), w, d2.front(), h.sigma_floor);
    diff.push_back(0.5 * l2 - l1);
  }
  CHECK(std::abs(mean_of(diff)) < 3.0 * sd_of(diff) / std::sqrt(static_cast<double>(diff.size())));
}

TEST_CASE("slab column marginal matches the Student-t of a single value") {
  // One value: Student-t with 2a degrees of freedom and scale sqrt(b/a).
  const double a = 2.0, b = 1.0, w = 0.7;
  const double nu = 2.0 * a, s = std::sqrt(b / a);
  const double z = w / s;
  const double t = std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5 * std::log(nu * M_PI) - std::log(s) -
                   (nu + 1) / 2 * std::log1p(z * z / nu);
  CHECK(log_slab_column_marginal(1, w * w, a, b) == doctest::Approx(t).epsilon(1e-12));
  CHECK(log_slab_column_marginal(0, 0.0, a, b) == 0.0);
}
