#include <cmath>
#include <vector>

#include <doctest.h>

#include "deepfactor/ibp.hpp"
#include "deepfactor/oracle.hpp"

using namespace deepfactor;

TEST_CASE("harmonic numbers") {
  CHECK(ibp::harmonic_number(1) == 1.0);
  CHECK(ibp::harmonic_number(3) == doctest::Approx(11.0 / 6.0).epsilon(1e-15));
  double direct = 0.0;
  for (int j = 1; j <= 100; ++j) direct += 1.0 / j;
  CHECK(std::abs(ibp::harmonic_number(100) - direct) < 1e-14);
  CHECK(ibp::harmonic_number(0) == 0.0);
}

TEST_CASE("logprob_mask_given_p matches a per-entry product") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 2 + rep % 4, k = 1 + rep % 3;
    BinaryMatrix Z(n, k);
    std::vector<double> p(k);
    for (auto& v : p) v = 0.05 + 0.9 * sample_uniform(rng);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < k; ++c) Z.set(r, c, sample_bernoulli(rng, 0.5));
    double naive = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < k; ++c) naive += std::log(Z(r, c) ? p[c] : 1.0 - p[c]);
    CHECK(std::abs(ibp::logprob_mask_given_p(Z, p) - naive) < 1e-12);
  }
}

TEST_CASE("Beta-integrated column law for N = 2, K = 1, alpha = 1") {
  CHECK(ibp::log_mask_column_marginal(0, 2, 1.0) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
  CHECK(ibp::log_mask_column_marginal(1, 2, 1.0) == doctest::Approx(std::log(1.0 / 6.0)).epsilon(1e-14));
  CHECK(ibp::log_mask_column_marginal(2, 2, 1.0) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));

  double total = 0.0;
  for (const auto& Z : oracle::enumerate_masks(2, 1)) total += std::exp(ibp::logprob_mask_marginal(Z, 1.0));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("finite mask law sums to one over every 3x2 mask") {
  for (double alpha : {0.5, 1.0, 3.0}) {
    double total = 0.0;
    const auto masks = oracle::enumerate_masks(3, 2);
    CHECK(masks.size() == 64);
    for (const auto& Z : masks) total += std::exp(ibp::logprob_mask_marginal(Z, alpha));
    CHECK(std::abs(total - 1.0) < 1e-10);
  }
}

TEST_CASE("IBP class law by hand") {
  // N = 1, one column: log(1) - H_1 + log(0! 0! / 1!) = -1.
  CHECK(ibp::logprob_mask_ibp(BinaryMatrix::from_rows({"1"}), 1.0) == doctest::Approx(-1.0).epsilon(1e-14));
  // Empty matrix: exp(-alpha H_N).
  CHECK(ibp::logprob_mask_ibp(BinaryMatrix(3, 0), 2.0) ==
        doctest::Approx(-2.0 * ibp::harmonic_number(3)).epsilon(1e-14));
  // The law depends only on the class, not the column order.
  const auto a = BinaryMatrix::from_rows({"10", "01", "11"});
  const auto b = BinaryMatrix::from_rows({"01", "10", "11"});
  CHECK(ibp::logprob_mask_ibp(a, 1.5) == doctest::Approx(ibp::logprob_mask_ibp(b, 1.5)).epsilon(1e-14));
}

TEST_CASE("IBP class law normalizes over N = 2 classes") {
  CHECK(std::abs(oracle::ibp_class_mass_n2(1.0, 25, false) - 1.0) < 1e-9);
  CHECK(std::abs(oracle::ibp_class_mass_n2(2.5, 30, false) - 1.0) < 1e-9);
}

TEST_CASE("left-ordered form groups equal histories") {
  // Columns: 11, 01, 11 (rows "101", "111").
  const auto Z = BinaryMatrix::from_rows({"101", "111"});
  const auto lof = ibp::left_order_form(Z);
  CHECK(lof.canonical == BinaryMatrix::from_rows({"110", "111"}));
  CHECK(lof.multiplicities == std::vector<std::size_t>{2, 1});
  CHECK(ibp::left_order_form(BinaryMatrix::from_rows({"011", "111"})) == lof);
  CHECK(oracle::log_lof_correction_equal_history(Z) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("first customer tries Poisson(alpha) dishes") {
  Rng rng(21);
  const double alpha = 2.0;
  const std::size_t runs = 100000;
  double sum = 0.0;
  for (std::size_t i = 0; i < runs; ++i) sum += static_cast<double>(ibp::sample_ibp_sequential(1, alpha, rng).cols());
  const double se = std::sqrt(alpha / static_cast<double>(runs));
  CHECK(std::abs(sum / static_cast<double>(runs) - alpha) < 3.0 * se);
}

TEST_CASE("total dishes average alpha H_N") {
  Rng rng(22);
  const double alpha = 3.0;
  const std::size_t n = 10, runs = 20000;
  std::vector<double> k(runs);
  for (auto& v : k) v = static_cast<double>(ibp::sample_ibp_sequential(n, alpha, rng).cols());
  double mean = 0.0;
  for (double v : k) mean += v;
  mean /= static_cast<double>(runs);
  const double expected = alpha * ibp::harmonic_number(n);
  // K is Poisson(alpha H_N), so its variance equals the mean.
  CHECK(std::abs(mean - expected) < 3.0 * std::sqrt(expected / static_cast<double>(runs)));
}

TEST_CASE("sequential draws never contain empty columns") {
  Rng rng(23);
  for (int i = 0; i < 1000; ++i) {
    const auto Z = ibp::sample_ibp_sequential(4, 3.0, rng);
    for (std::size_t c = 0; c < Z.cols(); ++c) CHECK_FALSE(Z.column_is_empty(c));
  }
}

TEST_CASE("large finite K approaches the IBP dish count") {
  Rng rng(24);
  const std::size_t n = 5, runs = 20000;
  const double alpha = 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < runs; ++i) sum += static_cast<double>(ibp::sample_finite_active(n, 2000, alpha, rng).cols());
  const double expected = alpha * ibp::harmonic_number(n);
  CHECK(sum / static_cast<double>(runs) == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("BinaryMatrix bookkeeping") {
  auto Z = BinaryMatrix::from_rows({"10", "11"});
  CHECK(Z.column_count(0) == 2);
  CHECK(Z.column_count(1) == 1);
  Z.append_zero_column();
  CHECK(Z.cols() == 3);
  CHECK(Z.column_is_empty(2));
  CHECK(Z.nonempty_columns() == 2);
  Z.remove_column(0);
  CHECK(Z.row_strings() == std::vector<std::string>{"00", "10"});
  Z.set(0, 1, true);
  CHECK(Z.column_count(1) == 1);
}
