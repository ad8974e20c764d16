#include "deepfactor/ibp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/digamma.hpp>

#include "deepfactor/error.hpp"

namespace deepfactor::ibp {

double harmonic_number(std::size_t n) {
  if (n == 0) return 0.0;
  // H_n = ψ(n + 1) + γ
  return boost::math::digamma(static_cast<double>(n) + 1.0) +
         0.57721566490153286060651209008240243;
}

double logprob_mask_given_p(const BinaryMatrix& Z, std::span<const double> p) {
  if (p.size() != Z.cols()) throw_invalid("logprob_mask_given_p: p must have one entry per column");
  const std::size_t n = Z.rows();
  double total = 0.0;
  for (std::size_t k = 0; k < Z.cols(); ++k) {
    if (!(p[k] >= 0.0 && p[k] <= 1.0)) throw_invalid("logprob_mask_given_p: p outside [0, 1]");
    const std::size_t m = Z.column_count(k);
    if (m > 0) total += static_cast<double>(m) * std::log(p[k]);
    if (n > m) total += static_cast<double>(n - m) * std::log1p(-p[k]);
  }
  return total;
}

double log_mask_column_marginal(std::size_t m, std::size_t n, double alpha_over_k) {
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);
  return std::log(alpha_over_k) + std::lgamma(md + alpha_over_k) + std::lgamma(nd - md + 1.0) -
         std::lgamma(nd + 1.0 + alpha_over_k);
}

double logprob_mask_marginal(const BinaryMatrix& Z, double alpha) {
  if (!(alpha > 0.0)) throw_invalid("logprob_mask_marginal: alpha must be positive");
  if (Z.cols() == 0) return 0.0;
  const double c = alpha / static_cast<double>(Z.cols());
  double total = 0.0;
  for (std::size_t k = 0; k < Z.cols(); ++k)
    total += log_mask_column_marginal(Z.column_count(k), Z.rows(), c);
  return total;
}

double logprob_mask_ibp(const BinaryMatrix& Z, double alpha) {
  if (!(alpha > 0.0)) throw_invalid("logprob_mask_ibp: alpha must be positive");
  const std::size_t n = Z.rows();
  for (std::size_t k = 0; k < Z.cols(); ++k)
    if (Z.column_is_empty(k))
      throw_invalid("logprob_mask_ibp: all-zero column present; prune inactive columns first");

  const LofClass lof = left_order_form(Z);
  const double nd = static_cast<double>(n);
  double total = static_cast<double>(Z.cols()) * std::log(alpha) - alpha * harmonic_number(n);
  for (std::size_t mult : lof.multiplicities) total -= std::lgamma(static_cast<double>(mult) + 1.0);
  for (std::size_t k = 0; k < Z.cols(); ++k) {
    const double m = static_cast<double>(Z.column_count(k));
    total += std::lgamma(nd - m + 1.0) + std::lgamma(m) - std::lgamma(nd + 1.0);
  }
  return total;
}

BinaryMatrix sample_ibp_sequential(std::size_t n, double alpha, Rng& rng) {
  if (n < 1) throw_invalid("sample_ibp_sequential: need at least one customer");
  if (!(alpha > 0.0)) throw_invalid("sample_ibp_sequential: alpha must be positive");
  std::vector<std::vector<std::uint8_t>> dishes;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    const double customers = static_cast<double>(i + 1);
    for (std::size_t k = 0; k < dishes.size(); ++k) {
      if (sample_bernoulli(rng, static_cast<double>(counts[k]) / customers)) {
        dishes[k][i] = 1;
        ++counts[k];
      }
    }
    const std::size_t fresh = sample_poisson(rng, alpha / customers);
    for (std::size_t j = 0; j < fresh; ++j) {
      dishes.emplace_back(n, 0);
      dishes.back()[i] = 1;
      counts.push_back(1);
    }
  }
  BinaryMatrix Z(n, 0);
  for (const auto& d : dishes) Z.append_column(d);
  return Z;
}

BinaryMatrix sample_finite_active(std::size_t n, std::size_t k, double alpha, Rng& rng) {
  if (!(alpha > 0.0) || k == 0) throw_invalid("sample_finite_active: need alpha > 0 and K > 0");
  const double c = alpha / static_cast<double>(k);
  BinaryMatrix Z(n, 0);
  std::vector<std::uint8_t> col(n);
  for (std::size_t j = 0; j < k; ++j) {
    const double p = sample_beta(rng, c, 1.0);
    bool any = false;
    for (std::size_t r = 0; r < n; ++r) {
      col[r] = sample_bernoulli(rng, p) ? 1 : 0;
      any = any || col[r];
    }
    if (any) Z.append_column(col);
  }
  return Z;
}

LofClass left_order_form(const BinaryMatrix& Z) {
  std::vector<std::vector<std::uint8_t>> cols;
  cols.reserve(Z.cols());
  for (std::size_t k = 0; k < Z.cols(); ++k) cols.push_back(Z.column(k));
  // Row 0 is the most significant bit of a column's history; larger first.
  std::stable_sort(cols.begin(), cols.end(), std::greater<>());

  LofClass out;
  out.canonical = BinaryMatrix(Z.rows(), 0);
  out.signature = std::to_string(Z.rows()) + ":";
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.canonical.append_column(cols[k]);
    if (k == 0 || cols[k] != cols[k - 1]) {
      out.multiplicities.push_back(1);
    } else {
      ++out.multiplicities.back();
    }
    if (k > 0) out.signature += '|';
    for (auto b : cols[k]) out.signature += b ? '1' : '0';
  }
  return out;
}

}  // namespace deepfactor::ibp
