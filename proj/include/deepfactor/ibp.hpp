#pragma once

// Beta-Bernoulli mask laws and their Indian Buffet Process limit.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "deepfactor/binary_matrix.hpp"
#include "deepfactor/random.hpp"

namespace deepfactor::ibp {

/// Equivalence class of a binary matrix under column permutation.
///
/// `canonical` is the left-ordered form: columns sorted by binary history
/// (row 0 most significant), descending. `multiplicities` holds the size of
/// each run of identical columns in that order.
struct LofClass {
  BinaryMatrix canonical;
  std::vector<std::size_t> multiplicities;
  std::string signature;

  friend bool operator==(const LofClass& a, const LofClass& b) { return a.signature == b.signature; }
  friend bool operator<(const LofClass& a, const LofClass& b) { return a.signature < b.signature; }
};

double harmonic_number(std::size_t n);

/// Σ_k [m_k log p_k + (N − m_k) log(1 − p_k)].
double logprob_mask_given_p(const BinaryMatrix& Z, std::span<const double> p);

/// One column of the Beta(α/K, 1)-integrated mask law with `m` ones out of
/// `n` rows and c = α/K.
double log_mask_column_marginal(std::size_t m, std::size_t n, double alpha_over_k);

/// Finite-K mask law with p integrated out; K = Z.cols().
double logprob_mask_marginal(const BinaryMatrix& Z, double alpha);

/// Infinite-limit law of the left-ordered class of Z. Z must not contain
/// all-zero columns.
double logprob_mask_ibp(const BinaryMatrix& Z, double alpha);

/// Sequential culinary-process sampler. Returns only active columns.
BinaryMatrix sample_ibp_sequential(std::size_t n, double alpha, Rng& rng);

/// Finite Beta-Bernoulli draw with K columns; all-zero columns dropped.
BinaryMatrix sample_finite_active(std::size_t n, std::size_t k, double alpha, Rng& rng);

LofClass left_order_form(const BinaryMatrix& Z);

}  // namespace deepfactor::ibp
