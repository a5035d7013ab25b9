#pragma once

#include <optional>
#include <span>

#include "fpr/market.hpp"

namespace fpr {

// Scalar functions of the associated game. All logarithms are natural, and
// 0*ln(0) terms are taken as 0 so every function is finite on the closed
// simplex, where the interesting profiles live.

// Phi(b) = sum_ij b_ij ln(a_ij) + sum_j p_j (1 - ln p_j).
// Throws NumericDomainError if some b_ij > 0 where a_ij = 0.
double potential(const BidProfile& b, const MarketInstance& market);

struct PotentialValue {
  double value = 0.0;
  std::optional<Matrix> gradient;  // entry (i,j) = ln(a_ij / p_j), see below
};

// Potential with its gradient attached on request.
PotentialValue evaluate_potential(const BidProfile& b, const MarketInstance& market,
                                  bool with_gradient = false);

// Same shape as the potential but the first sum runs over row i only.
double associated_utility(std::size_t i, const BidProfile& b, const MarketInstance& market);

// sum_j a_ij ln(p_j); throws NumericDomainError when a_ij > 0 meets p_j = 0.
double associated_utility_prime(std::size_t i, const BidProfile& b, const MarketInstance& market);

// Entry (i,j) = ln(a_ij / p_j) wherever a_ij > 0; entries with a_ij = 0 are
// -infinity sentinels and must be skipped by arithmetic consumers.
Matrix potential_gradient(const BidProfile& b, const MarketInstance& market);

// D(x||y) = sum_k x_k ln(x_k / y_k), with 0*ln(0/y) = 0. Returns +infinity
// when some x_k > 0 has y_k = 0.
double kl_divergence(std::span<const double> x, std::span<const double> y);
double kl_divergence(const Matrix& x, const Matrix& y);

// KL divergence between two bid profiles restricted to the rows in v.
double kl_divergence_rows(const BidProfile& b, const BidProfile& b_ref,
                          std::span<const std::size_t> v);

// First-order expansion of Phi in the rows of v around b_ref:
//   Phi(b_ref) + grad_v Phi(b_ref) . (b_v - b_ref_v).
// Rows outside v are taken from b_ref. Prices of b_ref must be positive on
// every good some buyer in v values.
double linearized_potential(const BidProfile& b, const BidProfile& b_ref,
                            std::span<const std::size_t> v, const MarketInstance& market);

}  // namespace fpr
