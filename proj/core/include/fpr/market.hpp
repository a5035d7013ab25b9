#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fpr/matrix.hpp"

namespace fpr {

// Tolerance for normalization of inputs (budgets, valuation rows).
inline constexpr double kInputTolerance = 1e-12;
// Tolerance for quantities derived through floating-point accumulation
// (prices, bid row sums, market clearing).
inline constexpr double kDerivedTolerance = 1e-10;

// A linear Fisher market in normalized form: budgets sum to one and every
// valuation row sums to one. Values are immutable after construction and
// safe to share read-only across threads.
struct MarketInstance {
  std::size_t n = 0;            // buyers
  std::size_t m = 0;            // goods
  std::vector<double> budgets;  // length n, positive, sums to 1
  Matrix valuations;            // n x m, non-negative, rows sum to 1
};

// One bid row per buyer; row i sums to budgets[i], and bids on goods the
// buyer does not value are zero.
struct BidProfile {
  Matrix bids;
};

struct PriceVector {
  std::vector<double> prices;
};

// Fractional shares x_ij in [0,1]; columns of priced goods sum to 1.
struct Allocation {
  Matrix shares;
};

struct NashWelfare {
  double value = 0.0;
  bool degenerate = false;  // some buyer received zero utility
};

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  bool ok() const { return violations.empty(); }
};

// p_j = sum_i b_ij, accumulated in row-major order.
PriceVector compute_prices(const BidProfile& b, const MarketInstance& market);

// x_ij = b_ij / p_j where b_ij > 0, else 0 (also covering p_j = 0).
Allocation allocate(const BidProfile& b, const PriceVector& p, const MarketInstance& market);

// u_i = sum_j a_ij x_ij.
double buyer_utility(std::size_t i, const Allocation& x, const MarketInstance& market);
std::vector<double> buyer_utilities(const Allocation& x, const MarketInstance& market);

// a_ij / p_j; throws NumericDomainError when p_j = 0.
double bang_per_buck(std::size_t i, std::size_t j, const PriceVector& p,
                     const MarketInstance& market);

// prod_i u_i^{B_i}, evaluated in log space. A zero utility yields
// {0, degenerate = true}.
NashWelfare nash_social_welfare(const Allocation& x, const MarketInstance& market);

// Valuations i.i.d. uniform on (0,1), rows normalized; budgets uniform,
// normalized to sum 1. Deterministic given the seed.
MarketInstance generate_random_market(std::size_t n, std::size_t m, std::uint64_t seed);

ValidationReport validate_market(const MarketInstance& market);
ValidationReport validate_bids(const BidProfile& b, const MarketInstance& market);

}  // namespace fpr
