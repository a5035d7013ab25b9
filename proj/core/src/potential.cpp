#include "fpr/potential.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fpr/errors.hpp"

namespace fpr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// sum_j p_j (1 - ln p_j) with the 0*ln(0) = 0 convention.
double price_entropy_term(const PriceVector& p) {
  double sum = 0.0;
  for (const double pj : p.prices) {
    if (pj > 0.0) sum += pj * (1.0 - std::log(pj));
  }
  return sum;
}

double bid_log_value_row(std::size_t i, const BidProfile& b, const MarketInstance& market) {
  double sum = 0.0;
  for (std::size_t j = 0; j < market.m; ++j) {
    const double bid = b.bids(i, j);
    if (bid > 0.0) {
      const double a = market.valuations(i, j);
      if (a == 0.0) {
        throw NumericDomainError("potential: positive bid on a zero-valued good at (" +
                                 std::to_string(i) + "," + std::to_string(j) + ")");
      }
      sum += bid * std::log(a);
    }
  }
  return sum;
}

}  // namespace

double potential(const BidProfile& b, const MarketInstance& market) {
  if (b.bids.rows() != market.n || b.bids.cols() != market.m) {
    throw InvalidInputError("potential: bid matrix shape does not match the market");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < market.n; ++i) sum += bid_log_value_row(i, b, market);
  return sum + price_entropy_term(compute_prices(b, market));
}

PotentialValue evaluate_potential(const BidProfile& b, const MarketInstance& market,
                                  bool with_gradient) {
  PotentialValue out;
  out.value = potential(b, market);
  if (with_gradient) out.gradient = potential_gradient(b, market);
  return out;
}

double associated_utility(std::size_t i, const BidProfile& b, const MarketInstance& market) {
  if (i >= market.n) throw InvalidInputError("associated_utility: buyer index out of range");
  if (b.bids.rows() != market.n || b.bids.cols() != market.m) {
    throw InvalidInputError("associated_utility: bid matrix shape does not match the market");
  }
  return bid_log_value_row(i, b, market) + price_entropy_term(compute_prices(b, market));
}

double associated_utility_prime(std::size_t i, const BidProfile& b,
                                const MarketInstance& market) {
  if (i >= market.n) {
    throw InvalidInputError("associated_utility_prime: buyer index out of range");
  }
  const PriceVector p = compute_prices(b, market);
  double sum = 0.0;
  for (std::size_t j = 0; j < market.m; ++j) {
    const double a = market.valuations(i, j);
    if (a > 0.0) {
      if (p.prices[j] <= 0.0) {
        throw NumericDomainError("associated_utility_prime: zero price on a valued good");
      }
      sum += a * std::log(p.prices[j]);
    }
  }
  return sum;
}

Matrix potential_gradient(const BidProfile& b, const MarketInstance& market) {
  const PriceVector p = compute_prices(b, market);
  Matrix grad(market.n, market.m, -kInf);
  for (std::size_t i = 0; i < market.n; ++i) {
    for (std::size_t j = 0; j < market.m; ++j) {
      const double a = market.valuations(i, j);
      if (a == 0.0) continue;  // sentinel stays
      if (p.prices[j] <= 0.0) {
        throw NumericDomainError("potential_gradient: zero price on a valued good");
      }
      grad(i, j) = std::log(a) - std::log(p.prices[j]);
    }
  }
  return grad;
}

double kl_divergence(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInputError("kl_divergence: length mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] > 0.0) {
      if (y[k] <= 0.0) return kInf;
      sum += x[k] * std::log(x[k] / y[k]);
    }
  }
  return sum;
}

double kl_divergence(const Matrix& x, const Matrix& y) {
  if (!x.same_shape(y)) throw InvalidInputError("kl_divergence: shape mismatch");
  return kl_divergence(x.flat(), y.flat());
}

double kl_divergence_rows(const BidProfile& b, const BidProfile& b_ref,
                          std::span<const std::size_t> v) {
  if (!b.bids.same_shape(b_ref.bids)) {
    throw InvalidInputError("kl_divergence_rows: shape mismatch");
  }
  double sum = 0.0;
  for (const std::size_t i : v) {
    if (i >= b.bids.rows()) throw InvalidInputError("kl_divergence_rows: buyer index out of range");
    const double d = kl_divergence(b.bids.row(i), b_ref.bids.row(i));
    if (d == kInf) return kInf;
    sum += d;
  }
  return sum;
}

double linearized_potential(const BidProfile& b, const BidProfile& b_ref,
                            std::span<const std::size_t> v, const MarketInstance& market) {
  if (!b.bids.same_shape(b_ref.bids)) {
    throw InvalidInputError("linearized_potential: shape mismatch");
  }
  const PriceVector p_ref = compute_prices(b_ref, market);
  double expansion = potential(b_ref, market);
  for (const std::size_t i : v) {
    if (i >= market.n) throw InvalidInputError("linearized_potential: buyer index out of range");
    for (std::size_t j = 0; j < market.m; ++j) {
      const double a = market.valuations(i, j);
      const double delta = b.bids(i, j) - b_ref.bids(i, j);
      if (a == 0.0) {
        if (delta != 0.0) {
          throw NumericDomainError("linearized_potential: displacement on a zero-valued good");
        }
        continue;
      }
      if (p_ref.prices[j] <= 0.0) {
        throw NumericDomainError("linearized_potential: reference price is zero on a valued good");
      }
      if (delta != 0.0) {
        expansion += (std::log(a) - std::log(p_ref.prices[j])) * delta;
      }
    }
  }
  return expansion;
}

}  // namespace fpr
