#include "fpr/market.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fpr/errors.hpp"
#include "fpr/rng.hpp"

namespace fpr {

namespace {

void check_bid_shape(const BidProfile& b, const MarketInstance& market, const char* where) {
  if (b.bids.rows() != market.n || b.bids.cols() != market.m) {
    throw InvalidInputError(std::string(where) + ": bid matrix shape does not match the market");
  }
}

}  // namespace

PriceVector compute_prices(const BidProfile& b, const MarketInstance& market) {
  check_bid_shape(b, market, "compute_prices");
  PriceVector p;
  p.prices.assign(market.m, 0.0);
  for (std::size_t i = 0; i < market.n; ++i) {
    const auto row = b.bids.row(i);
    for (std::size_t j = 0; j < market.m; ++j) p.prices[j] += row[j];
  }
  return p;
}

Allocation allocate(const BidProfile& b, const PriceVector& p, const MarketInstance& market) {
  check_bid_shape(b, market, "allocate");
  if (p.prices.size() != market.m) {
    throw InvalidInputError("allocate: price vector length does not match the market");
  }
  Allocation x{Matrix(market.n, market.m, 0.0)};
  for (std::size_t i = 0; i < market.n; ++i) {
    for (std::size_t j = 0; j < market.m; ++j) {
      const double bid = b.bids(i, j);
      if (bid > 0.0) x.shares(i, j) = bid / p.prices[j];
    }
  }
  return x;
}

double buyer_utility(std::size_t i, const Allocation& x, const MarketInstance& market) {
  if (i >= market.n) throw InvalidInputError("buyer_utility: buyer index out of range");
  if (x.shares.rows() != market.n || x.shares.cols() != market.m) {
    throw InvalidInputError("buyer_utility: allocation shape does not match the market");
  }
  double u = 0.0;
  for (std::size_t j = 0; j < market.m; ++j) u += market.valuations(i, j) * x.shares(i, j);
  return u;
}

std::vector<double> buyer_utilities(const Allocation& x, const MarketInstance& market) {
  std::vector<double> u(market.n);
  for (std::size_t i = 0; i < market.n; ++i) u[i] = buyer_utility(i, x, market);
  return u;
}

double bang_per_buck(std::size_t i, std::size_t j, const PriceVector& p,
                     const MarketInstance& market) {
  if (i >= market.n || j >= market.m) {
    throw InvalidInputError("bang_per_buck: index out of range");
  }
  if (p.prices.size() != market.m) {
    throw InvalidInputError("bang_per_buck: price vector length does not match the market");
  }
  if (p.prices[j] <= 0.0) {
    throw NumericDomainError("bang_per_buck: zero price");
  }
  return market.valuations(i, j) / p.prices[j];
}

NashWelfare nash_social_welfare(const Allocation& x, const MarketInstance& market) {
  NashWelfare out;
  double log_sum = 0.0;
  for (std::size_t i = 0; i < market.n; ++i) {
    const double u = buyer_utility(i, x, market);
    if (u <= 0.0) {
      out.value = 0.0;
      out.degenerate = true;
      return out;
    }
    log_sum += market.budgets[i] * std::log(u);
  }
  out.value = std::exp(log_sum);
  return out;
}

MarketInstance generate_random_market(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (n == 0 || m == 0) throw InvalidInputError("generate_random_market: n and m must be >= 1");
  std::mt19937_64 rng(seed);
  MarketInstance market;
  market.n = n;
  market.m = m;
  market.valuations = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = uniform_open01(rng);
      market.valuations(i, j) = v;
      row_sum += v;
    }
    for (std::size_t j = 0; j < m; ++j) market.valuations(i, j) /= row_sum;
  }
  market.budgets.resize(n);
  double budget_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    market.budgets[i] = uniform_open01(rng);
    budget_sum += market.budgets[i];
  }
  for (std::size_t i = 0; i < n; ++i) market.budgets[i] /= budget_sum;
  return market;
}

ValidationReport validate_market(const MarketInstance& market) {
  ValidationReport report;
  auto bad = [&report](std::string msg) { report.violations.push_back(std::move(msg)); };

  if (market.n == 0) bad("market has no buyers");
  if (market.m == 0) bad("market has no goods");
  if (market.budgets.size() != market.n) bad("budget vector length differs from n");
  if (market.valuations.rows() != market.n || market.valuations.cols() != market.m) {
    bad("valuation matrix shape differs from (n, m)");
  }
  if (!report.violations.empty()) return report;

  double budget_sum = 0.0;
  for (std::size_t i = 0; i < market.n; ++i) {
    if (!(market.budgets[i] > 0.0)) {
      bad("buyer " + std::to_string(i) + " has a non-positive budget");
    }
    budget_sum += market.budgets[i];
  }
  if (std::abs(budget_sum - 1.0) > kInputTolerance) {
    bad("budgets sum to " + std::to_string(budget_sum) + ", expected 1");
  }

  for (std::size_t i = 0; i < market.n; ++i) {
    double row_sum = 0.0;
    bool has_positive = false;
    for (std::size_t j = 0; j < market.m; ++j) {
      const double a = market.valuations(i, j);
      if (a < 0.0) bad("negative valuation at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      if (a > 0.0) has_positive = true;
      row_sum += a;
    }
    if (std::abs(row_sum - 1.0) > kInputTolerance) {
      bad("valuation row " + std::to_string(i) + " sums to " + std::to_string(row_sum) +
          ", expected 1");
    }
    if (!has_positive) {
      bad("buyer " + std::to_string(i) + " values no good");
    }
  }

  for (std::size_t j = 0; j < market.m; ++j) {
    bool wanted = false;
    for (std::size_t i = 0; i < market.n; ++i) {
      if (market.valuations(i, j) > 0.0) {
        wanted = true;
        break;
      }
    }
    if (!wanted) {
      bad("good " + std::to_string(j) + " has no interested buyer; the market cannot clear it");
    }
  }

  // A buyer whose whole support is a single good nobody else values is legal
  // but competition-free: at any fixed point that good's price is exactly B_i.
  for (std::size_t i = 0; i < market.n && report.violations.empty(); ++i) {
    std::size_t support = 0;
    std::size_t only_good = 0;
    for (std::size_t j = 0; j < market.m; ++j) {
      if (market.valuations(i, j) > 0.0) {
        ++support;
        only_good = j;
      }
    }
    if (support == 1) {
      bool contested = false;
      for (std::size_t k = 0; k < market.n; ++k) {
        if (k != i && market.valuations(k, only_good) > 0.0) {
          contested = true;
          break;
        }
      }
      if (!contested) {
        report.warnings.push_back("buyer " + std::to_string(i) +
                                  " is alone on its single valued good " +
                                  std::to_string(only_good) + " (degenerate competition)");
      }
    }
  }
  return report;
}

ValidationReport validate_bids(const BidProfile& b, const MarketInstance& market) {
  ValidationReport report;
  auto bad = [&report](std::string msg) { report.violations.push_back(std::move(msg)); };

  if (b.bids.rows() != market.n || b.bids.cols() != market.m) {
    bad("bid matrix shape differs from (n, m)");
    return report;
  }
  for (std::size_t i = 0; i < market.n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < market.m; ++j) {
      const double bid = b.bids(i, j);
      if (bid < 0.0) {
        bad("negative bid at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (bid > 0.0 && market.valuations(i, j) == 0.0) {
        bad("buyer " + std::to_string(i) + " bids on good " + std::to_string(j) +
            " it does not value");
      }
      row_sum += bid;
    }
    if (std::abs(row_sum - market.budgets[i]) > kDerivedTolerance) {
      bad("bid row " + std::to_string(i) + " sums to " + std::to_string(row_sum) +
          ", expected budget " + std::to_string(market.budgets[i]));
    }
  }
  return report;
}

}  // namespace fpr
