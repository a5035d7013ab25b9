#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "fpr/errors.hpp"
#include "fpr/potential.hpp"
#include "test_support.hpp"

using namespace fpr;

namespace {

// Unilateral deviation: replace row i with a fresh feasible row.
BidProfile deviate_row(const BidProfile& b, std::size_t i, const MarketInstance& market,
                       std::mt19937_64& rng) {
  BidProfile out{b.bids};
  double row_sum = 0.0;
  for (std::size_t j = 0; j < market.m; ++j) {
    out.bids(i, j) = market.valuations(i, j) > 0.0 ? 0.05 + uniform01(rng) : 0.0;
    row_sum += out.bids(i, j);
  }
  for (std::size_t j = 0; j < market.m; ++j) out.bids(i, j) *= market.budgets[i] / row_sum;
  return out;
}

}  // namespace

TEST_CASE("potential values on the symmetric 2x2 instance") {
  const MarketInstance market = test::symmetric_2x2();
  const double phi_uniform = potential(test::uniform_bids_2x2(), market);
  const double phi_diagonal = potential(test::diagonal_bids_2x2(), market);
  CHECK(phi_uniform == doctest::Approx(0.77686).epsilon(1e-5));
  CHECK(phi_diagonal == doctest::Approx(1.47001).epsilon(1e-5));
  // The diagonal profile is the equilibrium, hence the potential maximizer.
  CHECK(phi_diagonal > phi_uniform);
}

TEST_CASE("potential rejects bids on zero-valued goods") {
  MarketInstance market = test::symmetric_2x2();
  market.valuations = Matrix::from_rows({{1.0, 0.0}, {0.2, 0.8}});
  const BidProfile bad{Matrix::from_rows({{0.4, 0.1}, {0.25, 0.25}})};
  CHECK_THROWS_AS(potential(bad, market), NumericDomainError);
}

TEST_CASE("exact potential property") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const MarketInstance market = generate_random_market(2 + rng() % 6, 2 + rng() % 6, rng());
    const BidProfile b = test::random_interior_bids(market, rng);
    const std::size_t i = rng() % market.n;
    const BidProfile b_dev = deviate_row(b, i, market, rng);
    const double phi_change = potential(b_dev, market) - potential(b, market);
    const double utility_change =
        associated_utility(i, b_dev, market) - associated_utility(i, b, market);
    CHECK(std::abs(phi_change - utility_change) <= 1e-9);
  }
}

TEST_CASE("associated utility values") {
  const MarketInstance market = test::symmetric_2x2();
  CHECK(associated_utility(0, test::uniform_bids_2x2(), market) ==
        doctest::Approx(1.23501).epsilon(1e-5));

  // One buyer, one good: the simplex is a point and the utility a constant.
  MarketInstance solo;
  solo.n = 1;
  solo.m = 1;
  solo.budgets = {1.0};
  solo.valuations = Matrix::from_rows({{1.0}});
  const BidProfile all_in{Matrix::from_rows({{1.0}})};
  CHECK(associated_utility(0, all_in, solo) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("price-log utility") {
  const MarketInstance market = test::symmetric_2x2();
  const BidProfile uniform = test::uniform_bids_2x2();
  CHECK(associated_utility_prime(0, uniform, market) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(associated_utility_prime(1, uniform, market) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));

  MarketInstance solo;
  solo.n = 1;
  solo.m = 1;
  solo.budgets = {1.0};
  solo.valuations = Matrix::from_rows({{1.0}});
  CHECK(associated_utility_prime(0, BidProfile{Matrix::from_rows({{1.0}})}, solo) == 0.0);
}

TEST_CASE("gradient entries and finite differences") {
  const MarketInstance market = test::symmetric_2x2();
  const Matrix grad = potential_gradient(test::uniform_bids_2x2(), market);
  CHECK(grad(0, 0) == doctest::Approx(0.47000).epsilon(1e-5));

  // ln(a/p) = 0 when the price equals the valuation.
  MarketInstance solo;
  solo.n = 1;
  solo.m = 2;
  solo.budgets = {1.0};
  solo.valuations = Matrix::from_rows({{0.6, 0.4}});
  const BidProfile matching{Matrix::from_rows({{0.6, 0.4}})};
  const Matrix g2 = potential_gradient(matching, solo);
  CHECK(g2(0, 0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(g2(0, 1) == doctest::Approx(0.0).epsilon(1e-14));

  // Central differences; entries with a_ij = 0 are sentinels and skipped.
  std::mt19937_64 rng(5);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    const MarketInstance random_market =
        generate_random_market(2 + rng() % 5, 2 + rng() % 5, rng());
    const BidProfile b = test::random_interior_bids(random_market, rng);
    const Matrix analytic = potential_gradient(b, random_market);
    for (std::size_t i = 0; i < random_market.n; ++i) {
      for (std::size_t j = 0; j < random_market.m; ++j) {
        if (random_market.valuations(i, j) == 0.0) {
          CHECK(analytic(i, j) == -std::numeric_limits<double>::infinity());
          continue;
        }
        BidProfile up{b.bids}, down{b.bids};
        up.bids(i, j) += h;
        down.bids(i, j) -= h;
        const double fd = (potential(up, random_market) - potential(down, random_market)) / (2 * h);
        const double rel =
            std::abs(analytic(i, j) - fd) / std::max(1.0, std::abs(analytic(i, j)));
        CHECK(rel <= 1e-6);
      }
    }
  }
}

TEST_CASE("bundled potential value") {
  const MarketInstance market = test::symmetric_2x2();
  const BidProfile uniform = test::uniform_bids_2x2();
  const PotentialValue plain = evaluate_potential(uniform, market);
  CHECK(plain.value == potential(uniform, market));
  CHECK_FALSE(plain.gradient.has_value());

  const PotentialValue with_grad = evaluate_potential(uniform, market, true);
  REQUIRE(with_grad.gradient.has_value());
  // Wherever a bid is placed on a valued good the gradient is ln(a/p).
  const PriceVector p = compute_prices(uniform, market);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK((*with_grad.gradient)(i, j) ==
            doctest::Approx(std::log(market.valuations(i, j) / p.prices[j])).epsilon(1e-14));
    }
  }
}

TEST_CASE("kl divergence") {
  const std::vector<double> x{1.0, 0.0};
  const std::vector<double> y{0.5, 0.5};
  CHECK(kl_divergence(x, x) == 0.0);
  CHECK(kl_divergence(x, y) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const std::vector<double> z{0.5, 0.5};
  const std::vector<double> degenerate{1.0, 0.0};
  CHECK(kl_divergence(z, degenerate) == std::numeric_limits<double>::infinity());
}

TEST_CASE("price divergence is dominated by bid divergence") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const MarketInstance market = generate_random_market(2 + rng() % 6, 2 + rng() % 6, rng());
    BidProfile b = test::random_interior_bids(market, rng);
    BidProfile b_alt{b.bids};
    const std::vector<std::size_t> v = test::random_subset(market.n, rng);
    for (const std::size_t i : v) {
      const BidProfile fresh = deviate_row(b_alt, i, market, rng);
      b_alt = fresh;
    }
    const PriceVector p = compute_prices(b, market);
    const PriceVector p_alt = compute_prices(b_alt, market);
    const double d_prices = kl_divergence(p.prices, p_alt.prices);
    const double d_bids = kl_divergence_rows(b, b_alt, v);
    CHECK(d_prices <= d_bids + 1e-15);
    double moved = 0.0;
    for (const std::size_t i : v) {
      for (std::size_t j = 0; j < market.m; ++j) {
        moved = std::max(moved, std::abs(b.bids(i, j) - b_alt.bids(i, j)));
      }
    }
    if (moved > 1e-6) CHECK(d_bids - d_prices > 0.0);
  }
}

TEST_CASE("linearized potential") {
  const MarketInstance market = test::symmetric_2x2();
  const BidProfile uniform = test::uniform_bids_2x2();
  const BidProfile diagonal = test::diagonal_bids_2x2();
  const std::vector<std::size_t> everyone{0, 1};

  // Zero displacement reproduces the potential exactly.
  CHECK(linearized_potential(uniform, uniform, everyone, market) ==
        doctest::Approx(potential(uniform, market)).epsilon(1e-15));

  // The uniform -> diagonal move keeps prices fixed, so the divergence term
  // vanishes and the expansion is exact.
  const double expansion = linearized_potential(diagonal, uniform, everyone, market);
  CHECK(expansion == doctest::Approx(potential(diagonal, market)).epsilon(1e-12));
}

TEST_CASE("first-order decomposition of the potential") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const MarketInstance market = generate_random_market(2 + rng() % 6, 2 + rng() % 6, rng());
    const BidProfile b_ref = test::random_interior_bids(market, rng);
    BidProfile b{b_ref.bids};
    const std::vector<std::size_t> v = test::random_subset(market.n, rng);
    for (const std::size_t i : v) {
      const BidProfile fresh = deviate_row(b, i, market, rng);
      b = fresh;
    }
    const double phi = potential(b, market);
    const double expansion = linearized_potential(b, b_ref, v, market);
    const double divergence = kl_divergence(compute_prices(b, market).prices,
                                            compute_prices(b_ref, market).prices);
    CHECK(std::abs(phi - expansion + divergence) <= 1e-9);
  }
}
