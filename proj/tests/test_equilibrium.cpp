#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fpr/equilibrium.hpp"
#include "fpr/potential.hpp"
#include "fpr/rng.hpp"
#include "test_support.hpp"

using namespace fpr;

TEST_CASE("verification accepts the diagonal equilibrium and rejects uniform bids") {
  const MarketInstance market = test::symmetric_2x2();

  const EquilibriumCertificate good = verify_equilibrium(test::diagonal_bids_2x2(), market);
  CHECK(good.accepted);
  CHECK(good.residuals.max() <= 1e-12);
  CHECK(good.acyclic);
  CHECK(good.utilities[0] == doctest::Approx(0.8).epsilon(1e-12));
  // Bang-per-buck 1.6 on the owned good, 0.4 off support.
  CHECK(market.valuations(0, 0) / good.prices.prices[0] == doctest::Approx(1.6));
  CHECK(market.valuations(0, 1) / good.prices.prices[1] == doctest::Approx(0.4));

  const EquilibriumCertificate bad = verify_equilibrium(test::uniform_bids_2x2(), market);
  CHECK_FALSE(bad.accepted);
  // Supported goods sit at bang-per-buck 1.6 and 0.4 against u/B = 1.
  CHECK(bad.residuals.optimality == doctest::Approx(0.6).epsilon(1e-12));

  BidProfile overspent{Matrix::from_rows({{0.4, 0.4}, {0.0, 0.5}})};
  const EquilibriumCertificate broke = verify_equilibrium(overspent, market);
  CHECK_FALSE(broke.accepted);
  CHECK(broke.residuals.budget == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("oracle on the symmetric instance") {
  const MarketInstance market = test::symmetric_2x2();
  OracleDiagnostics diagnostics;
  const EquilibriumCertificate cert = compute_equilibrium(market, 1e-6, 7, &diagnostics);
  CHECK(cert.accepted);
  CHECK(cert.methods_agree);
  CHECK(cert.prices.prices[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(cert.prices.prices[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(cert.utilities[0] == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(cert.utilities[1] == doctest::Approx(0.8).epsilon(1e-6));

  // The certificate's potential dominates every recorded trajectory point
  // and sits within a hair of the best value either route saw.
  const double cert_potential = potential(cert.bids, market);
  double best_seen = -1e300;
  for (const auto& point : diagnostics.prd.points) best_seen = std::max(best_seen, point.potential);
  for (const auto& point : diagnostics.br.points) best_seen = std::max(best_seen, point.potential);
  CHECK(best_seen <= cert_potential + 1e-8);
  CHECK(cert_potential >= best_seen - 1e-8);
}

TEST_CASE("oracle on a single-buyer market") {
  MarketInstance solo;
  solo.n = 1;
  solo.m = 3;
  solo.budgets = {1.0};
  solo.valuations = Matrix::from_rows({{0.5, 0.3, 0.2}});
  const EquilibriumCertificate cert = compute_equilibrium(solo, 1e-6, 3);
  CHECK(cert.accepted);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(cert.prices.prices[j] ==
          doctest::Approx(solo.valuations(0, j) * solo.budgets[0]).epsilon(1e-8));
  }
}

TEST_CASE("oracle cross-validates on sampled markets") {
  for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
    const MarketInstance market = generate_random_market(10, 10, seed);
    OracleDiagnostics diagnostics;
    const EquilibriumCertificate cert = compute_equilibrium(market, 1e-6, seed, &diagnostics);
    CHECK(cert.accepted);
    CHECK(cert.methods_agree);
    const PriceVector p_prd = compute_prices(diagnostics.prd.final_bids, market);
    for (std::size_t j = 0; j < market.m; ++j) {
      CHECK(std::abs(p_prd.prices[j] - cert.prices.prices[j]) <= 1e-6);
    }
  }
}

TEST_CASE("sampled potential never beats the oracle maximum") {
  const MarketInstance market = generate_random_market(4, 5, 2718);
  const EquilibriumCertificate cert = compute_equilibrium(market, 1e-6, 1);
  const double phi_star = potential(cert.bids, market);
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const BidProfile b = test::random_interior_bids(market, rng);
    CHECK(potential(b, market) <= phi_star + 1e-8);
  }
}

TEST_CASE("oracle failure carries partial trajectories") {
  const MarketInstance market = generate_random_market(6, 6, 5);
  OracleOptions options;
  options.max_prd_steps = 3;
  options.max_br_steps = 3;
  CHECK_THROWS_AS(compute_equilibrium(market, 1e-6, 1, nullptr, options), OracleFailureError);
  try {
    compute_equilibrium(market, 1e-6, 1, nullptr, options);
  } catch (const OracleFailureError& e) {
    REQUIRE(e.partial != nullptr);
    CHECK(e.partial->prd.steps_taken == 3);
    CHECK_FALSE(e.partial->prd.prices_converged);
  }
}

TEST_CASE("support graph and cycles") {
  const SupportGraph diag = support_graph(test::diagonal_bids_2x2());
  CHECK(diag.edges.size() == 2);
  CHECK_FALSE(find_cycle(diag).has_value());

  const SupportGraph full = support_graph(test::uniform_bids_2x2());
  CHECK(full.edges.size() == 4);
  const auto cycle = find_cycle(full);
  REQUIRE(cycle.has_value());
  CHECK(cycle->size() == 4);

  const SupportGraph empty = support_graph(BidProfile{Matrix(2, 2, 0.0)});
  CHECK(empty.edges.empty());
  CHECK_FALSE(find_cycle(empty).has_value());
}

TEST_CASE("edge count above the forest bound forces a cycle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng() % 5;
    const std::size_t m = 2 + rng() % 5;
    BidProfile b{Matrix(n, m, 0.0)};
    // Random sprinkling of positive bids.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if ((rng() & 3ull) != 0) b.bids(i, j) = 0.1 + uniform01(rng);
      }
    }
    const SupportGraph g = support_graph(b);
    if (g.edges.size() > n + m - 1) {
      CHECK(find_cycle(g).has_value());
    }
    const auto cycle = find_cycle(g);
    if (cycle.has_value()) {
      // The returned walk alternates buyers and goods and is even-length.
      CHECK(cycle->size() >= 4);
      CHECK(cycle->size() % 2 == 0);
    }
  }
}

TEST_CASE("genericity verdicts") {
  const GenericityResult symmetric = genericity_check(test::symmetric_2x2(), 4);
  CHECK(symmetric.verdict == GenericityVerdict::non_generic);
  REQUIRE_FALSE(symmetric.witness_lhs.empty());
  REQUIRE_FALSE(symmetric.witness_rhs.empty());
  // The witness sets carry equal log-valuation sums and differ as sets.
  const MarketInstance market = test::symmetric_2x2();
  double lhs = 0.0, rhs = 0.0;
  for (const auto& [i, j] : symmetric.witness_lhs) lhs += std::log(market.valuations(i, j));
  for (const auto& [i, j] : symmetric.witness_rhs) rhs += std::log(market.valuations(i, j));
  CHECK(std::abs(lhs - rhs) <= 1e-12);
  CHECK(symmetric.witness_lhs != symmetric.witness_rhs);

  MarketInstance generic;
  generic.n = 2;
  generic.m = 2;
  generic.budgets = {0.5, 0.5};
  generic.valuations = Matrix::from_rows({{0.7, 0.3}, {0.2, 0.8}});
  CHECK(genericity_check(generic, 4).verdict == GenericityVerdict::generic);

  MarketInstance unit;
  unit.n = 1;
  unit.m = 1;
  unit.budgets = {1.0};
  unit.valuations = Matrix::from_rows({{1.0}});
  CHECK(genericity_check(unit).verdict == GenericityVerdict::generic);

  // A capped search that finds nothing is inconclusive, not generic.
  const MarketInstance big = generate_random_market(5, 5, 77);
  const GenericityResult capped = genericity_check(big, 2);
  CHECK(capped.verdict == GenericityVerdict::inconclusive);
  CHECK(capped.search_truncated);

  const GenericityResult full = genericity_check(generate_random_market(3, 3, 78), 9);
  CHECK(full.verdict == GenericityVerdict::generic);
}

TEST_CASE("profile distance") {
  const BidProfile uniform = test::uniform_bids_2x2();
  const BidProfile diagonal = test::diagonal_bids_2x2();
  CHECK(distance_to_profile(uniform, uniform) == 0.0);
  CHECK(distance_to_profile(uniform, diagonal) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(distance_to_profile(uniform, diagonal) == distance_to_profile(diagonal, uniform));
  CHECK_THROWS_AS(distance_to_profile(uniform, BidProfile{Matrix(3, 3, 0.0)}),
                  InvalidInputError);
}

TEST_CASE("generic markets yield forest supports and seed-independent bids") {
  std::mt19937_64 rng(3141);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + rng() % 4;
    const std::size_t m = 3 + rng() % 4;
    const MarketInstance market = generate_random_market(n, m, rng());
    EquilibriumCertificate first;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const EquilibriumCertificate cert = compute_equilibrium(market, 1e-6, seed);
      REQUIRE(cert.accepted);
      CHECK(cert.acyclic);
      const SupportGraph g = support_graph(cert.bids);
      CHECK(g.edges.size() <= n + m - 1);
      // Average buyer degree in a forest on n + m vertices.
      CHECK(static_cast<double>(g.edges.size()) / static_cast<double>(n) <=
            1.0 + static_cast<double>(m - 1) / static_cast<double>(n) + 1e-12);
      if (seed == 1) {
        first = cert;
      } else {
        CHECK(max_abs_diff(cert.bids.bids, first.bids.bids) <= 1e-5);
      }
    }
  }
}

TEST_CASE("price uniqueness holds even for the non-generic symmetric market") {
  const MarketInstance market = test::symmetric_2x2();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const EquilibriumCertificate cert = compute_equilibrium(market, 1e-6, seed);
    REQUIRE(cert.accepted);
    CHECK(cert.prices.prices[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(cert.prices.prices[1] == doctest::Approx(0.5).epsilon(1e-6));
  }
}

TEST_CASE("walking a cyclic equilibrium support reproduces the product identity") {
  // Two identical buyers: the equilibrium set is a segment, and the profile
  // below is an equilibrium whose support is the full 4-cycle.
  MarketInstance market;
  market.n = 2;
  market.m = 2;
  market.budgets = {0.5, 0.5};
  market.valuations = Matrix::from_rows({{0.8, 0.2}, {0.8, 0.2}});
  const BidProfile cyclic{Matrix::from_rows({{0.4, 0.1}, {0.4, 0.1}})};

  const EquilibriumCertificate cert = verify_equilibrium(cyclic, market);
  CHECK(cert.accepted);
  CHECK_FALSE(cert.acyclic);
  CHECK(cert.genericity.verdict == GenericityVerdict::non_generic);

  const auto cycle = find_cycle(support_graph(cyclic));
  REQUIRE(cycle.has_value());
  REQUIRE(cycle->size() % 2 == 0);

  // Rotate so the walk starts at a buyer, then alternate buyer/good edges:
  // traversing buyer_k -> good_k -> buyer_{k+1} accumulates
  // ln a_{k+1,k} - ln a_{k,k}; around the cycle everything cancels.
  std::vector<std::size_t> walk = *cycle;
  if (walk.front() >= market.n) {
    std::rotate(walk.begin(), walk.begin() + 1, walk.end());
  }
  double cycle_sum = 0.0;
  const std::size_t len = walk.size();
  for (std::size_t k = 0; k < len; k += 2) {
    const std::size_t buyer = walk[k];
    const std::size_t good = walk[(k + 1) % len] - market.n;
    const std::size_t next_buyer = walk[(k + 2) % len];
    cycle_sum += std::log(market.valuations(next_buyer, good)) -
                 std::log(market.valuations(buyer, good));
  }
  CHECK(std::abs(cycle_sum) <= 1e-9);
}
