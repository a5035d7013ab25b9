#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "fpr/equilibrium.hpp"
#include "fpr/errors.hpp"
#include "fpr/io.hpp"
#include "test_support.hpp"

using namespace fpr;

TEST_CASE("market json round trip is lossless") {
  const MarketInstance market = generate_random_market(4, 7, 99);
  const MarketInstance back = market_from_json(market_to_json(market));
  CHECK(back.n == market.n);
  CHECK(back.m == market.m);
  CHECK(back.budgets == market.budgets);
  CHECK(back.valuations == market.valuations);
}

TEST_CASE("market json rejects malformed input") {
  CHECK_THROWS_AS(market_from_json("not json"), InvalidInputError);
  CHECK_THROWS_AS(market_from_json("{\"n\": 2}"), InvalidInputError);
  CHECK_THROWS_AS(
      market_from_json(
          "{\"n\": 2, \"m\": 2, \"budgets\": [1.0], \"valuations\": [[0.5,0.5],[0.5,0.5]]}"),
      InvalidInputError);
}

TEST_CASE("bids json round trip") {
  const BidProfile b = test::uniform_bids_2x2();
  const BidProfile back = bids_from_json(bids_to_json(b));
  CHECK(back.bids == b.bids);
  // A bare matrix is accepted too.
  const BidProfile bare = bids_from_json("[[0.25, 0.25], [0.25, 0.25]]");
  CHECK(bare.bids == b.bids);
}

TEST_CASE("schedule json forms") {
  ActivationSchedule s;
  s.n_buyers = 3;
  s.steps = {{0}, {1, 2}, {2}};
  s.liveness_T = 3;
  const ActivationSchedule back = schedule_from_json(schedule_to_json(s));
  CHECK(back.steps == s.steps);
  CHECK(back.liveness_T == s.liveness_T);
  CHECK(back.n_buyers == 3);

  const ActivationSchedule bare = schedule_from_json("[[0], [1], [0, 1]]");
  CHECK(bare.steps.size() == 3);
  CHECK_FALSE(bare.liveness_T.has_value());
  CHECK(bare.n_buyers == 2);

  s.liveness_T.reset();
  const std::string text = schedule_to_json(s);
  CHECK(text.front() == '[');  // bare array when no liveness bound is known
}

TEST_CASE("certificate json round trip") {
  const MarketInstance market = test::symmetric_2x2();
  const EquilibriumCertificate cert = verify_equilibrium(test::diagonal_bids_2x2(), market);
  const EquilibriumCertificate back = certificate_from_json(certificate_to_json(cert));
  CHECK(back.prices.prices == cert.prices.prices);
  CHECK(back.utilities == cert.utilities);
  CHECK(back.residuals.clearing == cert.residuals.clearing);
  CHECK(back.residuals.budget == cert.residuals.budget);
  CHECK(back.residuals.optimality == cert.residuals.optimality);
  CHECK(back.acyclic == cert.acyclic);
  CHECK(back.methods_agree == cert.methods_agree);
  CHECK(back.accepted == cert.accepted);
  CHECK(back.genericity.verdict == cert.genericity.verdict);
  CHECK(back.bids.bids == cert.bids.bids);
}

TEST_CASE("real formatting survives parsing") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 1000; ++k) {
    double x = (uniform01(rng) - 0.5) * std::pow(10.0, static_cast<double>(rng() % 40) - 20.0);
    const std::string text = format_real(x);
    CHECK(std::strtod(text.c_str(), nullptr) == x);
  }
  CHECK(format_real(0.0) == "0");
  const double nan_back = std::strtod(format_real(std::nan("")).c_str(), nullptr);
  CHECK(std::isnan(nan_back));
}

TEST_CASE("trajectory csv format and round trip") {
  const MarketInstance market = test::symmetric_2x2();
  const ActivationSchedule schedule = make_round_robin_schedule(2, 200);
  DynamicsConfig config;
  config.max_steps = 200;
  config.tolerance = 1e-12;
  config.record_every = 10;
  const BidProfile reference = test::diagonal_bids_2x2();
  const Trajectory trajectory =
      run_dynamics(market, test::uniform_bids_2x2(), schedule, config, &reference);

  test::TempDir dir("io");
  const auto path = dir.path / "traj.csv";
  write_trajectory_csv(path, trajectory, market.m);

  const CsvTable table = read_csv(path);
  REQUIRE(table.header.size() == 6);
  CHECK(table.header[0] == "t");
  CHECK(table.header[1] == "potential");
  CHECK(table.header[2] == "nsw");
  CHECK(table.header[3] == "distance");
  CHECK(table.header[4] == "price_0");
  CHECK(table.header[5] == "price_1");
  REQUIRE(table.rows.size() == trajectory.points.size());
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const TrajectoryPoint& point = trajectory.points[k];
    CHECK(table.rows[k][0] == static_cast<double>(point.t));
    CHECK(table.rows[k][1] == point.potential);
    CHECK(table.rows[k][2] == point.nsw);
    CHECK(table.rows[k][3] == point.distance);
    CHECK(table.rows[k][4] == point.prices[0]);
    CHECK(table.rows[k][5] == point.prices[1]);
  }

  // Without a reference the distance column is NaN but still parses.
  const Trajectory bare = run_dynamics(market, test::uniform_bids_2x2(), schedule, config);
  write_trajectory_csv(path, bare, market.m);
  const CsvTable table2 = read_csv(path);
  CHECK(std::isnan(table2.rows[0][3]));
}

TEST_CASE("csv writer round trips through its reader") {
  test::TempDir dir("csv");
  CsvTable table;
  table.header = {"a", "b"};
  std::mt19937_64 rng(8);
  for (int r = 0; r < 50; ++r) {
    table.rows.push_back({uniform01(rng) * 1e17, -uniform01(rng) * 1e-13});
  }
  const auto path = dir.path / "table.csv";
  write_csv(path, table);
  const CsvTable back = read_csv(path);
  CHECK(back.header == table.header);
  CHECK(back.rows == table.rows);
}

TEST_CASE("file helpers") {
  test::TempDir dir("files");
  const MarketInstance market = generate_random_market(3, 3, 5);
  write_market(dir.path / "m.json", market);
  const MarketInstance back = read_market(dir.path / "m.json");
  CHECK(back.valuations == market.valuations);
  CHECK_THROWS_AS(read_market(dir.path / "missing.json"), InvalidInputError);
}
