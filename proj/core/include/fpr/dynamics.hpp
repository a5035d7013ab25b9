#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fpr/market.hpp"

namespace fpr {

// The adversary's activation sequence: one buyer subset per step. When
// liveness_T is set, every buyer appears in every window of liveness_T
// consecutive steps. A cyclic schedule repeats its steps until the runner's
// step budget; it exists so long periodic runs need not materialize every
// step (in-memory only, not part of the file format).
struct ActivationSchedule {
  std::size_t n_buyers = 0;
  std::vector<std::vector<std::size_t>> steps;
  std::optional<std::size_t> liveness_T;
  bool cyclic = false;
};

enum class UpdateRule { proportional_response, best_response };

struct DynamicsConfig {
  UpdateRule rule = UpdateRule::proportional_response;
  std::size_t max_steps = 100000;
  // Max-norm bid change over one full liveness window; per-step change can be
  // zero for inactive buyers, a window covers everyone.
  double tolerance = 1e-9;
  std::size_t record_every = 100;
  bool record_bids = false;
};

struct TrajectoryPoint {
  std::size_t t = 0;
  std::vector<double> prices;
  double potential = 0.0;
  double nsw = 0.0;
  std::vector<double> utilities;
  // Frobenius distance to the reference profile, NaN when none was given.
  double distance = std::numeric_limits<double>::quiet_NaN();
  std::optional<Matrix> bids;
};

// Bid-space and price-space convergence are reported separately: prices are
// unique at equilibrium and can settle while bids still wander inside a flat
// equilibrium set, so a stopped run is not read as bid-point convergence.
struct Trajectory {
  std::vector<TrajectoryPoint> points;
  bool converged = false;         // bid change over a liveness window reached the tolerance
  bool prices_converged = false;  // price change over the same window reached it
  double final_bid_window_change = 0.0;
  double final_price_window_change = 0.0;
  std::size_t steps_taken = 0;
  BidProfile final_bids;
};

// Proportional response applied to the rows in v against the pre-step prices;
// rows outside v are unchanged. Each updated row is rescaled to sum exactly
// B_i (a mathematical no-op that stops drift over long runs).
BidProfile prd_step(const BidProfile& b, std::span<const std::size_t> v,
                    const MarketInstance& market);

// The unique maximizer of the associated utility of buyer i against fixed
// b_{-i}, with the water-filling structure b*_ij = (a_ij / c* - theta_ij)^+.
struct BestResponse {
  std::vector<double> bids;
  double c_star = 0.0;
  std::vector<std::size_t> support;  // goods with positive best-response bids
};

BestResponse best_response_detail(std::size_t i, const BidProfile& b,
                                  const MarketInstance& market);
std::vector<double> best_response(std::size_t i, const BidProfile& b,
                                  const MarketInstance& market);

// Replaces row i with its best response; other rows unchanged.
BidProfile br_step(const BidProfile& b, std::size_t i, const MarketInstance& market);

// v^t = {t mod n}; liveness_T = n.
ActivationSchedule make_round_robin_schedule(std::size_t n, std::size_t steps);

// Uniformly random nonempty subsets, post-processed so a buyer absent for
// T-1 consecutive steps is force-included at the T-th. Deterministic given
// the seed. T = 1 therefore activates everyone at every step.
ActivationSchedule make_random_subset_schedule(std::size_t n, std::size_t steps,
                                               std::size_t T, std::uint64_t seed);

// Singleton steps; each consecutive block of n steps is a seeded random
// permutation of the buyers, so liveness holds with T = 2n - 1.
ActivationSchedule make_shuffled_sequential_schedule(std::size_t n, std::size_t steps,
                                                     std::uint64_t seed);

// True iff every buyer appears in every window of T consecutive steps.
// Windows truncated by the end of the schedule are exempt.
bool validate_liveness(const ActivationSchedule& s, std::size_t T);

// b_ij = B_i / |{j : a_ij > 0}| on the valued goods, 0 elsewhere.
BidProfile default_initial_bids(const MarketInstance& market);

// Runs the configured update along the schedule, stopping at max_steps or
// when the max-norm bid change over a full liveness window drops to the
// tolerance. The best-response rule requires singleton subsets. b0 must be
// positive wherever a_ij > 0. When reference is given, recorded points carry
// the distance to it.
Trajectory run_dynamics(const MarketInstance& market, const BidProfile& b0,
                        const ActivationSchedule& schedule, const DynamicsConfig& config,
                        const BidProfile* reference = nullptr);

}  // namespace fpr
