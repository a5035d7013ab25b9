#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "fpr/dynamics.hpp"
#include "fpr/errors.hpp"
#include "fpr/market.hpp"

namespace fpr {

// Bids at or below this level are treated as numerically dead: dynamics
// approach boundary equilibria but never land on them in finite time.
inline constexpr double kSupportThreshold = 1e-8;

struct Residuals {
  double clearing = 0.0;    // max_j |sum_i x_ij - 1| over priced goods
  double budget = 0.0;      // max_i |sum_j b_ij - B_i|
  double optimality = 0.0;  // bang-per-buck conditions, see verify_equilibrium
  double max() const;
};

enum class GenericityVerdict { generic, non_generic, inconclusive };

using EntrySet = std::vector<std::pair<std::size_t, std::size_t>>;

struct GenericityResult {
  GenericityVerdict verdict = GenericityVerdict::inconclusive;
  // Two distinct entry subsets with equal log-valuation sums, when found.
  EntrySet witness_lhs;
  EntrySet witness_rhs;
  bool search_truncated = false;
};

// Bipartite buyer/good graph of the positive bids.
struct SupportGraph {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (buyer, good)
};

struct EquilibriumCertificate {
  BidProfile bids;
  PriceVector prices;
  std::vector<double> utilities;
  Residuals residuals;
  bool acyclic = false;
  // Cross-check between the two oracle dynamics. Single-profile verification
  // has nothing to compare, so it reports true; compute_equilibrium overwrites
  // it with the actual price agreement.
  bool methods_agree = true;
  bool accepted = false;
  double tolerance = 1e-6;
  GenericityResult genericity;
};

struct OracleDiagnostics {
  Trajectory prd;
  Trajectory br;
};

struct OracleFailureError : Error {
  OracleFailureError(const std::string& msg, Trajectory prd_partial, Trajectory br_partial)
      : Error(msg),
        partial(std::make_shared<OracleDiagnostics>(
            OracleDiagnostics{std::move(prd_partial), std::move(br_partial)})) {}
  // shared_ptr keeps the exception copyable as required.
  std::shared_ptr<OracleDiagnostics> partial;
};

struct OracleOptions {
  std::size_t max_prd_steps = 500000;
  std::size_t max_br_steps = 1000000;
  std::size_t record_every = 1000;
  // The proportional-response route stops once per-step price movement falls
  // to this level; prices are the quantity it cross-validates and the one
  // that converges even when bids crawl along a price-flat valley.
  double prd_price_tolerance = 1e-12;
  // Bid-change window tolerance for the best-response route, which reaches
  // exact supports and settles in bid space.
  double br_bid_tolerance = 1e-12;
};

// Checks the equilibrium conditions on a bid profile. Residuals:
//   clearing   = max_j |sum_i x_ij - 1| over goods with p_j > 0,
//   budget     = max_i |sum_j b_ij - B_i|,
//   optimality = max over all (i,j) of (a_ij/p_j - u_i/B_i)^+ and, over
//                entries with b_ij above the support threshold, of
//                |a_ij/p_j - u_i/B_i|.
// Verdicts are the output; invalid profiles are rejected, not thrown.
EquilibriumCertificate verify_equilibrium(const BidProfile& b, const MarketInstance& market,
                                          double tol = 1e-6);

// Cross-validated oracle. Runs two dynamics independently from uniform
// initial bids: synchronous proportional response until prices stabilize, and
// a seeded sequential best-response pass until bids stabilize. Accepts iff
// the best-response endpoint passes the full Definition-style verification at
// tol, the proportional-response endpoint satisfies clearing and budget
// residuals at tol, and the two endpoints agree in prices within tol
// (methods_agree). The best-response endpoint is the canonical certificate.
// Non-convergence within the step budgets throws OracleFailureError carrying
// both partial trajectories.
EquilibriumCertificate compute_equilibrium(const MarketInstance& market, double tol,
                                           std::uint64_t seed,
                                           OracleDiagnostics* diagnostics = nullptr,
                                           const OracleOptions& options = {});

SupportGraph support_graph(const BidProfile& b, double threshold = kSupportThreshold);

// One cycle as a vertex list if any exists, else nullopt. Buyers are vertices
// [0, n), goods are [n, n+m). Deterministic given the edge order.
std::optional<std::vector<std::size_t>> find_cycle(const SupportGraph& g);

// Searches for two distinct nonempty subsets of positive valuation entries
// with equal products (compared as log sums within 1e-12). Subset sizes are
// capped by max_subset_size and by an internal enumeration budget; a capped
// search that finds no witness is inconclusive.
GenericityResult genericity_check(const MarketInstance& market, std::size_t max_subset_size = 6);

// Entrywise Euclidean distance between two bid profiles.
double distance_to_profile(const BidProfile& b, const BidProfile& b_star);

}  // namespace fpr
