#include "fpr/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "fpr/errors.hpp"
#include "fpr/potential.hpp"
#include "fpr/rng.hpp"

namespace fpr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double Residuals::max() const { return std::max(clearing, std::max(budget, optimality)); }

namespace {

// Clearing, budget, and bang-per-buck residuals of a profile: no good may
// beat u_i/B_i, and every good the buyer actually spends on must attain it.
Residuals compute_residuals(const BidProfile& b, const MarketInstance& market,
                            const PriceVector& p, const Allocation& x,
                            const std::vector<double>& utilities) {
  Residuals residuals;
  for (std::size_t j = 0; j < market.m; ++j) {
    if (p.prices[j] <= 0.0) continue;
    double column = 0.0;
    for (std::size_t i = 0; i < market.n; ++i) column += x.shares(i, j);
    residuals.clearing = std::max(residuals.clearing, std::abs(column - 1.0));
  }

  for (std::size_t i = 0; i < market.n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < market.m; ++j) row_sum += b.bids(i, j);
    residuals.budget = std::max(residuals.budget, std::abs(row_sum - market.budgets[i]));
  }

  for (std::size_t i = 0; i < market.n; ++i) {
    const double rate = utilities[i] / market.budgets[i];
    for (std::size_t j = 0; j < market.m; ++j) {
      const double a = market.valuations(i, j);
      const double price = p.prices[j];
      double bpb = 0.0;
      if (price > 0.0) {
        bpb = a / price;
      } else if (a > 0.0) {
        bpb = kInf;  // a valued good nobody pays for: unbounded opportunity
      }
      residuals.optimality = std::max(residuals.optimality, bpb - rate);
      if (b.bids(i, j) > kSupportThreshold) {
        residuals.optimality = std::max(residuals.optimality, std::abs(bpb - rate));
      }
    }
  }
  return residuals;
}

}  // namespace

EquilibriumCertificate verify_equilibrium(const BidProfile& b, const MarketInstance& market,
                                          double tol) {
  if (b.bids.rows() != market.n || b.bids.cols() != market.m) {
    throw InvalidInputError("verify_equilibrium: bid matrix shape does not match the market");
  }
  if (!(tol > 0.0)) throw InvalidInputError("verify_equilibrium: tolerance must be > 0");

  EquilibriumCertificate cert;
  cert.tolerance = tol;
  cert.bids = b;
  cert.prices = compute_prices(b, market);
  const Allocation x = allocate(b, cert.prices, market);
  cert.utilities = buyer_utilities(x, market);
  cert.residuals = compute_residuals(b, market, cert.prices, x, cert.utilities);
  cert.acyclic = !find_cycle(support_graph(b)).has_value();
  cert.accepted = cert.residuals.clearing <= tol && cert.residuals.budget <= tol &&
                  cert.residuals.optimality <= tol;
  cert.genericity = genericity_check(market);
  return cert;
}

namespace {

// Synchronous proportional response, stopped when per-step price movement
// falls to price_tol. Bids may still be crawling along a price-flat direction
// at that point; prices are the quantity this route certifies.
Trajectory run_sync_prd_until_prices_stable(const MarketInstance& market, const BidProfile& b0,
                                            double price_tol, std::size_t max_steps,
                                            std::size_t record_every) {
  std::vector<std::size_t> everyone(market.n);
  for (std::size_t i = 0; i < market.n; ++i) everyone[i] = i;

  Trajectory trajectory;
  BidProfile current{b0.bids};
  PriceVector prices = compute_prices(current, market);

  auto record = [&](std::size_t t) {
    TrajectoryPoint point;
    point.t = t;
    const PriceVector p = compute_prices(current, market);
    const Allocation x = allocate(current, p, market);
    point.prices = p.prices;
    point.potential = potential(current, market);
    point.utilities = buyer_utilities(x, market);
    point.nsw = nash_social_welfare(x, market).value;
    trajectory.points.push_back(std::move(point));
  };

  record(0);
  std::size_t completed = 0;
  for (std::size_t t = 0; t < max_steps; ++t) {
    current = prd_step(current, everyone, market);
    const PriceVector next_prices = compute_prices(current, market);
    double price_delta = 0.0;
    for (std::size_t j = 0; j < market.m; ++j) {
      price_delta = std::max(price_delta, std::abs(next_prices.prices[j] - prices.prices[j]));
    }
    prices = next_prices;
    completed = t + 1;
    trajectory.final_price_window_change = price_delta;
    if (completed % record_every == 0) record(completed);
    if (price_delta <= price_tol) {
      trajectory.prices_converged = true;
      break;
    }
  }
  if (trajectory.points.back().t != completed) record(completed);
  trajectory.steps_taken = completed;
  trajectory.final_bids = std::move(current);
  return trajectory;
}

}  // namespace

EquilibriumCertificate compute_equilibrium(const MarketInstance& market, double tol,
                                           std::uint64_t seed, OracleDiagnostics* diagnostics,
                                           const OracleOptions& options) {
  if (!(tol > 0.0)) throw InvalidInputError("compute_equilibrium: tolerance must be > 0");
  const ValidationReport report = validate_market(market);
  if (!report.ok()) {
    throw InvalidInputError("compute_equilibrium: invalid market: " + report.violations.front());
  }

  const BidProfile b0 = default_initial_bids(market);

  // Route one: synchronous proportional response until prices stabilize.
  Trajectory prd_run = run_sync_prd_until_prices_stable(
      market, b0, std::min(tol / 10.0, options.prd_price_tolerance), options.max_prd_steps,
      options.record_every);

  // Route two: sequential best response over a seeded buyer permutation,
  // repeated cyclically. Different seeds follow different activation orders.
  ActivationSchedule sequential;
  sequential.n_buyers = market.n;
  sequential.liveness_T = market.n;
  sequential.cyclic = true;
  {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> perm(market.n);
    for (std::size_t i = 0; i < market.n; ++i) perm[i] = i;
    for (std::size_t k = market.n; k > 1; --k) {
      const std::size_t r = static_cast<std::size_t>(uniform_index(rng, k));
      std::swap(perm[k - 1], perm[r]);
    }
    for (const std::size_t i : perm) sequential.steps.push_back({i});
  }
  DynamicsConfig br_config;
  br_config.rule = UpdateRule::best_response;
  br_config.max_steps = options.max_br_steps;
  br_config.tolerance = std::min(tol / 10.0, options.br_bid_tolerance);
  br_config.record_every = options.record_every;
  Trajectory br_run = run_dynamics(market, b0, sequential, br_config);

  if (!prd_run.prices_converged || !br_run.converged) {
    throw OracleFailureError(
        std::string("compute_equilibrium: no convergence within the step budget (") +
            (prd_run.prices_converged ? "best-response" : "proportional-response") + " route)",
        std::move(prd_run), std::move(br_run));
  }

  const PriceVector p_prd = compute_prices(prd_run.final_bids, market);
  const PriceVector p_br = compute_prices(br_run.final_bids, market);
  double price_gap = 0.0;
  for (std::size_t j = 0; j < market.m; ++j) {
    price_gap = std::max(price_gap, std::abs(p_prd.prices[j] - p_br.prices[j]));
  }
  const bool methods_agree = price_gap <= tol;

  // The proportional-response endpoint cross-validates prices and must be a
  // clean trading-post outcome; the full bang-per-buck check falls on the
  // canonical best-response endpoint, whose supports are exact.
  const Allocation x_prd = allocate(prd_run.final_bids, p_prd, market);
  const Residuals prd_residuals = compute_residuals(
      prd_run.final_bids, market, p_prd, x_prd, buyer_utilities(x_prd, market));
  const bool prd_clean = prd_residuals.clearing <= tol && prd_residuals.budget <= tol;

  EquilibriumCertificate cert = verify_equilibrium(br_run.final_bids, market, tol);
  cert.methods_agree = methods_agree;
  cert.accepted = cert.accepted && prd_clean && methods_agree;

  if (diagnostics != nullptr) {
    diagnostics->prd = std::move(prd_run);
    diagnostics->br = std::move(br_run);
  }
  return cert;
}

SupportGraph support_graph(const BidProfile& b, double threshold) {
  if (threshold < 0.0) throw InvalidInputError("support_graph: threshold must be >= 0");
  SupportGraph g;
  g.n = b.bids.rows();
  g.m = b.bids.cols();
  for (std::size_t i = 0; i < g.n; ++i) {
    for (std::size_t j = 0; j < g.m; ++j) {
      if (b.bids(i, j) > threshold) g.edges.emplace_back(i, j);
    }
  }
  return g;
}

std::optional<std::vector<std::size_t>> find_cycle(const SupportGraph& g) {
  const std::size_t vertices = g.n + g.m;
  std::vector<std::vector<std::size_t>> adjacency(vertices);
  for (const auto& [i, j] : g.edges) {
    if (i >= g.n || j >= g.m) throw InvalidInputError("find_cycle: edge endpoint out of range");
    adjacency[i].push_back(g.n + j);
    adjacency[g.n + j].push_back(i);
  }

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<bool> visited(vertices, false);
  std::vector<std::size_t> parent(vertices, kNone);

  for (std::size_t root = 0; root < vertices; ++root) {
    if (visited[root]) continue;
    // Iterative DFS; a back edge to a visited non-parent closes a cycle.
    std::vector<std::pair<std::size_t, std::size_t>> stack;  // (vertex, next edge index)
    visited[root] = true;
    stack.emplace_back(root, 0);
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next >= adjacency[v].size()) {
        stack.pop_back();
        continue;
      }
      const std::size_t w = adjacency[v][next++];
      if (w == parent[v]) continue;
      if (visited[w]) {
        // Walk parents from v back to w; w is an ancestor of v.
        std::vector<std::size_t> cycle;
        std::size_t cur = v;
        while (cur != w && cur != kNone) {
          cycle.push_back(cur);
          cur = parent[cur];
        }
        cycle.push_back(w);
        std::reverse(cycle.begin(), cycle.end());
        return cycle;
      }
      visited[w] = true;
      parent[w] = v;
      stack.emplace_back(w, 0);
    }
  }
  return std::nullopt;
}

namespace {

// Subsets are identified by a 64-bit code: a plain bitmask when there are at
// most 64 positive entries (any subset size), otherwise up to six entry
// indices packed 10 bits each with 1023 as the empty-slot marker.
constexpr std::size_t kMaxPackedEntries = 1023;
constexpr std::size_t kMaxPackedSize = 6;

std::uint64_t encode_subset(std::span<const std::uint32_t> subset, bool bitmask) {
  std::uint64_t code = 0;
  if (bitmask) {
    for (const std::uint32_t e : subset) code |= std::uint64_t{1} << e;
    return code;
  }
  for (std::size_t k = 0; k < kMaxPackedSize; ++k) {
    const std::uint64_t slot = k < subset.size() ? subset[k] : kMaxPackedEntries;
    code |= slot << (10 * k);
  }
  return code;
}

EntrySet decode_subset(std::uint64_t code, const EntrySet& entries, bool bitmask) {
  EntrySet out;
  if (bitmask) {
    for (std::size_t e = 0; e < entries.size(); ++e) {
      if (code & (std::uint64_t{1} << e)) out.push_back(entries[e]);
    }
    return out;
  }
  for (std::size_t k = 0; k < kMaxPackedSize; ++k) {
    const std::uint64_t slot = (code >> (10 * k)) & 0x3ffull;
    if (slot == kMaxPackedEntries) break;
    out.push_back(entries[slot]);
  }
  return out;
}

double binomial_cumulative(std::size_t n, std::size_t max_k, double cap) {
  double total = 0.0;
  double term = 1.0;
  for (std::size_t k = 1; k <= max_k; ++k) {
    term = term * static_cast<double>(n - k + 1) / static_cast<double>(k);
    total += term;
    if (total > cap) return total;
  }
  return total;
}

}  // namespace

GenericityResult genericity_check(const MarketInstance& market, std::size_t max_subset_size) {
  GenericityResult result;
  if (max_subset_size == 0) {
    result.verdict = GenericityVerdict::inconclusive;
    result.search_truncated = true;
    return result;
  }

  EntrySet entries;
  std::vector<double> logs;
  for (std::size_t i = 0; i < market.n; ++i) {
    for (std::size_t j = 0; j < market.m; ++j) {
      const double a = market.valuations(i, j);
      if (a > 0.0) {
        entries.emplace_back(i, j);
        logs.push_back(std::log(a));
      }
    }
  }
  const std::size_t count = entries.size();
  if (count > kMaxPackedEntries) {
    result.verdict = GenericityVerdict::inconclusive;
    result.search_truncated = true;
    return result;
  }
  const bool bitmask = count <= 64;

  // The exact condition is exponential; keep the enumeration bounded and
  // report a truncated search honestly.
  std::size_t cap = std::min(max_subset_size, count);
  if (!bitmask) cap = std::min(cap, kMaxPackedSize);
  constexpr double kEnumerationBudget = double(1u << 21);
  while (cap > 1 && binomial_cumulative(count, cap, kEnumerationBudget) > kEnumerationBudget) {
    --cap;
  }
  result.search_truncated = cap < count;

  std::vector<std::pair<double, std::uint64_t>> sums;
  std::vector<std::uint32_t> subset;
  // Lexicographic enumeration of all subsets with size <= cap.
  auto enumerate = [&](auto&& self, std::size_t first, double acc) -> void {
    for (std::size_t e = first; e < count; ++e) {
      subset.push_back(static_cast<std::uint32_t>(e));
      const double total = acc + logs[e];
      sums.emplace_back(total, encode_subset(subset, bitmask));
      if (subset.size() < cap) self(self, e + 1, total);
      subset.pop_back();
    }
  };
  enumerate(enumerate, 0, 0.0);

  std::sort(sums.begin(), sums.end());
  for (std::size_t k = 1; k < sums.size(); ++k) {
    if (std::abs(sums[k].first - sums[k - 1].first) <= 1e-12 &&
        sums[k].second != sums[k - 1].second) {
      result.verdict = GenericityVerdict::non_generic;
      result.witness_lhs = decode_subset(sums[k - 1].second, entries, bitmask);
      result.witness_rhs = decode_subset(sums[k].second, entries, bitmask);
      return result;
    }
  }
  result.verdict =
      result.search_truncated ? GenericityVerdict::inconclusive : GenericityVerdict::generic;
  return result;
}

double distance_to_profile(const BidProfile& b, const BidProfile& b_star) {
  return frobenius_distance(b.bids, b_star.bids);
}

}  // namespace fpr
