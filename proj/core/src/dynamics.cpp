#include "fpr/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fpr/errors.hpp"
#include "fpr/potential.hpp"
#include "fpr/rng.hpp"

namespace fpr {

namespace {

// Writes the proportional response of row i against the given prices into
// `out`. Returns the max-norm change against the current row.
double prd_row_update(const BidProfile& b, std::size_t i, const PriceVector& p,
                      const MarketInstance& market, std::span<double> out) {
  const std::size_t m = market.m;
  double utility = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double bid = b.bids(i, j);
    if (bid > 0.0) {
      utility += market.valuations(i, j) * (bid / p.prices[j]);
    }
  }
  if (!(utility > 0.0)) {
    throw DegenerateStateError("prd_step: activated buyer " + std::to_string(i) +
                               " has zero utility");
  }
  const double budget = market.budgets[i];
  double sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double bid = b.bids(i, j);
    double next = 0.0;
    if (bid > 0.0) {
      const double share = bid / p.prices[j];
      next = market.valuations(i, j) * share * budget / utility;
    }
    out[j] = next;
    sum += next;
  }
  // Rescale to sum exactly B_i; mathematically the row already does, this
  // only removes accumulated rounding drift.
  const double scale = budget / sum;
  double delta = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    out[j] *= scale;
    delta = std::max(delta, std::abs(out[j] - b.bids(i, j)));
  }
  return delta;
}

void check_subset(std::span<const std::size_t> v, std::size_t n, const char* where) {
  for (const std::size_t i : v) {
    if (i >= n) {
      throw InvalidInputError(std::string(where) + ": buyer index " + std::to_string(i) +
                              " out of range");
    }
  }
}

}  // namespace

BidProfile prd_step(const BidProfile& b, std::span<const std::size_t> v,
                    const MarketInstance& market) {
  if (b.bids.rows() != market.n || b.bids.cols() != market.m) {
    throw InvalidInputError("prd_step: bid matrix shape does not match the market");
  }
  check_subset(v, market.n, "prd_step");
  BidProfile next{b.bids};
  if (v.empty()) return next;
  const PriceVector p = compute_prices(b, market);
  // All members of v respond to the same pre-step prices.
  for (const std::size_t i : v) {
    prd_row_update(b, i, p, market, next.bids.row(i));
  }
  return next;
}

BestResponse best_response_detail(std::size_t i, const BidProfile& b,
                                  const MarketInstance& market) {
  if (i >= market.n) throw InvalidInputError("best_response: buyer index out of range");
  if (b.bids.rows() != market.n || b.bids.cols() != market.m) {
    throw InvalidInputError("best_response: bid matrix shape does not match the market");
  }
  const std::size_t m = market.m;
  const double budget = market.budgets[i];

  // Pre-prices: everyone's bids except buyer i's.
  std::vector<double> theta(m, 0.0);
  for (std::size_t k = 0; k < market.n; ++k) {
    if (k == i) continue;
    const auto row = b.bids.row(k);
    for (std::size_t j = 0; j < m; ++j) theta[j] += row[j];
  }

  // Candidate goods sorted by a/theta descending; uncontested goods
  // (theta = 0) form a prefix sorted by a descending. Ties break on the
  // good index.
  std::vector<std::size_t> order;
  order.reserve(m);
  std::vector<std::size_t> free_goods;
  for (std::size_t j = 0; j < m; ++j) {
    const double a = market.valuations(i, j);
    if (a <= 0.0) continue;
    if (theta[j] <= 0.0) {
      free_goods.push_back(j);
    } else {
      order.push_back(j);
    }
  }
  if (free_goods.empty() && order.empty()) {
    throw InvalidInputError("best_response: buyer values no good");
  }
  std::sort(free_goods.begin(), free_goods.end(), [&](std::size_t x, std::size_t y) {
    const double ax = market.valuations(i, x);
    const double ay = market.valuations(i, y);
    if (ax != ay) return ax > ay;
    return x < y;
  });
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const double rx = market.valuations(i, x) / theta[x];
    const double ry = market.valuations(i, y) / theta[y];
    if (rx != ry) return rx > ry;
    return x < y;
  });
  order.insert(order.begin(), free_goods.begin(), free_goods.end());

  // Prefix scan of c_s = (sum_s a) / (B_i + sum_s theta); c* is the maximum.
  double a_acc = 0.0;
  double theta_acc = 0.0;
  double c_star = 0.0;
  for (const std::size_t j : order) {
    a_acc += market.valuations(i, j);
    theta_acc += theta[j];
    const double c_s = a_acc / (theta_acc + budget);
    if (c_s > c_star) c_star = c_s;
  }

  BestResponse out;
  out.c_star = c_star;
  out.bids.assign(m, 0.0);
  for (const std::size_t j : order) {
    const double bid = market.valuations(i, j) / c_star - theta[j];
    if (bid > 0.0) {
      out.bids[j] = bid;
      out.support.push_back(j);
    }
  }
  std::sort(out.support.begin(), out.support.end());
  return out;
}

std::vector<double> best_response(std::size_t i, const BidProfile& b,
                                  const MarketInstance& market) {
  return best_response_detail(i, b, market).bids;
}

BidProfile br_step(const BidProfile& b, std::size_t i, const MarketInstance& market) {
  BestResponse response = best_response_detail(i, b, market);
  BidProfile next{b.bids};
  auto row = next.bids.row(i);
  for (std::size_t j = 0; j < market.m; ++j) row[j] = response.bids[j];
  return next;
}

ActivationSchedule make_round_robin_schedule(std::size_t n, std::size_t steps) {
  if (n == 0) throw InvalidInputError("make_round_robin_schedule: n must be >= 1");
  ActivationSchedule s;
  s.n_buyers = n;
  s.liveness_T = n;
  s.steps.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) s.steps.push_back({t % n});
  return s;
}

ActivationSchedule make_random_subset_schedule(std::size_t n, std::size_t steps, std::size_t T,
                                               std::uint64_t seed) {
  if (n == 0) throw InvalidInputError("make_random_subset_schedule: n must be >= 1");
  if (T == 0) throw InvalidInputError("make_random_subset_schedule: T must be >= 1");
  std::mt19937_64 rng(seed);
  ActivationSchedule s;
  s.n_buyers = n;
  s.liveness_T = T;
  s.steps.reserve(steps);
  std::vector<bool> member(n);
  // last_seen starts at -1 so the first liveness window is enforced too.
  std::vector<std::ptrdiff_t> last_seen(n, -1);
  for (std::size_t t = 0; t < steps; ++t) {
    bool any = false;
    while (!any) {
      for (std::size_t i = 0; i < n; ++i) {
        member[i] = (rng() & 1ull) != 0;
        any = any || member[i];
      }
    }
    // Force-include anyone starved for T-1 consecutive steps.
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::ptrdiff_t>(t) - last_seen[i] >= static_cast<std::ptrdiff_t>(T)) {
        member[i] = true;
      }
    }
    std::vector<std::size_t> subset;
    for (std::size_t i = 0; i < n; ++i) {
      if (member[i]) {
        subset.push_back(i);
        last_seen[i] = static_cast<std::ptrdiff_t>(t);
      }
    }
    s.steps.push_back(std::move(subset));
  }
  return s;
}

ActivationSchedule make_shuffled_sequential_schedule(std::size_t n, std::size_t steps,
                                                     std::uint64_t seed) {
  if (n == 0) throw InvalidInputError("make_shuffled_sequential_schedule: n must be >= 1");
  std::mt19937_64 rng(seed);
  ActivationSchedule s;
  s.n_buyers = n;
  s.liveness_T = n > 1 ? 2 * n - 1 : 1;
  s.steps.reserve(steps);
  std::vector<std::size_t> block(n);
  std::iota(block.begin(), block.end(), std::size_t{0});
  std::size_t pos = n;  // trigger a shuffle on first use
  for (std::size_t t = 0; t < steps; ++t) {
    if (pos == n) {
      // Fisher-Yates with the portable index helper.
      for (std::size_t k = n; k > 1; --k) {
        const std::size_t r = static_cast<std::size_t>(uniform_index(rng, k));
        std::swap(block[k - 1], block[r]);
      }
      pos = 0;
    }
    s.steps.push_back({block[pos++]});
  }
  return s;
}

bool validate_liveness(const ActivationSchedule& s, std::size_t T) {
  if (T == 0) throw InvalidInputError("validate_liveness: T must be >= 1");
  const std::size_t n = s.n_buyers;
  const std::size_t len = s.steps.size();
  // A buyer fails iff some gap between consecutive activations exceeds T,
  // with virtual activations at -1 and len; trailing windows cut off by the
  // schedule end are exempt, which the virtual end activation encodes.
  std::vector<std::ptrdiff_t> last_seen(n, -1);
  for (std::size_t t = 0; t < len; ++t) {
    for (const std::size_t i : s.steps[t]) {
      if (i >= n) throw InvalidInputError("validate_liveness: buyer index out of range");
      if (static_cast<std::ptrdiff_t>(t) - last_seen[i] > static_cast<std::ptrdiff_t>(T)) {
        return false;
      }
      last_seen[i] = static_cast<std::ptrdiff_t>(t);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<std::ptrdiff_t>(len) - last_seen[i] > static_cast<std::ptrdiff_t>(T)) {
      return false;
    }
  }
  return true;
}

BidProfile default_initial_bids(const MarketInstance& market) {
  BidProfile b{Matrix(market.n, market.m, 0.0)};
  for (std::size_t i = 0; i < market.n; ++i) {
    std::size_t support = 0;
    for (std::size_t j = 0; j < market.m; ++j) {
      if (market.valuations(i, j) > 0.0) ++support;
    }
    if (support == 0) {
      throw InvalidInputError("default_initial_bids: buyer " + std::to_string(i) +
                              " values no good");
    }
    const double bid = market.budgets[i] / static_cast<double>(support);
    for (std::size_t j = 0; j < market.m; ++j) {
      if (market.valuations(i, j) > 0.0) b.bids(i, j) = bid;
    }
  }
  return b;
}

Trajectory run_dynamics(const MarketInstance& market, const BidProfile& b0,
                        const ActivationSchedule& schedule, const DynamicsConfig& config,
                        const BidProfile* reference) {
  if (config.max_steps == 0) throw InvalidInputError("run_dynamics: max_steps must be >= 1");
  if (!(config.tolerance > 0.0)) throw InvalidInputError("run_dynamics: tolerance must be > 0");
  if (config.record_every == 0) throw InvalidInputError("run_dynamics: record_every must be >= 1");
  if (schedule.n_buyers != market.n) {
    throw InvalidInputError("run_dynamics: schedule buyer count does not match the market");
  }
  {
    const ValidationReport report = validate_bids(b0, market);
    if (!report.ok()) {
      throw InvalidInputError("run_dynamics: invalid initial bids: " + report.violations.front());
    }
    for (std::size_t i = 0; i < market.n; ++i) {
      for (std::size_t j = 0; j < market.m; ++j) {
        if (market.valuations(i, j) > 0.0 && !(b0.bids(i, j) > 0.0)) {
          throw InvalidInputError(
              "run_dynamics: initial bids must be positive on every valued good");
        }
      }
    }
  }
  if (reference != nullptr && !reference->bids.same_shape(b0.bids)) {
    throw InvalidInputError("run_dynamics: reference profile shape mismatch");
  }

  const std::size_t window = std::max<std::size_t>(
      std::size_t{1}, schedule.liveness_T ? *schedule.liveness_T : market.n);
  if (schedule.cyclic && schedule.steps.empty()) {
    throw InvalidInputError("run_dynamics: cyclic schedule without steps");
  }
  const std::size_t horizon =
      schedule.cyclic ? config.max_steps : std::min(config.max_steps, schedule.steps.size());

  Trajectory trajectory;
  BidProfile current{b0.bids};
  std::vector<double> scratch_row(market.m);
  std::vector<double> recent_deltas(window, 0.0);
  std::vector<double> recent_price_deltas(window, 0.0);
  PriceVector live_prices = compute_prices(current, market);

  auto record = [&](std::size_t t) {
    TrajectoryPoint point;
    point.t = t;
    const PriceVector p = compute_prices(current, market);
    const Allocation x = allocate(current, p, market);
    point.prices = p.prices;
    point.potential = potential(current, market);
    point.utilities = buyer_utilities(x, market);
    point.nsw = nash_social_welfare(x, market).value;
    if (reference != nullptr) {
      point.distance = frobenius_distance(current.bids, reference->bids);
    }
    if (config.record_bids) point.bids = current.bids;
    trajectory.points.push_back(std::move(point));
  };

  record(0);
  std::size_t completed = 0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::vector<std::size_t>& subset =
        schedule.steps[schedule.cyclic ? t % schedule.steps.size() : t];
    double delta = 0.0;
    if (config.rule == UpdateRule::best_response) {
      if (subset.size() != 1) {
        throw InvalidInputError(
            "run_dynamics: the best-response rule requires singleton activations");
      }
      const std::size_t i = subset.front();
      if (i >= market.n) throw InvalidInputError("run_dynamics: buyer index out of range");
      const BestResponse response = best_response_detail(i, current, market);
      auto row = current.bids.row(i);
      for (std::size_t j = 0; j < market.m; ++j) {
        delta = std::max(delta, std::abs(response.bids[j] - row[j]));
        row[j] = response.bids[j];
      }
    } else {
      check_subset(subset, market.n, "run_dynamics");
      if (!subset.empty()) {
        // live_prices always holds the canonical pre-step prices.
        if (subset.size() == 1) {
          const std::size_t i = subset.front();
          delta = prd_row_update(current, i, live_prices, market, scratch_row);
          auto row = current.bids.row(i);
          std::copy(scratch_row.begin(), scratch_row.end(), row.begin());
        } else {
          // Simultaneous subset update: all rows respond to pre-step prices.
          Matrix rows(subset.size(), market.m);
          for (std::size_t k = 0; k < subset.size(); ++k) {
            const double d =
                prd_row_update(current, subset[k], live_prices, market, rows.row(k));
            delta = std::max(delta, d);
          }
          for (std::size_t k = 0; k < subset.size(); ++k) {
            auto src = rows.row(k);
            auto dst = current.bids.row(subset[k]);
            std::copy(src.begin(), src.end(), dst.begin());
          }
        }
      }
    }

    const PriceVector next_prices = compute_prices(current, market);
    double price_delta = 0.0;
    for (std::size_t j = 0; j < market.m; ++j) {
      price_delta = std::max(price_delta, std::abs(next_prices.prices[j] - live_prices.prices[j]));
    }
    live_prices = next_prices;

    completed = t + 1;
    recent_deltas[t % window] = delta;
    recent_price_deltas[t % window] = price_delta;
    if (completed % config.record_every == 0) record(completed);
    if (completed >= window) {
      double window_max = 0.0;
      for (const double d : recent_deltas) window_max = std::max(window_max, d);
      if (window_max <= config.tolerance) {
        trajectory.converged = true;
        break;
      }
    }
  }

  {
    const std::size_t filled = std::min(completed, window);
    double bid_window_max = 0.0;
    double price_window_max = 0.0;
    for (std::size_t k = 0; k < filled; ++k) {
      bid_window_max = std::max(bid_window_max, recent_deltas[k]);
      price_window_max = std::max(price_window_max, recent_price_deltas[k]);
    }
    trajectory.final_bid_window_change = bid_window_max;
    trajectory.final_price_window_change = price_window_max;
    // A convergence verdict needs a full window of history.
    trajectory.prices_converged = completed >= window && price_window_max <= config.tolerance;
  }
  if (trajectory.points.back().t != completed) record(completed);
  trajectory.steps_taken = completed;
  trajectory.final_bids = std::move(current);
  return trajectory;
}

}  // namespace fpr
