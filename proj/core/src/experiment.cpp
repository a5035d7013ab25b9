#include "fpr/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "fpr/errors.hpp"
#include "fpr/io.hpp"
#include "fpr/rng.hpp"

namespace fpr {

namespace {

using nlohmann::json;

// Seed streams for quantities derived from (master seed, run index).
constexpr std::uint64_t kMarketStream = 1;
constexpr std::uint64_t kOracleStream = 2;
constexpr std::uint64_t kScheduleStream = 3;

UpdateRule rule_from_string(const std::string& s) {
  if (s == "prd" || s == "proportional-response") return UpdateRule::proportional_response;
  if (s == "br" || s == "best-response") return UpdateRule::best_response;
  throw InvalidInputError("unknown update rule: " + s);
}

const char* rule_to_string(UpdateRule rule) {
  return rule == UpdateRule::best_response ? "best-response" : "proportional-response";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "round-robin") return ScheduleKind::round_robin;
  if (s == "random-subset") return ScheduleKind::random_subset;
  if (s == "file") return ScheduleKind::file;
  throw InvalidInputError("unknown schedule kind: " + s);
}

const char* schedule_kind_to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::round_robin:
      return "round-robin";
    case ScheduleKind::random_subset:
      return "random-subset";
    case ScheduleKind::file:
      return "file";
  }
  return "round-robin";
}

struct RunOutput {
  RunRecord record;
  // Metrics on the regular record grid (t = k * record_every).
  std::vector<double> potential;
  std::vector<double> nsw;
  std::vector<double> distance;
};

std::filesystem::path run_csv_path(const std::filesystem::path& dir, std::size_t run_index) {
  char name[32];
  std::snprintf(name, sizeof(name), "run_%04zu.csv", run_index);
  return dir / name;
}

RunOutput execute_run(const ExperimentConfig& config, const MarketInstance* shared_market,
                      const ActivationSchedule* shared_schedule, std::size_t run_index) {
  RunOutput out;
  out.record.run_index = run_index;

  MarketInstance generated;
  const MarketInstance* market = shared_market;
  if (market == nullptr) {
    generated = generate_random_market(
        config.market.n, config.market.m,
        derive_seed(config.master_seed, run_index, kMarketStream));
    market = &generated;
  }

  EquilibriumCertificate oracle;
  try {
    oracle = compute_equilibrium(*market, config.oracle_tolerance,
                                 derive_seed(config.master_seed, run_index, kOracleStream));
  } catch (const OracleFailureError&) {
    out.record.oracle_failed = true;
    return out;
  }
  if (!oracle.accepted) {
    out.record.oracle_failed = true;
    return out;
  }

  ActivationSchedule built;
  const ActivationSchedule* schedule = shared_schedule;
  if (schedule == nullptr) {
    switch (config.schedule.kind) {
      case ScheduleKind::round_robin:
        built = make_round_robin_schedule(market->n, config.dynamics.max_steps);
        break;
      case ScheduleKind::random_subset: {
        const std::size_t T = config.schedule.T > 0 ? config.schedule.T : market->n;
        built = make_random_subset_schedule(
            market->n, config.dynamics.max_steps, T,
            derive_seed(config.master_seed, run_index, kScheduleStream));
        break;
      }
      case ScheduleKind::file:
        throw InvalidInputError("run_ensemble: schedule kind 'file' requires a schedule file");
    }
    schedule = &built;
  }

  const BidProfile b0 = default_initial_bids(*market);
  const Trajectory trajectory =
      run_dynamics(*market, b0, *schedule, config.dynamics, &oracle.bids);
  out.record.converged = trajectory.converged;
  out.record.steps = trajectory.steps_taken;

  write_trajectory_csv(run_csv_path(config.output_dir, run_index), trajectory, market->m);

  for (const TrajectoryPoint& point : trajectory.points) {
    if (point.t % config.dynamics.record_every != 0) continue;  // off-grid final point
    out.potential.push_back(point.potential);
    out.nsw.push_back(point.nsw);
    out.distance.push_back(point.distance);
  }
  return out;
}

}  // namespace

std::size_t resolve_worker_count(std::size_t requested, std::size_t runs) {
  std::size_t workers = requested;
  if (workers == 0) {
    workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  }
  if (const char* env = std::getenv("FPR_WORKERS")) {
    char* end = nullptr;
    const unsigned long cap = std::strtoul(env, &end, 10);
    if (end != env && cap > 0) workers = std::min<std::size_t>(workers, cap);
  }
  return std::max<std::size_t>(1, std::min(workers, std::max<std::size_t>(1, runs)));
}

EnsembleSummary run_ensemble(const ExperimentConfig& config) {
  if (config.ensemble_size == 0) {
    throw InvalidInputError("run_ensemble: ensemble size must be >= 1");
  }
  std::filesystem::create_directories(config.output_dir);

  MarketInstance shared_market;
  const MarketInstance* market_ptr = nullptr;
  if (config.market.file) {
    shared_market = read_market(*config.market.file);
    const ValidationReport report = validate_market(shared_market);
    if (!report.ok()) {
      throw InvalidInputError("run_ensemble: invalid market file: " + report.violations.front());
    }
    market_ptr = &shared_market;
  }

  ActivationSchedule shared_schedule;
  const ActivationSchedule* schedule_ptr = nullptr;
  if (config.schedule.kind == ScheduleKind::file || config.schedule.file) {
    if (!config.schedule.file) {
      throw InvalidInputError("run_ensemble: schedule kind 'file' requires a schedule path");
    }
    shared_schedule = read_schedule(*config.schedule.file);
    const std::size_t buyers = market_ptr != nullptr ? market_ptr->n : config.market.n;
    if (shared_schedule.n_buyers > buyers) {
      throw InvalidInputError(
          "run_ensemble: schedule references buyer indices beyond the market size");
    }
    shared_schedule.n_buyers = buyers;
    schedule_ptr = &shared_schedule;
  }

  const std::size_t runs = config.ensemble_size;
  std::vector<RunOutput> outputs(runs);
  const std::size_t workers = resolve_worker_count(config.workers, runs);

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t r = next.fetch_add(1);
      if (r >= runs) return;
      try {
        outputs[r] = execute_run(config, market_ptr, schedule_ptr, r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  EnsembleSummary summary;
  summary.runs.reserve(runs);
  std::size_t grid = 0;
  for (const RunOutput& out : outputs) {
    summary.runs.push_back(out.record);
    if (out.record.oracle_failed) {
      ++summary.failure_count;
    } else {
      grid = std::max(grid, out.potential.size());
    }
  }

  // Cross-run means on the shared record grid, padding finished runs with
  // their final value. Accumulation is in run order so the aggregate is
  // byte-identical regardless of worker count.
  summary.step_index.resize(grid);
  summary.mean_potential.assign(grid, 0.0);
  summary.mean_nsw.assign(grid, 0.0);
  summary.mean_distance.assign(grid, 0.0);
  summary.pad_fraction.assign(grid, 0.0);
  const std::size_t included = runs - summary.failure_count;
  for (std::size_t k = 0; k < grid; ++k) {
    summary.step_index[k] = k * config.dynamics.record_every;
    double pot = 0.0;
    double nsw = 0.0;
    double dist = 0.0;
    std::size_t padded = 0;
    for (const RunOutput& out : outputs) {
      if (out.record.oracle_failed) continue;
      const std::size_t idx = std::min(k, out.potential.size() - 1);
      if (idx != k) ++padded;
      pot += out.potential[idx];
      nsw += out.nsw[idx];
      dist += out.distance[idx];
    }
    if (included > 0) {
      summary.mean_potential[k] = pot / static_cast<double>(included);
      summary.mean_nsw[k] = nsw / static_cast<double>(included);
      summary.mean_distance[k] = dist / static_cast<double>(included);
      summary.pad_fraction[k] = static_cast<double>(padded) / static_cast<double>(included);
    }
  }

  write_aggregate_csv(config.output_dir / "aggregate.csv", summary);
  write_runs_csv(config.output_dir / "runs.csv", summary);
  return summary;
}

void write_aggregate_csv(const std::filesystem::path& path, const EnsembleSummary& summary) {
  CsvTable table;
  table.header = {"t", "mean_potential", "mean_nsw", "mean_distance", "pad_fraction"};
  for (std::size_t k = 0; k < summary.step_index.size(); ++k) {
    table.rows.push_back({static_cast<double>(summary.step_index[k]), summary.mean_potential[k],
                          summary.mean_nsw[k], summary.mean_distance[k],
                          summary.pad_fraction[k]});
  }
  write_csv(path, table);
}

void write_runs_csv(const std::filesystem::path& path, const EnsembleSummary& summary) {
  CsvTable table;
  table.header = {"run", "oracle_failed", "converged", "steps"};
  for (const RunRecord& record : summary.runs) {
    table.rows.push_back({static_cast<double>(record.run_index),
                          record.oracle_failed ? 1.0 : 0.0, record.converged ? 1.0 : 0.0,
                          static_cast<double>(record.steps)});
  }
  write_csv(path, table);
}

ExperimentConfig config_from_json(const std::string& text) {
  json root = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (root.is_discarded()) throw InvalidInputError("malformed JSON in config file");
  ExperimentConfig config;
  try {
    if (root.contains("market")) {
      const json& market = root["market"];
      if (market.contains("file")) config.market.file = market["file"].get<std::string>();
      config.market.n = market.value("n", config.market.n);
      config.market.m = market.value("m", config.market.m);
      config.market.seed = market.value("seed", config.market.seed);
    }
    if (root.contains("schedule")) {
      const json& schedule = root["schedule"];
      if (schedule.contains("kind")) {
        config.schedule.kind = schedule_kind_from_string(schedule["kind"].get<std::string>());
      }
      config.schedule.T = schedule.value("T", config.schedule.T);
      config.schedule.seed = schedule.value("seed", config.schedule.seed);
      if (schedule.contains("file")) config.schedule.file = schedule["file"].get<std::string>();
    }
    if (root.contains("dynamics")) {
      const json& dynamics = root["dynamics"];
      if (dynamics.contains("rule")) {
        config.dynamics.rule = rule_from_string(dynamics["rule"].get<std::string>());
      }
      config.dynamics.max_steps = dynamics.value("max_steps", config.dynamics.max_steps);
      config.dynamics.tolerance = dynamics.value("tolerance", config.dynamics.tolerance);
      config.dynamics.record_every = dynamics.value("record_every", config.dynamics.record_every);
    }
    if (root.contains("ensemble")) {
      const json& ensemble = root["ensemble"];
      config.ensemble_size = ensemble.value("size", config.ensemble_size);
      config.master_seed = ensemble.value("seed", config.master_seed);
      config.workers = ensemble.value("workers", config.workers);
      config.oracle_tolerance = ensemble.value("oracle_tolerance", config.oracle_tolerance);
    }
    if (root.contains("output")) {
      const json& output = root["output"];
      if (output.contains("dir")) config.output_dir = output["dir"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string("config file: ") + e.what());
  }
  return config;
}

std::string config_to_json(const ExperimentConfig& config) {
  json root;
  if (config.market.file) root["market"]["file"] = config.market.file->string();
  root["market"]["n"] = config.market.n;
  root["market"]["m"] = config.market.m;
  root["market"]["seed"] = config.market.seed;
  root["schedule"]["kind"] = schedule_kind_to_string(config.schedule.kind);
  root["schedule"]["T"] = config.schedule.T;
  root["schedule"]["seed"] = config.schedule.seed;
  if (config.schedule.file) root["schedule"]["file"] = config.schedule.file->string();
  root["dynamics"]["rule"] = rule_to_string(config.dynamics.rule);
  root["dynamics"]["max_steps"] = config.dynamics.max_steps;
  root["dynamics"]["tolerance"] = config.dynamics.tolerance;
  root["dynamics"]["record_every"] = config.dynamics.record_every;
  root["ensemble"]["size"] = config.ensemble_size;
  root["ensemble"]["seed"] = config.master_seed;
  root["ensemble"]["workers"] = config.workers;
  root["ensemble"]["oracle_tolerance"] = config.oracle_tolerance;
  root["output"]["dir"] = config.output_dir.string();
  return root.dump(2) + "\n";
}

ExperimentConfig read_config(const std::filesystem::path& path) {
  return config_from_json(read_text_file(path));
}

}  // namespace fpr
