#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fpr/dynamics.hpp"
#include "fpr/equilibrium.hpp"

namespace fpr {

enum class ScheduleKind { round_robin, random_subset, file };

struct MarketSpec {
  std::optional<std::filesystem::path> file;  // takes precedence over the generator
  std::size_t n = 10;
  std::size_t m = 10;
  std::uint64_t seed = 1;
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::round_robin;
  std::size_t T = 0;  // 0 -> default for the kind (n for random subsets)
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> file;
};

struct ExperimentConfig {
  MarketSpec market;
  ScheduleSpec schedule;
  DynamicsConfig dynamics;
  std::size_t ensemble_size = 1;
  std::uint64_t master_seed = 1;
  // 0 -> hardware concurrency; always capped by the FPR_WORKERS environment
  // variable when it is set.
  std::size_t workers = 0;
  std::filesystem::path output_dir = "out";
  double oracle_tolerance = 1e-6;
};

struct RunRecord {
  std::size_t run_index = 0;
  bool oracle_failed = false;
  bool converged = false;
  std::size_t steps = 0;
};

// Cross-run means aligned by recorded step index. Runs that finished early
// are padded with their final value; pad_fraction reports how much padding
// entered each mean.
struct EnsembleSummary {
  std::vector<RunRecord> runs;
  std::size_t failure_count = 0;
  std::vector<std::size_t> step_index;
  std::vector<double> mean_potential;
  std::vector<double> mean_nsw;
  std::vector<double> mean_distance;
  std::vector<double> pad_fraction;
};

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig read_config(const std::filesystem::path& path);

// Per run: generate/load the market, compute its equilibrium certificate,
// run the configured dynamic against it, and write run_####.csv. Runs whose
// oracle fails are flagged, counted, and excluded from the means. Writes
// aggregate.csv and runs.csv into the output directory. Deterministic given
// the seeds regardless of worker count.
EnsembleSummary run_ensemble(const ExperimentConfig& config);

void write_aggregate_csv(const std::filesystem::path& path, const EnsembleSummary& summary);
void write_runs_csv(const std::filesystem::path& path, const EnsembleSummary& summary);

std::size_t resolve_worker_count(std::size_t requested, std::size_t runs);

}  // namespace fpr
