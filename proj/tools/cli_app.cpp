#include "cli_app.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "fpr/dynamics.hpp"
#include "fpr/equilibrium.hpp"
#include "fpr/errors.hpp"
#include "fpr/experiment.hpp"
#include "fpr/io.hpp"
#include "fpr/market.hpp"

namespace fpr {

namespace {

constexpr int kOk = 0;
constexpr int kUsageError = 1;
constexpr int kConvergenceError = 2;

struct GenerateArgs {
  std::size_t n = 10;
  std::size_t m = 10;
  std::uint64_t seed = 1;
  std::string out;
};

struct RunArgs {
  std::string market_path;
  std::string rule = "prd";
  std::string schedule = "round-robin";
  std::size_t T = 0;
  std::uint64_t schedule_seed = 1;
  std::size_t steps = 100000;
  double tolerance = 1e-9;
  std::size_t record_every = 100;
  std::size_t require_T = 0;
  std::string b0_path;
  std::string ref_bids_path;
  std::string out;
  std::string bids_out;
};

struct VerifyArgs {
  std::string market_path;
  std::string bids_path;
  double tolerance = 1e-6;
  std::string out;
};

struct EnsembleArgs {
  std::string config_path;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> n, m;
  std::optional<std::string> rule;
  std::optional<std::string> schedule;
  std::optional<std::size_t> T;
  std::optional<std::size_t> steps;
  std::optional<double> tolerance;
  std::optional<std::size_t> record_every;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out_dir;
  std::optional<double> oracle_tol;
};

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

ActivationSchedule build_schedule(const std::string& spec, std::size_t n, std::size_t steps,
                                  std::size_t T, std::uint64_t seed) {
  if (spec == "round-robin") {
    return make_round_robin_schedule(n, steps);
  }
  if (spec == "random-subset") {
    return make_random_subset_schedule(n, steps, T > 0 ? T : n, seed);
  }
  if (spec == "sequential-shuffled") {
    return make_shuffled_sequential_schedule(n, steps, seed);
  }
  // Anything else is a schedule file.
  ActivationSchedule s = read_schedule(spec);
  if (s.n_buyers > n) {
    throw InvalidInputError("schedule references buyer indices beyond the market size");
  }
  s.n_buyers = n;
  return s;
}

int do_generate(const GenerateArgs& args) {
  const MarketInstance market = generate_random_market(args.n, args.m, args.seed);
  write_market(args.out, market);
  return kOk;
}

int do_run(const RunArgs& args) {
  const MarketInstance market = read_market(args.market_path);
  {
    const ValidationReport report = validate_market(market);
    if (!report.ok()) {
      std::cerr << "invalid market:\n";
      for (const auto& v : report.violations) std::cerr << "  " << v << "\n";
      return kUsageError;
    }
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  }

  DynamicsConfig config;
  config.rule = args.rule == "br" || args.rule == "best-response"
                    ? UpdateRule::best_response
                    : UpdateRule::proportional_response;
  if (args.rule != "prd" && args.rule != "proportional-response" && args.rule != "br" &&
      args.rule != "best-response") {
    std::cerr << "unknown rule: " << args.rule << "\n";
    return kUsageError;
  }
  config.max_steps = args.steps;
  config.tolerance = args.tolerance;
  config.record_every = args.record_every;

  const ActivationSchedule schedule =
      build_schedule(args.schedule, market.n, args.steps, args.T, args.schedule_seed);
  if (args.require_T > 0 && !validate_liveness(schedule, args.require_T)) {
    std::cerr << "schedule violates the required liveness bound T=" << args.require_T << "\n";
    return kUsageError;
  }

  const BidProfile b0 = args.b0_path.empty() ? default_initial_bids(market)
                                             : read_bids(args.b0_path);
  std::optional<BidProfile> reference;
  if (!args.ref_bids_path.empty()) reference = read_bids(args.ref_bids_path);

  const Trajectory trajectory = run_dynamics(market, b0, schedule, config,
                                             reference ? &*reference : nullptr);
  write_trajectory_csv(args.out, trajectory, market.m);
  if (!args.bids_out.empty()) write_bids(args.bids_out, trajectory.final_bids);
  const char* verdict = trajectory.converged          ? "bids converged"
                        : trajectory.prices_converged ? "prices converged, bids still moving"
                                                      : "not converged";
  std::cerr << verdict << " after " << trajectory.steps_taken << " steps\n";
  return kOk;
}

int do_verify(const VerifyArgs& args) {
  const MarketInstance market = read_market(args.market_path);
  const BidProfile bids = read_bids(args.bids_path);
  const EquilibriumCertificate cert = verify_equilibrium(bids, market, args.tolerance);
  const std::string text = certificate_to_json(cert);
  if (args.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(args.out, text);
  }
  return cert.accepted ? kOk : kConvergenceError;
}

int do_ensemble(const EnsembleArgs& args) {
  ExperimentConfig config;
  if (!args.config_path.empty()) config = read_config(args.config_path);
  if (args.runs) config.ensemble_size = *args.runs;
  if (args.n) config.market.n = *args.n;
  if (args.m) config.market.m = *args.m;
  if (args.rule) {
    config.dynamics.rule = (*args.rule == "br" || *args.rule == "best-response")
                               ? UpdateRule::best_response
                               : UpdateRule::proportional_response;
  }
  if (args.schedule) {
    if (*args.schedule == "round-robin") {
      config.schedule.kind = ScheduleKind::round_robin;
    } else if (*args.schedule == "random-subset") {
      config.schedule.kind = ScheduleKind::random_subset;
    } else {
      config.schedule.kind = ScheduleKind::file;
      config.schedule.file = *args.schedule;
    }
  }
  if (args.T) config.schedule.T = *args.T;
  if (args.steps) config.dynamics.max_steps = *args.steps;
  if (args.tolerance) config.dynamics.tolerance = *args.tolerance;
  if (args.record_every) config.dynamics.record_every = *args.record_every;
  if (args.seed) config.master_seed = *args.seed;
  if (args.workers) config.workers = *args.workers;
  if (args.out_dir) config.output_dir = *args.out_dir;
  if (args.oracle_tol) config.oracle_tolerance = *args.oracle_tol;

  const EnsembleSummary summary = run_ensemble(config);
  std::cerr << summary.runs.size() << " runs, " << summary.failure_count
            << " oracle failures; aggregate written to "
            << (config.output_dir / "aggregate.csv").string() << "\n";
  return summary.failure_count == 0 ? kOk : kConvergenceError;
}

// Flattens aggregate-style CSVs (a t column plus metric columns) into a
// long-format table ready for plotting.
int do_report(const ReportArgs& args) {
  std::string out = "source,t,metric,value\n";
  for (const std::string& input : args.inputs) {
    const CsvTable table = read_csv(input);
    std::size_t t_col = table.header.size();
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (table.header[c] == "t") {
        t_col = c;
        break;
      }
    }
    if (t_col == table.header.size()) {
      std::cerr << input << ": no 't' column\n";
      return kUsageError;
    }
    const std::string source = std::filesystem::path(input).filename().string();
    for (const auto& row : table.rows) {
      for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c == t_col) continue;
        out += source;
        out += ',';
        out += format_real(row[t_col]);
        out += ',';
        out += table.header[c];
        out += ',';
        out += format_real(row[c]);
        out += '\n';
      }
    }
  }
  write_text_file(args.out, out);
  return kOk;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"Linear Fisher market simulator: proportional response and best response "
               "dynamics under adversarial activation schedules"};
  app.require_subcommand(1);

  GenerateArgs generate_args;
  auto* generate = app.add_subcommand("generate", "Sample a random normalized market");
  generate->add_option("--n", generate_args.n, "Number of buyers")->check(CLI::PositiveNumber);
  generate->add_option("--m", generate_args.m, "Number of goods")->check(CLI::PositiveNumber);
  generate->add_option("--seed", generate_args.seed, "Sampling seed");
  generate->add_option("--out", generate_args.out, "Output market JSON")->required();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run one dynamics trajectory");
  run->add_option("--market", run_args.market_path, "Market JSON")->required();
  run->add_option("--rule", run_args.rule, "Update rule: prd or br");
  run->add_option("--schedule", run_args.schedule,
                  "round-robin, random-subset, sequential-shuffled, or a schedule JSON file");
  run->add_option("--T", run_args.T, "Liveness bound for random-subset schedules");
  run->add_option("--schedule-seed", run_args.schedule_seed, "Schedule sampling seed");
  run->add_option("--steps", run_args.steps, "Step budget")->check(CLI::PositiveNumber);
  run->add_option("--tol", run_args.tolerance, "Window convergence tolerance");
  run->add_option("--record-every", run_args.record_every, "Recording stride")
      ->check(CLI::PositiveNumber);
  run->add_option("--require-T", run_args.require_T,
                  "Reject the schedule unless it is T-live for this T");
  run->add_option("--b0", run_args.b0_path, "Initial bids JSON (default: uniform on support)");
  run->add_option("--ref-bids", run_args.ref_bids_path,
                  "Reference bids JSON for the distance column");
  run->add_option("--out", run_args.out, "Output trajectory CSV")->required();
  run->add_option("--bids-out", run_args.bids_out, "Write final bids JSON here");

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand("verify", "Check equilibrium conditions on a bid profile");
  verify->add_option("--market", verify_args.market_path, "Market JSON")->required();
  verify->add_option("--bids", verify_args.bids_path, "Bid profile JSON")->required();
  verify->add_option("--tol", verify_args.tolerance, "Residual tolerance");
  verify->add_option("--out", verify_args.out, "Certificate JSON (default: stdout)");

  EnsembleArgs ensemble_args;
  auto* ensemble = app.add_subcommand("ensemble", "Run an ensemble of simulations");
  ensemble->add_option("--config", ensemble_args.config_path, "Experiment config JSON");
  ensemble->add_option("--runs", ensemble_args.runs, "Ensemble size");
  ensemble->add_option("--n", ensemble_args.n, "Buyers per generated market");
  ensemble->add_option("--m", ensemble_args.m, "Goods per generated market");
  ensemble->add_option("--rule", ensemble_args.rule, "Update rule: prd or br");
  ensemble->add_option("--schedule", ensemble_args.schedule,
                       "round-robin, random-subset, or a schedule JSON file");
  ensemble->add_option("--T", ensemble_args.T, "Liveness bound for random-subset schedules");
  ensemble->add_option("--steps", ensemble_args.steps, "Step budget per run");
  ensemble->add_option("--tol", ensemble_args.tolerance, "Window convergence tolerance");
  ensemble->add_option("--record-every", ensemble_args.record_every, "Recording stride");
  ensemble->add_option("--seed", ensemble_args.seed, "Master seed");
  ensemble->add_option("--workers", ensemble_args.workers, "Worker thread count");
  ensemble->add_option("--out-dir", ensemble_args.out_dir, "Output directory");
  ensemble->add_option("--oracle-tol", ensemble_args.oracle_tol, "Oracle tolerance");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Flatten aggregate CSVs into a long-format table");
  report->add_option("inputs", report_args.inputs, "Aggregate CSV files")->required();
  report->add_option("--out", report_args.out, "Output CSV")->required();

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help and friends.
      app.exit(e);
      return kOk;
    }
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return kUsageError;
  }

  try {
    if (generate->parsed()) return do_generate(generate_args);
    if (run->parsed()) return do_run(run_args);
    if (verify->parsed()) return do_verify(verify_args);
    if (ensemble->parsed()) return do_ensemble(ensemble_args);
    if (report->parsed()) return do_report(report_args);
  } catch (const DegenerateStateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConvergenceError;
  } catch (const OracleFailureError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConvergenceError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

int cli_dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("fpr");
  for (const auto& arg : args) argv.push_back(arg.c_str());
  return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace fpr
