// Command-line front end: simulate, pipeline, recovery.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edwait/config.hpp"
#include "edwait/digest.hpp"
#include "edwait/ingest.hpp"
#include "edwait/pipeline.hpp"
#include "edwait/study.hpp"

namespace fs = std::filesystem;
using namespace edwait;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kEstimationError = 3 };

ConfigError usage_error(std::string flag, std::string message) {
  return ConfigError(std::vector<ConfigIssue>{{std::move(flag), std::move(message)}});
}

fs::path default_out(const std::string& command) {
  const char* root = std::getenv("EDWAIT_OUT");
  return fs::path(root && *root ? root : "out") / command;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration_days;
  std::string out;
};

RunConfig load_run_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? default_config() : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.duration_days) {
    if (*c.duration_days < 0.0) throw usage_error("--duration-days", "must be non-negative");
    cfg.duration_days = *c.duration_days;
  }
  return cfg;
}

struct EstimationFlags {
  std::optional<double> bandwidth;
  std::optional<int> lags;
  std::optional<int> leads;
  std::optional<int> grid_min;
  bool interact_rd = false;
  bool hc1 = false;
  std::vector<std::string> outcomes;
  std::vector<std::string> subgroups;

  void apply(EstimationConfig& e) const {
    if (bandwidth) e.panel.bandwidth = *bandwidth;
    if (lags) e.panel.lags = *lags;
    if (leads) e.panel.leads = *leads;
    if (grid_min) e.panel.grid_min = *grid_min;
    if (interact_rd) e.interact_rd = true;
    if (hc1) e.hc = HcVariant::HC1;
    if (!outcomes.empty()) {
      e.outcomes.clear();
      for (const auto& tag : outcomes) e.outcomes.push_back(*OutcomeSelector::parse(tag));
    }
    if (!subgroups.empty()) {
      e.subgroups.clear();
      for (const auto& s : subgroups) e.subgroups.push_back(*parse_subgroup(s));
    }
    if (!(e.panel.bandwidth > 0.0 && e.panel.bandwidth <= 15.0)) throw usage_error("--bandwidth", "must lie in (0, 15]");
    if (e.panel.lags < 0) throw usage_error("--lags", "must be ≥ 0");
    if (e.panel.leads < 1) throw usage_error("--leads", "must be ≥ 1");
    if (e.panel.grid_min < 1) throw usage_error("--grid-min", "must be ≥ 1");
  }
};

void add_estimation_flags(CLI::App* cmd, EstimationFlags& f) {
  auto outcome_check = CLI::Validator(
      [](std::string& s) { return OutcomeSelector::parse(s) ? std::string() : "unknown outcome tag " + s; }, "OUTCOME");
  auto subgroup_check = CLI::Validator(
      [](std::string& s) { return parse_subgroup(s) ? std::string() : "subgroup must be all, ED or UC"; }, "SUBGROUP");
  cmd->add_option("--bandwidth", f.bandwidth, "RD half-width in granular minutes (default 3)");
  cmd->add_option("--lags", f.lags, "outcome lags in the projection (default 14)");
  cmd->add_option("--leads", f.leads, "horizons estimated, in grid steps (default 36)");
  cmd->add_option("--grid-min", f.grid_min, "outcome sampling grid in minutes (default 5)");
  cmd->add_flag("--interact-rd", f.interact_rd, "per-RD-point treatment effects");
  cmd->add_flag("--hc1", f.hc1, "HC1 small-sample scaling instead of HC0");
  cmd->add_option("--outcome", f.outcomes,
                  "waiting, waiting_ctas1..5, waiting_low, waiting_high or treating (repeatable)")
      ->check(outcome_check);
  cmd->add_option("--subgroup", f.subgroups, "all, ED or UC (repeatable)")->check(subgroup_check);
}

int cmd_simulate(const Common& common, double heap_fraction) {
  const RunConfig cfg = load_run_config(common);
  const auto minutes = static_cast<EpochMinutes>(std::llround(cfg.duration_days * 1440.0));
  if (minutes == 0) std::cerr << "warning: duration is zero; writing empty logs\n";
  EventLog log = simulate_network(cfg.network, minutes, cfg.seed);
  if (heap_fraction > 0.0) {
    RandomStream rng(cfg.seed, 0x4EA9);
    log.predictions = inject_heaping(log.predictions, heap_fraction, rng);
  }
  const fs::path out = common.out.empty() ? default_out("simulate") : fs::path(common.out);
  const auto files = write_simulation(log, cfg, out);
  print_summary(std::cout, log);
  for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
  return kOk;
}

int cmd_pipeline(const Common& common, const std::string& data, const EstimationFlags& flags, bool diagnose,
                 bool write_stocks, bool write_panels) {
  RunConfig cfg = common.config.empty() ? default_config() : load_config(common.config);
  PipelineOptions opts;
  opts.estimation = cfg.estimation;
  flags.apply(opts.estimation);
  opts.diagnose = diagnose;
  opts.write_stocks = write_stocks;
  opts.write_panels = write_panels;
  const fs::path out = common.out.empty() ? default_out("pipeline") : fs::path(common.out);
  const auto result = run_pipeline(data, out, opts, &std::cout);
  for (const auto& n : result.notes) std::cout << "note: " << n << '\n';
  std::cout << "wrote " << result.irf_rows << " IRF rows and " << result.elasticity_rows << " elasticity rows to "
            << out.string() << '\n';
  return kOk;
}

int cmd_recovery(const Common& common, std::optional<int> reps_flag, const EstimationFlags& flags) {
  RunConfig cfg = load_run_config(common);
  flags.apply(cfg.estimation);
  const int reps = reps_flag.value_or(cfg.study.reps);
  if (reps < 2) {
    std::cerr << "error: reps ≥ 2 required\n";
    return kUsage;
  }
  const fs::path out = common.out.empty() ? default_out("recovery") : fs::path(common.out);
  fs::create_directories(out);
  const auto report = run_recovery_study(cfg, reps, cfg.seed, [](int r, int n) {
    if (r == n || r % 10 == 0) std::cerr << "rep " << r << "/" << n << '\n';
  });
  std::vector<fs::path> files{out / "study_irf.csv", out / "study_reps.csv"};
  {
    std::ofstream f(files[0]);
    write_study_irf_csv(f, report);
  }
  {
    std::ofstream f(files[1]);
    write_study_reps_csv(f, report);
  }
  if (!report.elasticity.empty()) {
    files.push_back(out / "study_elasticity.csv");
    std::ofstream f(files.back());
    write_study_elasticity_csv(f, report);
  }
  {
    RunConfig snapshot = cfg;
    snapshot.study.reps = reps;
    files.push_back(out / "config.json");
    std::ofstream f(files.back());
    f << config_to_json(snapshot);
  }
  std::ofstream manifest(out / "manifest.txt");
  manifest << "reps " << reps << "\nseed0 " << cfg.seed << "\nfailed_reps " << report.failures.size() << '\n';
  for (const auto& msg : report.failures) manifest << "failure " << msg << '\n';
  for (const auto& f : files) manifest << "file " << f.filename().string() << ' ' << sha256_file(f) << '\n';

  std::cout << "outcome  h  mean_psi  mean_truth  bias  coverage(truth)  coverage(0)\n";
  for (const auto& c : report.irf) {
    std::cout << c.outcome << "  " << c.horizon << "  " << c.mean_psi() << "  " << c.mean_truth() << "  " << c.bias()
              << "  " << c.coverage_truth() << "  " << c.coverage_zero() << '\n';
  }
  if (!report.failures.empty()) std::cout << report.failures.size() << " reps failed; see manifest.txt\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Displayed wait times and emergency demand: simulation, RD panels, local projections"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* cmd, bool simulation) {
    cmd->add_option("--config", common.config, "JSON run configuration (default: built-in 5-site network)");
    cmd->add_option("--out", common.out, "output directory (default: $EDWAIT_OUT/<command> or out/<command>)");
    if (simulation) {
      cmd->add_option("--seed", common.seed, "master seed (default from config)");
      cmd->add_option("--duration-days", common.duration_days, "simulated days (default from config)");
    }
  };

  auto* sim = app.add_subcommand("simulate", "simulate the site network and write prediction and visit logs");
  add_common(sim, true);
  double heap_fraction = 0.0;
  sim->add_option("--heap-fraction", heap_fraction, "move this share of predictions just above a step point")
      ->check(CLI::Range(0.0, 1.0));

  auto* pipe = app.add_subcommand("pipeline", "ingest logs, build RD panels, estimate projections and elasticities");
  add_common(pipe, false);
  std::string data;
  pipe->add_option("--data", data, "directory holding predictions.csv and visits.csv")->required();
  EstimationFlags pipe_flags;
  add_estimation_flags(pipe, pipe_flags);
  bool diagnose = false;
  bool write_stocks = false;
  bool write_panels = false;
  pipe->add_flag("--diagnose", diagnose, "write the forcing-variable heaping diagnostic");
  pipe->add_flag("--write-stocks", write_stocks, "also write the minute-level stock series");
  pipe->add_flag("--write-panels", write_panels, "also write one RD panel CSV per outcome");

  auto* rec = app.add_subcommand("recovery", "Monte Carlo recovery study against the paired counterfactual");
  add_common(rec, true);
  std::optional<int> reps;
  rec->add_option("--reps", reps, "number of simulated reps (default from config)");
  EstimationFlags rec_flags;
  add_estimation_flags(rec, rec_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_simulate(common, heap_fraction);
    if (*pipe) return cmd_pipeline(common, data, pipe_flags, diagnose, write_stocks, write_panels);
    if (*rec) return cmd_recovery(common, reps, rec_flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error:\n" << describe(e.issues()) << '\n';
    return kUsage;
  } catch (const PipelineError& e) {
    std::cerr << "error in stage " << e.what() << '\n';
    return e.kind() == FailureKind::Data ? kDataError : kEstimationError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const StudyAborted& e) {
    std::cerr << "study aborted: " << e.what() << '\n';
    return kEstimationError;
  } catch (const EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << '\n';
    return kEstimationError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}
