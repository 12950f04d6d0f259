#pragma once

// File-level orchestration: simulation output, and the ingest -> panel ->
// projection -> elasticity chain with a digest manifest.

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "edwait/config.hpp"
#include "edwait/simulator.hpp"

namespace edwait {

enum class FailureKind { Data, Estimation };

class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, FailureKind kind, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)), kind_(kind) {}
  const std::string& stage() const { return stage_; }
  FailureKind kind() const { return kind_; }

 private:
  std::string stage_;
  FailureKind kind_;
};

inline constexpr const char* kPredictionsFile = "predictions.csv";
inline constexpr const char* kVisitsFile = "visits.csv";
inline constexpr const char* kConfigSnapshotFile = "config.json";

/// Writes the prediction and visit logs, a config snapshot carrying the seed
/// and duration actually used, and a per-site summary. Returns the paths.
std::vector<std::filesystem::path> write_simulation(const EventLog& log, const RunConfig& config,
                                                    const std::filesystem::path& out_dir);

/// Visits, balks and CTAS shares by site.
void print_summary(std::ostream& out, const EventLog& log);

struct PipelineOptions {
  EstimationConfig estimation;
  bool diagnose = false;
  bool write_stocks = false;
  bool write_panels = false;
};

struct PipelineResult {
  std::vector<std::filesystem::path> files;
  std::size_t predictions = 0;
  std::size_t visits = 0;
  std::size_t irf_rows = 0;
  std::size_t elasticity_rows = 0;
  std::vector<std::string> notes;  // skipped subgroups, per-horizon failures, declined diagnostics
};

/// Reads predictions.csv and visits.csv (and config.json when present) from
/// `data_dir` and writes irf.csv, elasticity.csv, optional diagnostics and
/// manifest.json to `out_dir`. A failing stage throws PipelineError after the
/// files written so far and a manifest naming the stage are kept.
PipelineResult run_pipeline(const std::filesystem::path& data_dir, const std::filesystem::path& out_dir,
                            const PipelineOptions& options, std::ostream* log = nullptr);

}  // namespace edwait
