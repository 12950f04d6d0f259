#pragma once

// JSON run configuration: site network, estimation grid and recovery study.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edwait/elasticity.hpp"
#include "edwait/lp.hpp"
#include "edwait/rd.hpp"
#include "edwait/simulator.hpp"

namespace edwait {

struct EstimationConfig {
  PanelOptions panel;
  bool interact_rd = false;
  HcVariant hc = HcVariant::HC0;
  std::vector<OutcomeSelector> outcomes = OutcomeSelector::standard_set();
  std::vector<Subgroup> subgroups{Subgroup::All, Subgroup::ED, Subgroup::UC};
};

struct StudyConfig {
  int reps = 200;
  std::vector<int> horizons{6, 18, 36};
  std::vector<OutcomeSelector> outcomes{{OutcomeKind::WaitingTotal, 0}};
  Subgroup subgroup = Subgroup::All;
  bool counterfactual_truth = true;  // paired forced-display runs per event
  bool elasticity = false;           // interacted fits and per-RD elasticities
  int max_truth_events = 0;          // 0: every panel event
};

struct RunConfig {
  NetworkConfig network;
  double duration_days = 90.0;
  std::uint64_t seed = 1;
  EstimationConfig estimation;
  StudyConfig study;
};

/// Three full EDs and two urgent cares with the published CTAS mix.
RunConfig default_config();

/// Parses and validates. Missing keys take the defaults of default_config()
/// except `sites`, which replaces the default network when present. Throws
/// ConfigError with field paths such as `sites[2].server_count`.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& file);

std::string config_to_json(const RunConfig& config);

}  // namespace edwait
