#pragma once

// Monte Carlo recovery study: simulate, estimate, and compare against the
// simulator's own paired counterfactual (same seed, display forced up one block).

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edwait/config.hpp"

namespace edwait {

class StudyAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-event counterfactual contrasts for one simulated rep.
struct EventTruth {
  std::string site_id;
  EpochMinutes t = 0;
  RdPoint rd{1};
  // diff[outcome tag][horizon] = Y(treated display) - Y(control display)
  std::map<std::string, std::map<int, double>> diff;
};

/// Re-runs each site of `log` deterministically and, at every panel event,
/// forks the simulator twice: once showing the RD point's treated display and
/// once its control display. Both forks then evolve on common random numbers.
std::vector<EventTruth> counterfactual_truth(const EventLog& log, const Panel& panel,
                                             std::span<const OutcomeSelector> outcomes, std::span<const int> horizons,
                                             std::size_t max_events = 0);

/// Average contrast over the events of a subgroup, weighting (site, RD) cells
/// by n * share_treated * (1 - share_treated) as the pooled dummy regression does.
double pooled_truth(const Panel& panel, std::span<const EventTruth> truth, const std::string& outcome_tag, int horizon,
                    Subgroup subgroup = Subgroup::All, std::optional<RdPoint> only_rd = std::nullopt);

/// Discrete-convention elasticity of the admitted arrival flow of an acuity
/// group at the control display of `rd`, pooling sites where the point exists
/// by their mean arrival rates.
double flow_elasticity(std::span<const SiteConfig> sites, AcuityGroup group, RdPoint rd,
                       Subgroup subgroup = Subgroup::All);

struct RepEstimate {
  double psi = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double truth = std::numeric_limits<double>::quiet_NaN();
};

struct IrfStudyCell {
  std::string outcome;
  int horizon = 0;
  std::vector<RepEstimate> reps;  // indexed by rep; NaN for failed reps

  std::size_t ok() const;
  double mean_psi() const;
  double sd_psi() const;
  double mean_se() const;
  double mean_truth() const;
  double bias() const;     // mean(psi - truth)
  double se_bias() const;  // sd(psi - truth) / sqrt(reps)
  double rmse() const;
  double coverage_truth() const;  // share of CIs containing the rep's truth
  double coverage_zero() const;
  double share_negative() const;
  double share_significant_negative() const;
};

struct ElasticityStudyCell {
  AcuityGroup acuity = AcuityGroup::All;
  std::string rd;
  int horizon_min = 0;
  double eta_flow = 0.0;  // true_demand_elasticity, discrete convention
  std::vector<double> eta;
  std::vector<double> se_eta;
  std::vector<double> eta_counterfactual;  // same ratio applied to the paired-counterfactual psi

  std::size_t ok() const;
  double mean_eta() const;
  double se_mean_eta() const;
  double mean_se_eta() const;
  double mean_eta_counterfactual() const;
  double share_within_2se_of_flow() const;
};

struct StudyReport {
  int reps = 0;
  std::uint64_t seed0 = 0;
  std::vector<std::string> failures;  // "rep r: message"
  std::vector<IrfStudyCell> irf;
  std::vector<ElasticityStudyCell> elasticity;

  const IrfStudyCell& cell(const std::string& outcome, int horizon) const;
};

using StudyProgress = std::function<void(int rep, int reps)>;

/// Rep r uses seed seed0 + r. Throws std::invalid_argument for reps < 2 and
/// StudyAborted once more than 10% of reps have failed.
StudyReport run_recovery_study(const RunConfig& config, int reps, std::uint64_t seed0,
                               const StudyProgress& progress = {});

void write_study_irf_csv(std::ostream& out, const StudyReport& report);
void write_study_elasticity_csv(std::ostream& out, const StudyReport& report);
void write_study_reps_csv(std::ostream& out, const StudyReport& report);

}  // namespace edwait
