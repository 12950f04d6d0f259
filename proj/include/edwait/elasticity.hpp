#pragma once

// Wait-time elasticities of demand from per-RD dynamic multipliers.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "edwait/lp.hpp"

namespace edwait {

enum class AcuityGroup { All, Low, High };

std::string_view to_string(AcuityGroup g);
std::optional<AcuityGroup> parse_acuity_group(std::string_view text);

/// Waiting outcome summed over the CTAS levels of the group (3-5 for low,
/// 1-2 for high).
OutcomeSelector outcome_for(AcuityGroup g);

inline const std::vector<int> kElasticityHorizonsMin{30, 90, 150};

/// RD points that enter elasticity reporting: all except 270-300.
bool reported_in_elasticity(RdPoint rd);

class UndefinedElasticity : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

/// Mean outcome at the event time over control-side observations of `rd`.
/// The panel's own outcome selector is used.
double control_mean(const Panel& panel, RdPoint rd, Subgroup subgroup = Subgroup::All);

struct Elasticity {
  double eta;
  double se_eta;
};

/// eta = (psi / control_mean) / (30 / baseline_wait); the control mean and the
/// baseline are treated as constants for the standard error.
Elasticity compute_elasticity(double psi, double se_psi, double control_mean, int baseline_wait_min);

struct ElasticityEstimate {
  std::string rd;
  int horizon_min = 0;
  AcuityGroup acuity = AcuityGroup::All;
  double eta = 0.0;
  double se_eta = 0.0;
  double psi = 0.0;
  double se_psi = 0.0;
  double control_mean = 0.0;
  int baseline_wait = 0;
  bool significant = false;            // |eta| > 1.96 se_eta
  std::optional<std::string> failure;  // set when the cell is undefined
};

struct AcuityInput {
  AcuityGroup acuity;
  const Panel* panel;                    // built for outcome_for(acuity)
  const std::vector<IrfEstimate>* irf;   // interacted estimates from that panel
};

/// Grid over reported RD points x {30, 90, 150} minutes x acuity group. Cells
/// without an estimate or with an empty control side carry a failure message.
std::vector<ElasticityEstimate> elasticity_profile(const std::vector<AcuityInput>& inputs,
                                                   Subgroup subgroup = Subgroup::All,
                                                   const std::vector<int>& horizons_min = kElasticityHorizonsMin);

void write_elasticity_csv(std::ostream& out, const std::vector<ElasticityEstimate>& rows);

}  // namespace edwait
