#include "edwait/elasticity.hpp"

#include <cmath>
#include <limits>

#include "edwait/csv.hpp"

namespace edwait {

std::string_view to_string(AcuityGroup g) {
  switch (g) {
    case AcuityGroup::All: return "all";
    case AcuityGroup::Low: return "low";
    case AcuityGroup::High: return "high";
  }
  return "all";
}

std::optional<AcuityGroup> parse_acuity_group(std::string_view text) {
  if (text == "all") return AcuityGroup::All;
  if (text == "low") return AcuityGroup::Low;
  if (text == "high") return AcuityGroup::High;
  return std::nullopt;
}

OutcomeSelector outcome_for(AcuityGroup g) {
  switch (g) {
    case AcuityGroup::Low: return {OutcomeKind::WaitingLowAcuity, 0};
    case AcuityGroup::High: return {OutcomeKind::WaitingHighAcuity, 0};
    case AcuityGroup::All: break;
  }
  return {OutcomeKind::WaitingTotal, 0};
}

bool reported_in_elasticity(RdPoint rd) { return rd.index() < kRdPointCount; }

double control_mean(const Panel& panel, RdPoint rd, Subgroup subgroup) {
  const SiteKind keep = subgroup == Subgroup::UC ? SiteKind::UrgentCare : SiteKind::FullED;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& o : panel.observations) {
    if (o.rd != rd || o.treated) continue;
    if (subgroup != Subgroup::All && o.site_kind != keep) continue;
    sum += o.y_now;
    ++n;
  }
  if (n == 0) throw UndefinedElasticity("no control observations at RD " + rd.label());
  return sum / static_cast<double>(n);
}

Elasticity compute_elasticity(double psi, double se_psi, double mean, int baseline_wait_min) {
  if (baseline_wait_min < 30 || baseline_wait_min > 240 || baseline_wait_min % 30 != 0) {
    throw std::invalid_argument("baseline wait must be one of 30, 60, ..., 240 minutes");
  }
  if (!(mean > 0.0)) throw UndefinedElasticity("control mean is zero; elasticity undefined");
  const double step = 30.0 / baseline_wait_min;
  return {(psi / mean) / step, std::abs(se_psi / mean / step)};
}

std::vector<ElasticityEstimate> elasticity_profile(const std::vector<AcuityInput>& inputs, Subgroup subgroup,
                                                   const std::vector<int>& horizons_min) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<ElasticityEstimate> out;
  for (const auto& in : inputs) {
    for (const auto& rd : RdPoint::all()) {
      if (!reported_in_elasticity(rd)) continue;
      for (int hm : horizons_min) {
        ElasticityEstimate cell;
        cell.rd = rd.label();
        cell.horizon_min = hm;
        cell.acuity = in.acuity;
        cell.baseline_wait = rd.control_display_min();
        cell.eta = cell.se_eta = cell.psi = cell.se_psi = cell.control_mean = nan;

        const IrfEstimate* est = nullptr;
        for (const auto& e : *in.irf) {
          if (e.rd == cell.rd && e.horizon_min == hm) est = &e;
        }
        if (!est) {
          cell.failure = "no IRF estimate";
          out.push_back(std::move(cell));
          continue;
        }
        cell.psi = est->psi;
        cell.se_psi = est->se;
        try {
          cell.control_mean = control_mean(*in.panel, rd, subgroup);
          const auto e = compute_elasticity(est->psi, est->se, cell.control_mean, cell.baseline_wait);
          cell.eta = e.eta;
          cell.se_eta = e.se_eta;
          cell.significant = std::abs(e.eta) > 1.96 * e.se_eta;
        } catch (const EstimationError& e) {
          cell.failure = e.what();
        }
        out.push_back(std::move(cell));
      }
    }
  }
  return out;
}

void write_elasticity_csv(std::ostream& out, const std::vector<ElasticityEstimate>& rows) {
  out << "rd,horizon_min,acuity_group,eta,se_eta,psi,control_mean,baseline_wait,significant\n";
  auto num = [](double v) { return std::isfinite(v) ? csv::format_double(v) : std::string("NA"); };
  for (const auto& r : rows) {
    out << r.rd << ',' << r.horizon_min << ',' << to_string(r.acuity) << ',' << num(r.eta) << ',' << num(r.se_eta)
        << ',' << num(r.psi) << ',' << num(r.control_mean) << ',' << r.baseline_wait << ','
        << (r.failure ? "NA" : (r.significant ? "1" : "0")) << '\n';
  }
}

}  // namespace edwait
