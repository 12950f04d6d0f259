#include "edwait/study.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "edwait/csv.hpp"
#include "edwait/ingest.hpp"

namespace edwait {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int sim_outcome(const SiteSimulator& sim, const OutcomeSelector& o) {
  switch (o.kind) {
    case OutcomeKind::WaitingTotal: return sim.waiting_total();
    case OutcomeKind::WaitingCtas: return sim.waiting(CtasLevel(o.ctas));
    case OutcomeKind::WaitingLowAcuity: return sim.waiting(CtasLevel(3)) + sim.waiting(CtasLevel(4)) + sim.waiting(CtasLevel(5));
    case OutcomeKind::WaitingHighAcuity: return sim.waiting(CtasLevel(1)) + sim.waiting(CtasLevel(2));
    case OutcomeKind::Treating: return sim.treating();
  }
  return 0;
}

// Runs a fork forward with its own predictions up to (not including) `t`.
void run_until(SiteSimulator& sim, double t) {
  while (sim.next_prediction_time() < t) {
    sim.advance_to(sim.next_prediction_time(), nullptr);
    sim.emit_prediction(nullptr);
  }
  sim.advance_to(t, nullptr);
}

struct Moments {
  std::size_t n = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    ++n;
    sum += x;
    sum_sq += x * x;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : kNaN; }
  double sd() const {
    if (n < 2) return kNaN;
    const double m = mean();
    return std::sqrt(std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1)));
  }
};

template <class F>
Moments collect(const std::vector<RepEstimate>& reps, F&& value) {
  Moments m;
  for (const auto& r : reps) {
    if (std::isfinite(r.psi) && std::isfinite(r.se)) {
      const double v = value(r);
      if (std::isfinite(v)) m.add(v);
    }
  }
  return m;
}

Moments collect(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) {
    if (std::isfinite(x)) m.add(x);
  }
  return m;
}

bool in_subgroup(SiteKind kind, Subgroup g) {
  return g == Subgroup::All || (g == Subgroup::ED) == (kind == SiteKind::FullED);
}

std::string num(double v) { return std::isfinite(v) ? csv::format_double(v) : std::string("NA"); }

}  // namespace

std::vector<EventTruth> counterfactual_truth(const EventLog& log, const Panel& panel,
                                             std::span<const OutcomeSelector> outcomes, std::span<const int> horizons,
                                             std::size_t max_events) {
  std::vector<const PanelObservation*> events;
  for (const auto& o : panel.observations) events.push_back(&o);
  if (max_events > 0 && events.size() > max_events) {
    std::vector<const PanelObservation*> kept;
    const double stride = static_cast<double>(events.size()) / static_cast<double>(max_events);
    for (std::size_t i = 0; i < max_events; ++i) kept.push_back(events[static_cast<std::size_t>(i * stride)]);
    events = std::move(kept);
  }
  std::vector<int> hs(horizons.begin(), horizons.end());
  std::sort(hs.begin(), hs.end());
  hs.erase(std::unique(hs.begin(), hs.end()), hs.end());

  const double end = static_cast<double>(log.duration_min);
  const int grid = panel.options.grid_min;
  std::vector<EventTruth> out;
  for (std::size_t i = 0; i < log.config.sites.size(); ++i) {
    const auto& cfg = log.config.sites[i];
    std::map<EpochMinutes, const PanelObservation*> due;
    for (const auto* e : events) {
      if (e->site_id == cfg.site_id) due.emplace(e->t - log.config.start, e);
    }
    if (due.empty()) continue;

    SiteSimulator sim(cfg, log.config.start, log.seed, i);
    auto next = due.begin();
    while (next != due.end() && sim.next_prediction_time() < end) {
      const double tp = sim.next_prediction_time();
      sim.advance_to(tp, nullptr);
      if (static_cast<EpochMinutes>(std::llround(tp)) == next->first) {
        const auto& e = *next->second;
        SiteSimulator treated = sim;
        SiteSimulator control = sim;
        treated.emit_prediction(nullptr, e.rd.treated_display_min());
        control.emit_prediction(nullptr, e.rd.control_display_min());
        EventTruth truth{e.site_id, e.t, e.rd, {}};
        for (int h : hs) {
          // The stock sampled at minute m is the state just before m + 1.
          const double sample = tp + static_cast<double>(grid) * h + 1.0;
          run_until(treated, sample);
          run_until(control, sample);
          for (const auto& o : outcomes) {
            truth.diff[o.tag()][h] = sim_outcome(treated, o) - sim_outcome(control, o);
          }
        }
        out.push_back(std::move(truth));
        ++next;
      }
      sim.emit_prediction(nullptr);
    }
  }
  return out;
}

double pooled_truth(const Panel& panel, std::span<const EventTruth> truth, const std::string& outcome_tag, int horizon,
                    Subgroup subgroup, std::optional<RdPoint> only_rd) {
  struct Cell {
    std::size_t n = 0;
    std::size_t treated = 0;
    Moments contrast;
  };
  std::map<std::pair<std::string, int>, Cell> cells;
  std::map<std::string, SiteKind, std::less<>> kinds;
  for (const auto& o : panel.observations) {
    kinds[o.site_id] = o.site_kind;
    if (!in_subgroup(o.site_kind, subgroup) || (only_rd && o.rd != *only_rd)) continue;
    auto& c = cells[{o.site_id, o.rd.index()}];
    ++c.n;
    if (o.treated) ++c.treated;
  }
  for (const auto& t : truth) {
    auto it = cells.find({t.site_id, t.rd.index()});
    if (it == cells.end()) continue;
    const auto o = t.diff.find(outcome_tag);
    if (o == t.diff.end()) continue;
    const auto h = o->second.find(horizon);
    if (h != o->second.end()) it->second.contrast.add(h->second);
  }
  double num_sum = 0.0;
  double den = 0.0;
  for (const auto& [key, c] : cells) {
    if (c.contrast.n == 0) continue;
    const double share = static_cast<double>(c.treated) / static_cast<double>(c.n);
    const double w = static_cast<double>(c.n) * share * (1.0 - share);
    num_sum += w * c.contrast.mean();
    den += w;
  }
  return den > 0.0 ? num_sum / den : kNaN;
}

double flow_elasticity(std::span<const SiteConfig> sites, AcuityGroup group, RdPoint rd, Subgroup subgroup) {
  const int w = rd.control_display_min();
  double flow = 0.0;
  double weighted = 0.0;
  for (const auto& s : sites) {
    if (!in_subgroup(s.kind, subgroup) || rd.treated_display_min() > s.display_cap_min) continue;
    for (int c = 1; c <= kCtasLevels; ++c) {
      if (group == AcuityGroup::Low && c < 3) continue;
      if (group == AcuityGroup::High && c > 2) continue;
      const CtasLevel level(c);
      const double admitted = s.arrival_rates[level.index()] * (1.0 - balk_probability(w, level, s.balking));
      if (admitted <= 0.0) continue;
      flow += admitted;
      weighted += admitted * true_demand_elasticity(s.balking, level, w, s.display_floor_min, s.display_cap_min).discrete;
    }
  }
  return flow > 0.0 ? weighted / flow : kNaN;
}

std::size_t IrfStudyCell::ok() const { return collect(reps, [](const RepEstimate& r) { return r.psi; }).n; }
double IrfStudyCell::mean_psi() const { return collect(reps, [](const RepEstimate& r) { return r.psi; }).mean(); }
double IrfStudyCell::sd_psi() const { return collect(reps, [](const RepEstimate& r) { return r.psi; }).sd(); }
double IrfStudyCell::mean_se() const { return collect(reps, [](const RepEstimate& r) { return r.se; }).mean(); }
double IrfStudyCell::mean_truth() const { return collect(reps, [](const RepEstimate& r) { return r.truth; }).mean(); }
double IrfStudyCell::bias() const {
  return collect(reps, [](const RepEstimate& r) { return r.psi - r.truth; }).mean();
}
double IrfStudyCell::se_bias() const {
  const auto m = collect(reps, [](const RepEstimate& r) { return r.psi - r.truth; });
  return m.sd() / std::sqrt(static_cast<double>(m.n));
}
double IrfStudyCell::rmse() const {
  const auto m = collect(reps, [](const RepEstimate& r) { return r.psi - r.truth; });
  return m.n ? std::sqrt(m.sum_sq / static_cast<double>(m.n)) : kNaN;
}
double IrfStudyCell::coverage_truth() const {
  return collect(reps, [](const RepEstimate& r) {
           if (!std::isfinite(r.truth)) return kNaN;
           return std::abs(r.psi - r.truth) <= 1.96 * r.se ? 1.0 : 0.0;
         }).mean();
}
double IrfStudyCell::coverage_zero() const {
  return collect(reps, [](const RepEstimate& r) { return std::abs(r.psi) <= 1.96 * r.se ? 1.0 : 0.0; }).mean();
}
double IrfStudyCell::share_negative() const {
  return collect(reps, [](const RepEstimate& r) { return r.psi < 0.0 ? 1.0 : 0.0; }).mean();
}
double IrfStudyCell::share_significant_negative() const {
  return collect(reps, [](const RepEstimate& r) { return r.psi + 1.96 * r.se < 0.0 ? 1.0 : 0.0; }).mean();
}

std::size_t ElasticityStudyCell::ok() const { return collect(eta).n; }
double ElasticityStudyCell::mean_eta() const { return collect(eta).mean(); }
double ElasticityStudyCell::se_mean_eta() const {
  const auto m = collect(eta);
  return m.sd() / std::sqrt(static_cast<double>(m.n));
}
double ElasticityStudyCell::mean_se_eta() const { return collect(se_eta).mean(); }
double ElasticityStudyCell::mean_eta_counterfactual() const { return collect(eta_counterfactual).mean(); }
double ElasticityStudyCell::share_within_2se_of_flow() const {
  Moments m;
  for (std::size_t r = 0; r < eta.size(); ++r) {
    if (std::isfinite(eta[r]) && std::isfinite(se_eta[r])) m.add(std::abs(eta[r] - eta_flow) <= 2.0 * se_eta[r] ? 1.0 : 0.0);
  }
  return m.mean();
}

const IrfStudyCell& StudyReport::cell(const std::string& outcome, int horizon) const {
  for (const auto& c : irf) {
    if (c.outcome == outcome && c.horizon == horizon) return c;
  }
  throw std::out_of_range("no study cell for " + outcome + " at horizon " + std::to_string(horizon));
}

StudyReport run_recovery_study(const RunConfig& config, int reps, std::uint64_t seed0, const StudyProgress& progress) {
  if (reps < 2) throw std::invalid_argument("reps ≥ 2 required for a recovery study");
  const auto& st = config.study;
  const auto& est = config.estimation;
  if (st.horizons.empty() || st.outcomes.empty()) throw std::invalid_argument("study needs horizons and outcomes");

  PanelOptions popt = est.panel;
  popt.require_full_coverage = true;
  std::vector<int> el_horizons;
  std::vector<int> el_horizons_min;
  if (st.elasticity) {
    for (int hm : kElasticityHorizonsMin) {
      if (hm % popt.grid_min == 0) {
        el_horizons.push_back(hm / popt.grid_min);
        el_horizons_min.push_back(hm);
      }
    }
  }
  std::vector<int> truth_horizons = st.horizons;
  truth_horizons.insert(truth_horizons.end(), el_horizons.begin(), el_horizons.end());
  popt.leads = std::max(popt.leads, *std::max_element(truth_horizons.begin(), truth_horizons.end()));

  std::vector<OutcomeSelector> outcomes = st.outcomes;
  const std::vector<AcuityGroup> groups{AcuityGroup::All, AcuityGroup::Low, AcuityGroup::High};
  if (st.elasticity) {
    for (auto g : groups) {
      if (std::find(outcomes.begin(), outcomes.end(), outcome_for(g)) == outcomes.end()) outcomes.push_back(outcome_for(g));
    }
  }

  StudyReport report;
  report.reps = reps;
  report.seed0 = seed0;
  for (const auto& o : st.outcomes) {
    for (int h : st.horizons) report.irf.push_back({o.tag(), h, std::vector<RepEstimate>(static_cast<std::size_t>(reps))});
  }
  if (st.elasticity) {
    for (auto g : groups) {
      for (const auto& rd : RdPoint::all()) {
        if (!reported_in_elasticity(rd)) continue;
        const double flow = flow_elasticity(config.network.sites, g, rd, st.subgroup);
        if (!std::isfinite(flow)) continue;
        for (int hm : el_horizons_min) {
          ElasticityStudyCell cell;
          cell.acuity = g;
          cell.rd = rd.label();
          cell.horizon_min = hm;
          cell.eta_flow = flow;
          cell.eta.assign(static_cast<std::size_t>(reps), kNaN);
          cell.se_eta.assign(static_cast<std::size_t>(reps), kNaN);
          cell.eta_counterfactual.assign(static_cast<std::size_t>(reps), kNaN);
          report.elasticity.push_back(std::move(cell));
        }
      }
    }
  }

  const auto duration = static_cast<EpochMinutes>(std::llround(config.duration_days * 1440.0));
  const StockWindow window{config.network.start, config.network.start + duration};
  IrfOptions irf_opts;
  irf_opts.horizons = st.horizons;
  irf_opts.hc = est.hc;

  for (int r = 0; r < reps; ++r) {
    const auto ri = static_cast<std::size_t>(r);
    try {
      const EventLog log = simulate_network(config.network, duration, seed0 + static_cast<std::uint64_t>(r));
      StockMap stocks;
      for (const auto& s : config.network.sites) stocks.emplace(s.site_id, build_stock_series(log.visits, s.site_id, 1, window));
      std::map<std::string, Panel> panels;
      for (const auto& o : outcomes) panels.emplace(o.tag(), build_panel(log.predictions, stocks, o, popt));

      std::vector<EventTruth> truth;
      if (st.counterfactual_truth) {
        const Panel events = filter_subgroup(panels.begin()->second, st.subgroup);
        truth = counterfactual_truth(log, events, outcomes, truth_horizons, static_cast<std::size_t>(std::max(0, st.max_truth_events)));
      }

      std::string missing;
      for (const auto& o : st.outcomes) {
        const Panel& panel = panels.at(o.tag());
        const auto fit = estimate_irf(panel, st.subgroup, irf_opts);
        for (const auto& f : fit.failures) missing += " " + o.tag() + "@h" + std::to_string(f.horizon) + ": " + f.message;
        for (const auto& e : fit.estimates) {
          for (auto& cell : report.irf) {
            if (cell.outcome != o.tag() || cell.horizon != e.horizon) continue;
            const double tau = st.counterfactual_truth ? pooled_truth(panel, truth, o.tag(), e.horizon, st.subgroup) : kNaN;
            cell.reps[ri] = {e.psi, e.se, tau};
          }
        }
      }

      if (st.elasticity) {
        IrfOptions el_opts;
        el_opts.interact_rd = true;
        el_opts.hc = est.hc;
        el_opts.horizons = el_horizons;
        for (auto g : groups) {
          const auto tag = outcome_for(g).tag();
          const Panel& panel = panels.at(tag);
          const auto fit = estimate_irf(panel, st.subgroup, el_opts);
          const auto rows = elasticity_profile({{g, &panel, &fit.estimates}}, st.subgroup, el_horizons_min);
          for (const auto& row : rows) {
            for (auto& cell : report.elasticity) {
              if (cell.acuity != g || cell.rd != row.rd || cell.horizon_min != row.horizon_min) continue;
              if (row.failure) continue;
              cell.eta[ri] = row.eta;
              cell.se_eta[ri] = row.se_eta;
              if (st.counterfactual_truth) {
                const auto rd = *RdPoint::from_label(row.rd);
                const double tau = pooled_truth(panel, truth, tag, row.horizon_min / popt.grid_min, st.subgroup, rd);
                cell.eta_counterfactual[ri] = (tau / row.control_mean) / (30.0 / row.baseline_wait);
              }
            }
          }
        }
      }
      if (!missing.empty()) throw EstimationError("horizon failures:" + missing);
    } catch (const std::exception& e) {
      report.failures.push_back("rep " + std::to_string(r) + ": " + e.what());
      if (10 * report.failures.size() > static_cast<std::size_t>(reps)) {
        throw StudyAborted("more than 10% of reps failed (" + std::to_string(report.failures.size()) + " of " +
                           std::to_string(reps) + "); last: " + e.what());
      }
    }
    if (progress) progress(r + 1, reps);
  }
  return report;
}

void write_study_irf_csv(std::ostream& out, const StudyReport& report) {
  out << "outcome,horizon,reps_ok,mean_psi,sd_psi,mean_se,mean_truth,bias,se_bias,rmse,coverage_truth,coverage_zero,"
         "share_negative,share_sig_negative\n";
  for (const auto& c : report.irf) {
    out << c.outcome << ',' << c.horizon << ',' << c.ok() << ',' << num(c.mean_psi()) << ',' << num(c.sd_psi()) << ','
        << num(c.mean_se()) << ',' << num(c.mean_truth()) << ',' << num(c.bias()) << ',' << num(c.se_bias()) << ','
        << num(c.rmse()) << ',' << num(c.coverage_truth()) << ',' << num(c.coverage_zero()) << ','
        << num(c.share_negative()) << ',' << num(c.share_significant_negative()) << '\n';
  }
}

void write_study_elasticity_csv(std::ostream& out, const StudyReport& report) {
  out << "acuity_group,rd,horizon_min,reps_ok,mean_eta,se_mean_eta,mean_se_eta,eta_flow,mean_eta_counterfactual,"
         "share_within_2se_of_flow\n";
  for (const auto& c : report.elasticity) {
    out << to_string(c.acuity) << ',' << c.rd << ',' << c.horizon_min << ',' << c.ok() << ',' << num(c.mean_eta())
        << ',' << num(c.se_mean_eta()) << ',' << num(c.mean_se_eta()) << ',' << num(c.eta_flow) << ','
        << num(c.mean_eta_counterfactual()) << ',' << num(c.share_within_2se_of_flow()) << '\n';
  }
}

void write_study_reps_csv(std::ostream& out, const StudyReport& report) {
  out << "rep,seed,outcome,horizon,psi,se,truth\n";
  for (const auto& c : report.irf) {
    for (std::size_t r = 0; r < c.reps.size(); ++r) {
      const auto& e = c.reps[r];
      out << r << ',' << report.seed0 + r << ',' << c.outcome << ',' << c.horizon << ',' << num(e.psi) << ','
          << num(e.se) << ',' << num(e.truth) << '\n';
    }
  }
}

}  // namespace edwait
