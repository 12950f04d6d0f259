#include "edwait/rd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "edwait/csv.hpp"
#include "edwait/timefmt.hpp"

namespace edwait {

RdPoint::RdPoint(int j) : j_(j) {
  if (j < 1 || j > kRdPointCount) throw std::invalid_argument("RD point index must be in 1..9");
}

std::optional<RdPoint> RdPoint::from_label(std::string_view label) {
  for (const auto& rd : all()) {
    if (rd.label() == label) return rd;
  }
  return std::nullopt;
}

std::vector<RdPoint> RdPoint::all() {
  std::vector<RdPoint> points;
  for (int j = 1; j <= kRdPointCount; ++j) points.emplace_back(j);
  return points;
}

std::string RdPoint::label() const {
  return std::to_string(control_display_min()) + "-" + std::to_string(treated_display_min());
}

std::optional<RdAssignment> assign_rd(double granular_min, int display_cap_min, double bandwidth) {
  if (!std::isfinite(granular_min) || !(bandwidth > 0.0) || bandwidth > 15.0) return std::nullopt;
  const long j = std::lround((granular_min - 27.0) / 30.0);
  if (j < 1 || j > kRdPointCount) return std::nullopt;
  const RdPoint rd(static_cast<int>(j));
  if (rd.treated_display_min() > display_cap_min) return std::nullopt;
  const double forcing = granular_min - rd.cutoff();
  if (!(forcing > -bandwidth && forcing < bandwidth)) return std::nullopt;
  return RdAssignment{rd, forcing >= 0.0, forcing};
}

std::optional<RdAssignment> assign_rd(const WaitPrediction& prediction, double bandwidth) {
  return assign_rd(prediction.granular_min(), prediction.display_cap_min(), bandwidth);
}

std::string OutcomeSelector::tag() const {
  switch (kind) {
    case OutcomeKind::WaitingTotal: return "waiting";
    case OutcomeKind::WaitingCtas: return "waiting_ctas" + std::to_string(ctas);
    case OutcomeKind::WaitingLowAcuity: return "waiting_low";
    case OutcomeKind::WaitingHighAcuity: return "waiting_high";
    case OutcomeKind::Treating: return "treating";
  }
  return "unknown";
}

std::optional<OutcomeSelector> OutcomeSelector::parse(std::string_view tag) {
  if (tag == "waiting") return OutcomeSelector{OutcomeKind::WaitingTotal, 0};
  if (tag == "waiting_low") return OutcomeSelector{OutcomeKind::WaitingLowAcuity, 0};
  if (tag == "waiting_high") return OutcomeSelector{OutcomeKind::WaitingHighAcuity, 0};
  if (tag == "treating") return OutcomeSelector{OutcomeKind::Treating, 0};
  if (tag.size() == 13 && tag.substr(0, 12) == "waiting_ctas" && tag[12] >= '1' && tag[12] <= '5') {
    return OutcomeSelector{OutcomeKind::WaitingCtas, tag[12] - '0'};
  }
  return std::nullopt;
}

std::vector<OutcomeSelector> OutcomeSelector::standard_set() {
  std::vector<OutcomeSelector> set{{OutcomeKind::WaitingTotal, 0}};
  for (int c = 1; c <= kCtasLevels; ++c) set.push_back({OutcomeKind::WaitingCtas, c});
  set.push_back({OutcomeKind::Treating, 0});
  return set;
}

int outcome_value(const StockSeries& stocks, std::size_t k, const OutcomeSelector& outcome) {
  switch (outcome.kind) {
    case OutcomeKind::WaitingTotal: return stocks.waiting_total(k);
    case OutcomeKind::WaitingCtas: return stocks.waiting(k, CtasLevel(outcome.ctas));
    case OutcomeKind::WaitingLowAcuity:
      return stocks.waiting(k, CtasLevel(3)) + stocks.waiting(k, CtasLevel(4)) + stocks.waiting(k, CtasLevel(5));
    case OutcomeKind::WaitingHighAcuity: return stocks.waiting(k, CtasLevel(1)) + stocks.waiting(k, CtasLevel(2));
    case OutcomeKind::Treating: return stocks.treating(k);
  }
  return 0;
}

Panel build_panel(std::span<const WaitPrediction> predictions, const StockMap& stocks,
                  const OutcomeSelector& outcome, const PanelOptions& options) {
  if (options.grid_min < 1 || options.leads < 1 || options.lags < 0) {
    throw std::invalid_argument("panel grid, leads and lags must be positive");
  }
  Panel panel;
  panel.outcome = outcome;
  panel.options = options;
  const OutcomeSelector lag_outcome =
      options.lag_source == LagSource::TotalWaiting ? OutcomeSelector{OutcomeKind::WaitingTotal, 0} : outcome;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (const auto& p : predictions) {
    const auto assignment = assign_rd(p, options.bandwidth);
    if (!assignment) continue;
    ++panel.in_band_events;

    const auto it = stocks.find(p.site_id());
    if (it == stocks.end()) {
      ++panel.dropped_no_stocks;
      continue;
    }
    const StockSeries& s = it->second;
    const auto at = [&](EpochMinutes t) { return s.index_of(t); };

    const auto now = at(p.t());
    bool lags_ok = now.has_value();
    for (int l = 1; lags_ok && l <= options.lags; ++l) lags_ok = at(p.t() - EpochMinutes{options.grid_min} * l).has_value();
    const bool leads_ok = at(p.t() + EpochMinutes{options.grid_min} * options.leads).has_value();
    if (!lags_ok || (options.require_full_coverage && !leads_ok)) {
      ++panel.dropped_coverage;
      continue;
    }

    PanelObservation obs;
    obs.site_id = p.site_id();
    obs.site_kind = p.display_cap_min() == display_cap_for(SiteKind::UrgentCare) ? SiteKind::UrgentCare : SiteKind::FullED;
    obs.t = p.t();
    obs.rd = assignment->rd;
    obs.treated = assignment->treated;
    obs.forcing = assignment->forcing;
    obs.granular_min = p.granular_min();
    obs.coarse_min = p.coarse_min();
    obs.y_now = outcome_value(s, *now, outcome);
    obs.y_lead.resize(static_cast<std::size_t>(options.leads), nan);
    for (int h = 1; h <= options.leads; ++h) {
      if (auto k = at(p.t() + EpochMinutes{options.grid_min} * h)) {
        obs.y_lead[static_cast<std::size_t>(h - 1)] = outcome_value(s, *k, outcome);
      }
    }
    obs.y_lag.resize(static_cast<std::size_t>(options.lags));
    for (int l = 1; l <= options.lags; ++l) {
      obs.y_lag[static_cast<std::size_t>(l - 1)] = outcome_value(s, *at(p.t() - EpochMinutes{options.grid_min} * l), lag_outcome);
    }

    auto& cell = panel.counts_by_rd[obs.rd.index()];
    (obs.treated ? cell.treated : cell.control) += 1;
    panel.observations.push_back(std::move(obs));
  }

  if (panel.observations.empty()) {
    if (panel.in_band_events == 0) {
      throw EmptyPanelError("empty panel: no prediction fell inside an RD band (bandwidth " +
                            csv::format_double(options.bandwidth) + ")");
    }
    if (panel.dropped_no_stocks == panel.in_band_events) {
      throw EmptyPanelError("empty panel: no stock series for any site with RD events");
    }
    throw EmptyPanelError("empty panel: all " + std::to_string(panel.in_band_events) +
                          " RD events lacked stock coverage for the lag/lead window");
  }
  return panel;
}

std::string_view to_string(Subgroup s) {
  switch (s) {
    case Subgroup::All: return "all";
    case Subgroup::ED: return "ED";
    case Subgroup::UC: return "UC";
  }
  return "all";
}

std::optional<Subgroup> parse_subgroup(std::string_view text) {
  if (text == "all") return Subgroup::All;
  if (text == "ED" || text == "ed") return Subgroup::ED;
  if (text == "UC" || text == "uc") return Subgroup::UC;
  return std::nullopt;
}

Panel filter_subgroup(const Panel& panel, Subgroup subgroup) {
  if (subgroup == Subgroup::All) return panel;
  Panel out;
  out.outcome = panel.outcome;
  out.options = panel.options;
  const SiteKind keep = subgroup == Subgroup::ED ? SiteKind::FullED : SiteKind::UrgentCare;
  for (const auto& obs : panel.observations) {
    if (obs.site_kind != keep) continue;
    auto& cell = out.counts_by_rd[obs.rd.index()];
    (obs.treated ? cell.treated : cell.control) += 1;
    out.observations.push_back(obs);
  }
  out.in_band_events = out.observations.size();
  return out;
}

void write_panel_csv(std::ostream& out, const Panel& panel) {
  out << "site_id,timestamp,rd,treated,forcing,outcome,y_now";
  for (int h = 1; h <= panel.options.leads; ++h) out << ",lead_" << h;
  for (int l = 1; l <= panel.options.lags; ++l) out << ",lag_" << l;
  out << '\n';
  const auto tag = panel.outcome.tag();
  for (const auto& obs : panel.observations) {
    out << obs.site_id << ',' << format_iso_minutes(obs.t) << ',' << obs.rd.label() << ',' << (obs.treated ? 1 : 0)
        << ',' << csv::format_double(obs.forcing) << ',' << tag << ',' << csv::format_double(obs.y_now);
    for (double y : obs.y_lead) out << ',' << (std::isnan(y) ? std::string() : csv::format_double(y));
    for (double y : obs.y_lag) out << ',' << csv::format_double(y);
    out << '\n';
  }
}

HeapingReport heaping_diagnostic(std::span<const double> forcing, double bin_width, double bandwidth) {
  if (forcing.size() < 100) {
    throw DiagnosticDeclined("heaping diagnostic needs at least 100 observations, got " +
                             std::to_string(forcing.size()));
  }
  if (!(bin_width > 0.0) || !(bandwidth > 0.0)) throw std::invalid_argument("bin width and bandwidth must be positive");

  const auto nbins = static_cast<std::size_t>(std::llround(2.0 * bandwidth / bin_width));
  if (nbins < 9) throw std::invalid_argument("heaping diagnostic needs at least 9 bins");
  HeapingReport report;
  report.bins.resize(nbins);
  for (std::size_t i = 0; i < nbins; ++i) {
    auto& b = report.bins[i];
    b.lo = -bandwidth + bin_width * static_cast<double>(i);
    b.hi = b.lo + bin_width;
    b.integer_bin = std::abs(b.lo - std::round(b.lo)) < 1e-9;
    b.boundary_bin = b.lo >= -1e-9 && b.hi <= 0.5 + 1e-9;
  }
  for (double f : forcing) {
    if (!(f >= -bandwidth && f < bandwidth)) continue;
    auto i = static_cast<std::size_t>(std::floor((f + bandwidth) / bin_width));
    report.bins[std::min(i, nbins - 1)].count += 1;
    ++report.n;
  }

  for (std::size_t i = 0; i < nbins; ++i) {
    // The 8 nearest other bins, shifting the window inward at the edges.
    std::size_t lo = i >= 4 ? i - 4 : 0;
    if (lo + 8 >= nbins) lo = nbins - 9;
    std::vector<double> neighbors;
    for (std::size_t k = lo; k <= lo + 8; ++k) {
      if (k != i) neighbors.push_back(static_cast<double>(report.bins[k].count));
    }
    if (neighbors.size() > 8) neighbors.pop_back();
    std::sort(neighbors.begin(), neighbors.end());
    const double median = 0.5 * (neighbors[3] + neighbors[4]);
    auto& b = report.bins[i];
    b.neighbor_median = median;
    b.flagged = static_cast<double>(b.count) > 3.0 * median;
  }

  std::size_t integer_bins = 0;
  std::size_t integer_flagged = 0;
  bool upper_boundary_flagged = false;
  bool zero_bin_flagged = false;
  for (const auto& b : report.bins) {
    if (b.integer_bin && !b.boundary_bin) {
      ++integer_bins;
      if (b.flagged) ++integer_flagged;
    }
    if (b.boundary_bin && !b.integer_bin && b.flagged) upper_boundary_flagged = true;
    if (b.boundary_bin && b.integer_bin && b.flagged) zero_bin_flagged = true;
  }
  report.integer_heaping = integer_bins > 0 && 2 * integer_flagged >= integer_bins;
  report.boundary_heaping = upper_boundary_flagged || (zero_bin_flagged && !report.integer_heaping);
  return report;
}

HeapingReport heaping_diagnostic(const Panel& panel, double bin_width) {
  std::vector<double> forcing;
  forcing.reserve(panel.observations.size());
  for (const auto& obs : panel.observations) forcing.push_back(obs.forcing);
  return heaping_diagnostic(forcing, bin_width, panel.options.bandwidth);
}

HeapingReport heaping_diagnostic(std::span<const WaitPrediction> predictions, double bin_width, double bandwidth) {
  std::vector<double> forcing;
  for (const auto& p : predictions) {
    if (auto a = assign_rd(p, bandwidth)) forcing.push_back(a->forcing);
  }
  return heaping_diagnostic(forcing, bin_width, bandwidth);
}

void write_heaping_csv(std::ostream& out, const HeapingReport& report) {
  out << "bin_lo,bin_hi,count,neighbor_median,flagged,kind\n";
  for (const auto& b : report.bins) {
    std::string kind;
    if (b.flagged) {
      if (b.integer_bin) kind = "integer";
      if (b.boundary_bin) kind += kind.empty() ? "boundary" : "+boundary";
      if (kind.empty()) kind = "other";
    }
    out << csv::format_double(b.lo) << ',' << csv::format_double(b.hi) << ',' << b.count << ','
        << csv::format_double(b.neighbor_median) << ',' << (b.flagged ? 1 : 0) << ',' << kind << '\n';
  }
}

}  // namespace edwait
