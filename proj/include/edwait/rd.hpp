#pragma once

// Regression-discontinuity event panel built around the display step points.

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edwait/core.hpp"
#include "edwait/ingest.hpp"

namespace edwait {

inline constexpr int kRdPointCount = 9;

/// One of the nine points where the display steps up by 30 minutes. Point j
/// (1..9) separates displays 30j and 30(j+1) at granular value 30j + 27; the
/// step into the floor block is censored and never a point.
class RdPoint {
 public:
  explicit RdPoint(int j);

  static std::optional<RdPoint> from_label(std::string_view label);
  static std::vector<RdPoint> all();

  int index() const { return j_; }
  double cutoff() const { return 30.0 * j_ + 27.0; }
  int control_display_min() const { return 30 * j_; }
  int treated_display_min() const { return 30 * (j_ + 1); }
  std::string label() const;

  friend bool operator==(RdPoint, RdPoint) = default;
  friend auto operator<=>(RdPoint, RdPoint) = default;

 private:
  int j_;
};

struct RdAssignment {
  RdPoint rd;
  bool treated;
  double forcing;  // granular - cutoff, in (-bandwidth, bandwidth)
};

/// The point whose band (c - bw, c + bw) contains the granular value, if any.
/// Points whose treated display would exceed the site cap are not available.
std::optional<RdAssignment> assign_rd(double granular_min, int display_cap_min, double bandwidth = 3.0);
std::optional<RdAssignment> assign_rd(const WaitPrediction& prediction, double bandwidth = 3.0);

enum class OutcomeKind { WaitingTotal, WaitingCtas, WaitingLowAcuity, WaitingHighAcuity, Treating };

struct OutcomeSelector {
  OutcomeKind kind = OutcomeKind::WaitingTotal;
  int ctas = 0;  // only for WaitingCtas

  /// "waiting", "waiting_ctas1".."waiting_ctas5", "waiting_low" (CTAS 3-5),
  /// "waiting_high" (CTAS 1-2), "treating".
  std::string tag() const;
  static std::optional<OutcomeSelector> parse(std::string_view tag);
  static std::vector<OutcomeSelector> standard_set();

  friend bool operator==(const OutcomeSelector&, const OutcomeSelector&) = default;
};

int outcome_value(const StockSeries& stocks, std::size_t k, const OutcomeSelector& outcome);

enum class LagSource { SameOutcome, TotalWaiting };

struct PanelOptions {
  double bandwidth = 3.0;
  int grid_min = 5;
  int leads = 36;
  int lags = 14;
  LagSource lag_source = LagSource::SameOutcome;
  bool require_full_coverage = true;  // otherwise missing leads are NaN and drop per horizon
};

struct PanelObservation {
  std::string site_id;
  SiteKind site_kind = SiteKind::FullED;
  EpochMinutes t = 0;
  RdPoint rd{1};
  bool treated = false;
  double forcing = 0.0;
  double granular_min = 0.0;
  int coarse_min = 0;
  double y_now = 0.0;           // outcome at t
  std::vector<double> y_lead;   // outcome at t + grid*h, h = 1..leads
  std::vector<double> y_lag;    // lag regressor at t - grid*l, l = 1..lags
};

struct RdCellCount {
  std::size_t control = 0;
  std::size_t treated = 0;
};

struct Panel {
  OutcomeSelector outcome;
  PanelOptions options;
  std::vector<PanelObservation> observations;
  std::map<int, RdCellCount> counts_by_rd;  // keyed by RdPoint::index()
  std::size_t in_band_events = 0;
  std::size_t dropped_no_stocks = 0;
  std::size_t dropped_coverage = 0;
};

class EmptyPanelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using StockMap = std::map<std::string, StockSeries, std::less<>>;

/// One observation per prediction that falls in an RD band and has stock
/// coverage for its lags (and leads, when full coverage is required).
/// Throws EmptyPanelError naming the filter that removed every event.
Panel build_panel(std::span<const WaitPrediction> predictions, const StockMap& stocks,
                  const OutcomeSelector& outcome, const PanelOptions& options = {});

enum class Subgroup { All, ED, UC };
std::string_view to_string(Subgroup s);
std::optional<Subgroup> parse_subgroup(std::string_view text);

Panel filter_subgroup(const Panel& panel, Subgroup subgroup);

void write_panel_csv(std::ostream& out, const Panel& panel);

struct HeapingBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double neighbor_median = 0.0;
  bool flagged = false;
  bool integer_bin = false;   // bin starts at a whole minute of forcing
  bool boundary_bin = false;  // bin lies in [0, 0.5) just above the step point
};

struct HeapingReport {
  std::vector<HeapingBin> bins;
  std::size_t n = 0;
  bool integer_heaping = false;
  bool boundary_heaping = false;
};

class DiagnosticDeclined : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Histogram of forcing values on [-bandwidth, bandwidth). A bin is flagged
/// when its count exceeds three times the median of its 8 nearest bins.
/// Requires at least 100 observations.
HeapingReport heaping_diagnostic(std::span<const double> forcing, double bin_width = 0.25, double bandwidth = 3.0);
HeapingReport heaping_diagnostic(const Panel& panel, double bin_width = 0.25);
HeapingReport heaping_diagnostic(std::span<const WaitPrediction> predictions, double bin_width = 0.25,
                                 double bandwidth = 3.0);

void write_heaping_csv(std::ostream& out, const HeapingReport& report);

}  // namespace edwait
