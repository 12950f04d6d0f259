#pragma once

// Prediction and visit log parsing, and reconstruction of minute-level
// waiting/treating stocks from visit timestamps.

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edwait/core.hpp"

namespace edwait {

/// File-level failure: unreadable file or a header that matches no schema.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RowIssue {
  std::size_t line;  // 1-based line number in the file (header is line 1)
  std::string message;
};

/// Site kinds by id. Sites missing from the map are classified by
/// infer_site_kind().
using SiteKindMap = std::map<std::string, SiteKind, std::less<>>;

/// "UC..." ids are urgent cares; everything else is a full ED.
SiteKind infer_site_kind(std::string_view site_id);
SiteKind lookup_site_kind(const SiteKindMap& kinds, std::string_view site_id);

struct PredictionLog {
  std::vector<WaitPrediction> predictions;  // sorted by (site, t)
  std::vector<RowIssue> warnings;           // displayed-value mismatches and unreadable rows
};

/// Accepts `site_id,timestamp,granular_min[,coarse_min][,source]`. A stored
/// coarse value is cross-checked against the display rule (exact match).
PredictionLog parse_prediction_log(std::istream& in, const SiteKindMap& kinds = {});
PredictionLog parse_prediction_log(const std::filesystem::path& file, const SiteKindMap& kinds = {});

struct VisitLog {
  std::vector<VisitRecord> visits;
  std::vector<RowIssue> rejected;
};

/// Accepts `visit_id,site_id,ctas,triage_ts,physician_ts,discharge_ts`; an
/// empty field is missing. Rows without triage time or with out-of-order
/// timestamps are rejected with a reason.
VisitLog parse_visit_log(std::istream& in);
VisitLog parse_visit_log(const std::filesystem::path& file);

struct StockWindow {
  EpochMinutes start;
  EpochMinutes end;  // exclusive
};

/// Per-minute membership counts sampled every `resolution_min` minutes.
/// A visit waits on [triage, physician), or on [triage, discharge) when no
/// physician time exists, or until the window end when neither exists. It is
/// treated on [physician, discharge or window end). Balked visits and visits
/// of other sites are ignored. Without a window the series spans the earliest
/// triage to one past the latest timestamp.
StockSeries build_stock_series(std::span<const VisitRecord> visits, std::string_view site_id,
                               int resolution_min = 1, std::optional<StockWindow> window = std::nullopt);

void write_predictions_csv(std::ostream& out, std::span<const WaitPrediction> predictions);
/// Balked visits leave no administrative record and are skipped.
void write_visits_csv(std::ostream& out, std::span<const VisitRecord> visits);
void write_stocks_csv(std::ostream& out, const StockSeries& stocks, bool header = true);

}  // namespace edwait
