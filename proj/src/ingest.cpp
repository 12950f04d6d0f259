#include "edwait/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "edwait/csv.hpp"
#include "edwait/timefmt.hpp"

namespace edwait {
namespace {

std::ifstream open_or_throw(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  return in;
}

std::vector<std::string> normalized_header(std::istream& in, std::size_t& line_no, std::string_view what) {
  std::vector<std::string> header;
  if (!csv::read_row(in, header, line_no)) throw DataError(std::string(what) + ": empty file, header expected");
  for (auto& h : header) h = csv::trim(h);
  return header;
}

std::optional<EpochMinutes> parse_optional_ts(const std::string& field) {
  const auto text = csv::trim(field);
  if (text.empty()) return std::nullopt;
  return parse_iso_minutes(text);
}

}  // namespace

SiteKind infer_site_kind(std::string_view site_id) {
  return site_id.substr(0, 2) == "UC" ? SiteKind::UrgentCare : SiteKind::FullED;
}

SiteKind lookup_site_kind(const SiteKindMap& kinds, std::string_view site_id) {
  if (auto it = kinds.find(site_id); it != kinds.end()) return it->second;
  return infer_site_kind(site_id);
}

PredictionLog parse_prediction_log(std::istream& in, const SiteKindMap& kinds) {
  std::size_t line_no = 0;
  const auto header = normalized_header(in, line_no, "predictions");

  if (header.size() < 3 || header[0] != "site_id" || header[1] != "timestamp" || header[2] != "granular_min") {
    throw DataError("predictions: header must start with site_id,timestamp,granular_min");
  }
  std::optional<std::size_t> coarse_col;
  std::optional<std::size_t> source_col;
  for (std::size_t i = 3; i < header.size(); ++i) {
    if (header[i] == "coarse_min" && !coarse_col && !source_col) {
      coarse_col = i;
    } else if (header[i] == "source" && !source_col) {
      source_col = i;
    } else {
      throw DataError("predictions: unexpected column '" + header[i] + "'");
    }
  }

  PredictionLog log;
  std::vector<std::string> row;
  while (csv::read_row(in, row, line_no)) {
    if (row.size() != header.size()) {
      log.warnings.push_back({line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                           std::to_string(row.size()) + "; row skipped"});
      continue;
    }
    const std::string site = csv::trim(row[0]);
    const auto granular = csv::parse_double(row[2]);
    if (site.empty() || !granular || !(*granular >= 0.0) || !std::isfinite(*granular)) {
      log.warnings.push_back({line_no, "unreadable site or granular value; row skipped"});
      continue;
    }
    EpochMinutes t = 0;
    try {
      t = parse_iso_minutes(csv::trim(row[1]));
    } catch (const std::invalid_argument& e) {
      log.warnings.push_back({line_no, std::string(e.what()) + "; row skipped"});
      continue;
    }
    const auto source = source_col ? parse_prediction_source(csv::trim(row[*source_col])) : PredictionSource::Unknown;
    WaitPrediction prediction(site, t, *granular, display_cap_for(lookup_site_kind(kinds, site)), source);

    if (coarse_col) {
      const auto stored_text = csv::trim(row[*coarse_col]);
      if (!stored_text.empty()) {
        const auto stored = csv::parse_double(stored_text);
        if (!stored || *stored != static_cast<double>(prediction.coarse_min())) {
          log.warnings.push_back({line_no, "stored coarse_min " + stored_text + " disagrees with display rule (" +
                                               std::to_string(prediction.coarse_min()) + " for granular " +
                                               csv::format_double(*granular) + ")"});
        }
      }
    }
    log.predictions.push_back(std::move(prediction));
  }
  std::stable_sort(log.predictions.begin(), log.predictions.end(), [](const auto& a, const auto& b) {
    return a.site_id() != b.site_id() ? a.site_id() < b.site_id() : a.t() < b.t();
  });
  return log;
}

PredictionLog parse_prediction_log(const std::filesystem::path& file, const SiteKindMap& kinds) {
  auto in = open_or_throw(file);
  return parse_prediction_log(in, kinds);
}

VisitLog parse_visit_log(std::istream& in) {
  std::size_t line_no = 0;
  const auto header = normalized_header(in, line_no, "visits");
  const std::vector<std::string> expected{"visit_id", "site_id", "ctas", "triage_ts", "physician_ts", "discharge_ts"};
  if (header != expected) {
    throw DataError("visits: header must be visit_id,site_id,ctas,triage_ts,physician_ts,discharge_ts");
  }

  VisitLog log;
  std::vector<std::string> row;
  while (csv::read_row(in, row, line_no)) {
    if (row.size() != expected.size()) {
      log.rejected.push_back({line_no, "expected 6 fields, got " + std::to_string(row.size())});
      continue;
    }
    try {
      const auto triage = parse_optional_ts(row[3]);
      if (!triage) {
        log.rejected.push_back({line_no, "missing triage_ts"});
        continue;
      }
      const auto ctas = csv::parse_int(row[2]);
      if (!ctas) {
        log.rejected.push_back({line_no, "unreadable ctas '" + row[2] + "'"});
        continue;
      }
      log.visits.emplace_back(csv::trim(row[0]), csv::trim(row[1]), CtasLevel(static_cast<int>(*ctas)), *triage,
                              parse_optional_ts(row[4]), parse_optional_ts(row[5]));
    } catch (const std::invalid_argument& e) {
      log.rejected.push_back({line_no, e.what()});
    }
  }
  return log;
}

VisitLog parse_visit_log(const std::filesystem::path& file) {
  auto in = open_or_throw(file);
  return parse_visit_log(in);
}

StockSeries build_stock_series(std::span<const VisitRecord> visits, std::string_view site_id, int resolution_min,
                               std::optional<StockWindow> window) {
  if (resolution_min < 1) throw std::invalid_argument("stock resolution must be ≥ 1 minute");

  if (!window) {
    EpochMinutes lo = std::numeric_limits<EpochMinutes>::max();
    EpochMinutes hi = std::numeric_limits<EpochMinutes>::min();
    for (const auto& v : visits) {
      if (v.site_id() != site_id || v.balked()) continue;
      lo = std::min(lo, v.triage_ts());
      hi = std::max({hi, v.triage_ts(), v.physician_ts().value_or(hi), v.discharge_ts().value_or(hi)});
    }
    window = lo <= hi ? StockWindow{lo, hi + 1} : StockWindow{0, 0};
  }
  const EpochMinutes start = window->start;
  const EpochMinutes end = std::max(window->end, start);
  const auto minutes = static_cast<std::size_t>(end - start);

  // Difference arrays over [start, end]; entry k changes the count at minute start + k.
  std::vector<int> d_wait((minutes + 1) * kCtasLevels, 0);
  std::vector<int> d_treat(minutes + 1, 0);
  auto add_interval = [&](EpochMinutes from, EpochMinutes to, auto&& bump) {
    from = std::max(from, start);
    to = std::min(to, end);
    if (from >= to) return;
    bump(static_cast<std::size_t>(from - start), +1);
    bump(static_cast<std::size_t>(to - start), -1);
  };

  for (const auto& v : visits) {
    if (v.site_id() != site_id || v.balked()) continue;
    const std::size_t c = v.ctas().index();
    const EpochMinutes wait_end = v.physician_ts().value_or(v.discharge_ts().value_or(end));
    add_interval(v.triage_ts(), wait_end, [&](std::size_t k, int s) { d_wait[k * kCtasLevels + c] += s; });
    if (v.physician_ts()) {
      add_interval(*v.physician_ts(), v.discharge_ts().value_or(end), [&](std::size_t k, int s) { d_treat[k] += s; });
    }
  }

  const std::size_t samples = (minutes + static_cast<std::size_t>(resolution_min) - 1) / resolution_min;
  StockSeries series(std::string(site_id), start, resolution_min, samples);
  PerCtas<int> waiting{};
  int treating = 0;
  std::size_t next_sample = 0;
  for (std::size_t k = 0; k < minutes && next_sample < samples; ++k) {
    for (std::size_t c = 0; c < kCtasLevels; ++c) waiting[c] += d_wait[k * kCtasLevels + c];
    treating += d_treat[k];
    if (k == next_sample * static_cast<std::size_t>(resolution_min)) {
      series.set(next_sample, waiting, treating);
      ++next_sample;
    }
  }
  return series;
}

void write_predictions_csv(std::ostream& out, std::span<const WaitPrediction> predictions) {
  out << "site_id,timestamp,granular_min,coarse_min,source\n";
  for (const auto& p : predictions) {
    out << p.site_id() << ',' << format_iso_minutes(p.t()) << ',' << csv::format_double(p.granular_min()) << ','
        << p.coarse_min() << ',' << to_string(p.source()) << '\n';
  }
}

void write_visits_csv(std::ostream& out, std::span<const VisitRecord> visits) {
  out << "visit_id,site_id,ctas,triage_ts,physician_ts,discharge_ts\n";
  auto ts = [](std::optional<EpochMinutes> t) { return t ? format_iso_minutes(*t) : std::string(); };
  for (const auto& v : visits) {
    if (v.balked()) continue;
    out << v.visit_id() << ',' << v.site_id() << ',' << v.ctas().value() << ',' << format_iso_minutes(v.triage_ts())
        << ',' << ts(v.physician_ts()) << ',' << ts(v.discharge_ts()) << '\n';
  }
}

void write_stocks_csv(std::ostream& out, const StockSeries& stocks, bool header) {
  if (header) out << "site_id,timestamp,ctas,waiting,treating_total\n";
  for (std::size_t k = 0; k < stocks.size(); ++k) {
    const auto stamp = format_iso_minutes(stocks.time_at(k));
    for (int c = 1; c <= kCtasLevels; ++c) {
      out << stocks.site_id() << ',' << stamp << ',' << c << ',' << stocks.waiting(k, CtasLevel(c)) << ','
          << stocks.treating(k) << '\n';
    }
  }
}

}  // namespace edwait
