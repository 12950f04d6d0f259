#pragma once

// Shared domain vocabulary: sites, triage levels, predictions, visits, stocks.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edwait {

/// Timestamps are timezone-free minutes since 1970-01-01T00:00.
using EpochMinutes = std::int64_t;

inline constexpr int kCtasLevels = 5;
inline constexpr int kDisplayFloorMin = 30;
inline constexpr int kDisplayBlockMin = 30;
inline constexpr int kPredictionCadenceMin = 6;

template <class T>
using PerCtas = std::array<T, kCtasLevels>;

enum class SiteKind { FullED, UrgentCare };

constexpr int display_cap_for(SiteKind kind) { return kind == SiteKind::FullED ? 300 : 180; }

std::string_view to_string(SiteKind kind);
std::optional<SiteKind> parse_site_kind(std::string_view text);

/// Canadian Triage Acuity Scale score; 1 is resuscitation, 5 is non-urgent.
class CtasLevel {
 public:
  explicit CtasLevel(int value);

  int value() const { return value_; }
  std::size_t index() const { return static_cast<std::size_t>(value_ - 1); }

  friend bool operator==(CtasLevel, CtasLevel) = default;
  friend auto operator<=>(CtasLevel, CtasLevel) = default;

 private:
  int value_;
};

/// Affine-in-state wait predictor standing in for the production model.
struct PredictorParams {
  double a0 = 20.0;       // minutes
  double a1 = 0.0;        // minutes per waiting patient
  double a2 = 0.0;        // minutes per treating patient
  double noise_sd = 0.0;  // minutes
};

/// Logistic balking model per CTAS level. An alpha of -infinity disables
/// balking for that level.
struct BalkParams {
  PerCtas<double> alpha{};
  PerCtas<double> beta{};

  static BalkParams disabled();
};

struct SiteConfig {
  std::string site_id;
  SiteKind kind = SiteKind::FullED;
  int display_floor_min = kDisplayFloorMin;
  int display_cap_min = display_cap_for(SiteKind::FullED);
  PerCtas<double> arrival_rates{};     // patients per hour
  std::vector<double> arrival_profile;  // empty, or 24 hourly multipliers
  PerCtas<double> service_mean_min{60, 60, 60, 60, 60};
  int server_count = 1;
  PredictorParams predictor;
  BalkParams balking = BalkParams::disabled();
};

struct ConfigIssue {
  std::string path;
  std::string message;
};

std::vector<ConfigIssue> validate_config(const SiteConfig& cfg, std::string_view path = "");
std::vector<ConfigIssue> validate_sites(std::span<const SiteConfig> sites);

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

std::string describe(std::span<const ConfigIssue> issues);

enum class PredictionSource { Scraped, Vendor, Simulated, Unknown };

std::string_view to_string(PredictionSource source);
PredictionSource parse_prediction_source(std::string_view text);

/// One published prediction. The displayed value is always derived from the
/// granular value by the display rule; it is never stored independently.
class WaitPrediction {
 public:
  WaitPrediction(std::string site_id, EpochMinutes t, double granular_min, int display_cap_min,
                 PredictionSource source = PredictionSource::Unknown);

  const std::string& site_id() const { return site_id_; }
  EpochMinutes t() const { return t_; }
  double granular_min() const { return granular_min_; }
  int coarse_min() const { return coarse_min_; }
  int display_cap_min() const { return display_cap_min_; }
  PredictionSource source() const { return source_; }

  friend bool operator==(const WaitPrediction&, const WaitPrediction&) = default;

 private:
  std::string site_id_;
  EpochMinutes t_;
  double granular_min_;
  int display_cap_min_;
  int coarse_min_;
  PredictionSource source_;
};

class VisitRecord {
 public:
  /// Throws std::invalid_argument when timestamps are out of order or a
  /// balked visit carries a physician time.
  VisitRecord(std::string visit_id, std::string site_id, CtasLevel ctas, EpochMinutes triage_ts,
              std::optional<EpochMinutes> physician_ts, std::optional<EpochMinutes> discharge_ts,
              bool balked = false);

  const std::string& visit_id() const { return visit_id_; }
  const std::string& site_id() const { return site_id_; }
  CtasLevel ctas() const { return ctas_; }
  EpochMinutes triage_ts() const { return triage_ts_; }
  std::optional<EpochMinutes> physician_ts() const { return physician_ts_; }
  std::optional<EpochMinutes> discharge_ts() const { return discharge_ts_; }
  bool balked() const { return balked_; }

  friend bool operator==(const VisitRecord&, const VisitRecord&) = default;

 private:
  std::string visit_id_;
  std::string site_id_;
  CtasLevel ctas_;
  EpochMinutes triage_ts_;
  std::optional<EpochMinutes> physician_ts_;
  std::optional<EpochMinutes> discharge_ts_;
  bool balked_;
};

/// Minute-sampled stocks of waiting (per CTAS) and treating patients.
class StockSeries {
 public:
  StockSeries(std::string site_id, EpochMinutes start, int resolution_min, std::size_t length);

  const std::string& site_id() const { return site_id_; }
  EpochMinutes start() const { return start_; }
  int resolution_min() const { return resolution_; }
  std::size_t size() const { return treating_.size(); }
  EpochMinutes time_at(std::size_t k) const { return start_ + static_cast<EpochMinutes>(k) * resolution_; }
  EpochMinutes end() const { return time_at(size()); }

  /// Sample index for an exact sample time, if inside the series.
  std::optional<std::size_t> index_of(EpochMinutes t) const;

  int waiting(std::size_t k, CtasLevel c) const { return waiting_[k * kCtasLevels + c.index()]; }
  int waiting_total(std::size_t k) const;
  int treating(std::size_t k) const { return treating_[k]; }

  void set(std::size_t k, const PerCtas<int>& waiting, int treating);

 private:
  std::string site_id_;
  EpochMinutes start_;
  int resolution_;
  std::vector<int> waiting_;
  std::vector<int> treating_;
};

}  // namespace edwait
