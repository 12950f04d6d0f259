#include "edwait/core.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "edwait/display.hpp"

namespace edwait {

std::string_view to_string(SiteKind kind) { return kind == SiteKind::FullED ? "ED" : "UC"; }

std::optional<SiteKind> parse_site_kind(std::string_view text) {
  if (text == "ED" || text == "FullED" || text == "full_ed") return SiteKind::FullED;
  if (text == "UC" || text == "UrgentCare" || text == "urgent_care") return SiteKind::UrgentCare;
  return std::nullopt;
}

CtasLevel::CtasLevel(int value) : value_(value) {
  if (value < 1 || value > kCtasLevels) {
    throw std::invalid_argument("CTAS level must be in 1..5, got " + std::to_string(value));
  }
}

BalkParams BalkParams::disabled() {
  BalkParams p;
  p.alpha.fill(-std::numeric_limits<double>::infinity());
  p.beta.fill(0.0);
  return p;
}

namespace {

std::string join_path(std::string_view prefix, std::string_view field) {
  if (prefix.empty()) return std::string(field);
  return std::string(prefix) + "." + std::string(field);
}

std::string indexed(std::string_view base, std::size_t i) {
  return std::string(base) + "[" + std::to_string(i) + "]";
}

}  // namespace

std::vector<ConfigIssue> validate_config(const SiteConfig& cfg, std::string_view path) {
  std::vector<ConfigIssue> issues;
  auto report = [&](std::string field, std::string message) {
    issues.push_back({join_path(path, field), std::move(message)});
  };

  if (cfg.site_id.empty()) report("site_id", "site_id must be non-empty");
  if (cfg.display_floor_min != kDisplayFloorMin) {
    report("display_floor_min", "display floor must be 30, got " + std::to_string(cfg.display_floor_min));
  }
  if (cfg.display_cap_min != display_cap_for(cfg.kind)) {
    report("display_cap_min", "cap mismatch: " + std::string(to_string(cfg.kind)) + " sites display at most " +
                                  std::to_string(display_cap_for(cfg.kind)) + " minutes, got " +
                                  std::to_string(cfg.display_cap_min));
  }
  for (std::size_t c = 0; c < kCtasLevels; ++c) {
    const double rate = cfg.arrival_rates[c];
    if (!std::isfinite(rate) || rate < 0.0) {
      report(indexed("arrival_rates", c), "arrival rate must be finite and ≥ 0");
    }
    const double mean = cfg.service_mean_min[c];
    if (!std::isfinite(mean) || mean <= 0.0) {
      report(indexed("service_mean_min", c), "service mean must be finite and > 0");
    }
    const double alpha = cfg.balking.alpha[c];
    if (std::isnan(alpha) || alpha == std::numeric_limits<double>::infinity()) {
      report(indexed("balking.alpha", c), "balk intercept must be finite or -inf");
    }
    if (!std::isfinite(cfg.balking.beta[c])) {
      report(indexed("balking.beta", c), "balk slope must be finite");
    }
  }
  if (!cfg.arrival_profile.empty()) {
    if (cfg.arrival_profile.size() != 24) {
      report("arrival_profile", "arrival profile needs 24 hourly multipliers, got " +
                                    std::to_string(cfg.arrival_profile.size()));
    } else {
      double total = 0.0;
      for (std::size_t h = 0; h < 24; ++h) {
        const double m = cfg.arrival_profile[h];
        if (!std::isfinite(m) || m < 0.0) report(indexed("arrival_profile", h), "multiplier must be finite and ≥ 0");
        total += m;
      }
      if (!(total > 0.0)) report("arrival_profile", "arrival profile must have positive mass");
    }
  }
  if (cfg.server_count < 1) report("server_count", "server_count ≥ 1 required, got " + std::to_string(cfg.server_count));

  const auto& pr = cfg.predictor;
  if (!std::isfinite(pr.a0)) report("predictor.a0", "must be finite");
  if (!std::isfinite(pr.a1)) report("predictor.a1", "must be finite");
  if (!std::isfinite(pr.a2)) report("predictor.a2", "must be finite");
  if (!std::isfinite(pr.noise_sd) || pr.noise_sd < 0.0) report("predictor.noise_sd", "noise_sd must be ≥ 0");
  return issues;
}

std::vector<ConfigIssue> validate_sites(std::span<const SiteConfig> sites) {
  std::vector<ConfigIssue> issues;
  if (sites.empty()) issues.push_back({"sites", "at least one site is required"});
  std::set<std::string> seen;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto path = indexed("sites", i);
    auto site_issues = validate_config(sites[i], path);
    issues.insert(issues.end(), site_issues.begin(), site_issues.end());
    if (!sites[i].site_id.empty() && !seen.insert(sites[i].site_id).second) {
      issues.push_back({path + ".site_id", "duplicate site_id '" + sites[i].site_id + "'"});
    }
  }
  return issues;
}

std::string describe(std::span<const ConfigIssue> issues) {
  std::string out;
  for (const auto& issue : issues) {
    if (!out.empty()) out += "\n";
    out += issue.path + ": " + issue.message;
  }
  return out;
}

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error("invalid configuration:\n" + describe(issues)), issues_(std::move(issues)) {}

std::string_view to_string(PredictionSource source) {
  switch (source) {
    case PredictionSource::Scraped: return "scraped";
    case PredictionSource::Vendor: return "vendor";
    case PredictionSource::Simulated: return "sim";
    case PredictionSource::Unknown: break;
  }
  return "unknown";
}

PredictionSource parse_prediction_source(std::string_view text) {
  if (text == "scraped") return PredictionSource::Scraped;
  if (text == "vendor") return PredictionSource::Vendor;
  if (text == "sim") return PredictionSource::Simulated;
  return PredictionSource::Unknown;
}

WaitPrediction::WaitPrediction(std::string site_id, EpochMinutes t, double granular_min, int display_cap_min,
                               PredictionSource source)
    : site_id_(std::move(site_id)),
      t_(t),
      granular_min_(granular_min),
      display_cap_min_(display_cap_min),
      coarse_min_(coarsen_wait(granular_min, kDisplayFloorMin, display_cap_min)),
      source_(source) {}

VisitRecord::VisitRecord(std::string visit_id, std::string site_id, CtasLevel ctas, EpochMinutes triage_ts,
                         std::optional<EpochMinutes> physician_ts, std::optional<EpochMinutes> discharge_ts,
                         bool balked)
    : visit_id_(std::move(visit_id)),
      site_id_(std::move(site_id)),
      ctas_(ctas),
      triage_ts_(triage_ts),
      physician_ts_(physician_ts),
      discharge_ts_(discharge_ts),
      balked_(balked) {
  if (physician_ts_ && *physician_ts_ < triage_ts_) {
    throw std::invalid_argument("visit " + visit_id_ + ": physician time precedes triage");
  }
  if (discharge_ts_ && *discharge_ts_ < triage_ts_) {
    throw std::invalid_argument("visit " + visit_id_ + ": discharge precedes triage");
  }
  if (physician_ts_ && discharge_ts_ && *discharge_ts_ < *physician_ts_) {
    throw std::invalid_argument("visit " + visit_id_ + ": discharge precedes physician time");
  }
  if (balked_ && physician_ts_) {
    throw std::invalid_argument("visit " + visit_id_ + ": balked visit cannot have a physician time");
  }
}

StockSeries::StockSeries(std::string site_id, EpochMinutes start, int resolution_min, std::size_t length)
    : site_id_(std::move(site_id)),
      start_(start),
      resolution_(resolution_min),
      waiting_(length * kCtasLevels, 0),
      treating_(length, 0) {
  if (resolution_min < 1) throw std::invalid_argument("stock resolution must be ≥ 1 minute");
}

std::optional<std::size_t> StockSeries::index_of(EpochMinutes t) const {
  if (t < start_) return std::nullopt;
  const EpochMinutes offset = t - start_;
  if (offset % resolution_ != 0) return std::nullopt;
  const auto k = static_cast<std::size_t>(offset / resolution_);
  if (k >= size()) return std::nullopt;
  return k;
}

int StockSeries::waiting_total(std::size_t k) const {
  int total = 0;
  for (std::size_t c = 0; c < kCtasLevels; ++c) total += waiting_[k * kCtasLevels + c];
  return total;
}

void StockSeries::set(std::size_t k, const PerCtas<int>& waiting, int treating) {
  for (std::size_t c = 0; c < kCtasLevels; ++c) waiting_[k * kCtasLevels + c] = waiting[c];
  treating_[k] = treating;
}

}  // namespace edwait
