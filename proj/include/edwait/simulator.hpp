#pragma once

// Discrete-event generator of visit and prediction logs for a network of
// emergency sites whose patients balk against the displayed wait.

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "edwait/core.hpp"
#include "edwait/rng.hpp"

namespace edwait {

struct NetworkConfig {
  EpochMinutes start = 0;
  std::vector<SiteConfig> sites;
};

/// max(0, a0 + a1 * waiting + a2 * treating + N(0, noise_sd)).
double predict_granular_wait(int waiting_count, int treating_count, const PredictorParams& params,
                             RandomStream& rng);

/// logistic(alpha[c] + beta[c] * displayed / 30). `displayed_min` must be a
/// multiple of 30.
double balk_probability(int displayed_min, CtasLevel ctas, const BalkParams& params);

struct DemandElasticity {
  double analytic;  // d log(arrival flow) / d log(displayed wait)
  double discrete;  // (flow ratio change for a +30 step) / (30 / W)
};

/// Elasticity of the admitted arrival flow (1 - p_balk) with respect to the
/// displayed wait at `baseline_displayed_min`.
DemandElasticity true_demand_elasticity(const BalkParams& params, CtasLevel ctas, int baseline_displayed_min,
                                        int floor_min = kDisplayFloorMin, int cap_min = 300);

struct SiteSummary {
  std::string site_id;
  SiteKind kind = SiteKind::FullED;
  PerCtas<std::int64_t> arrivals{};
  PerCtas<std::int64_t> balked{};
  std::int64_t predictions = 0;
  std::int64_t started = 0;
  std::int64_t discharged = 0;
  double total_wait_min = 0.0;  // continuous triage-to-physician time over started visits
};

/// Output sink for one site. Forked counterfactual runs pass no recorder.
struct SiteRecorder {
  std::vector<std::pair<std::int64_t, VisitRecord>> visits;  // keyed by arrival sequence
  std::vector<WaitPrediction> predictions;
};

/// Single-site event engine. Copyable: copying forks the full dynamic state,
/// including every random stream, so a clone replays the same future draws.
class SiteSimulator {
 public:
  SiteSimulator(const SiteConfig& cfg, EpochMinutes start, std::uint64_t seed, std::size_t site_index);

  /// Minutes since the run start.
  double now() const { return now_; }

  /// Processes every arrival and departure strictly before `t`.
  void advance_to(double t, SiteRecorder* recorder);

  double next_prediction_time() const { return next_prediction_; }

  /// Publishes the prediction due at next_prediction_time(). The predictor
  /// noise is drawn either way; `forced_display_min` replaces the displayed
  /// value patients react to until the next prediction.
  void emit_prediction(SiteRecorder* recorder, std::optional<int> forced_display_min = std::nullopt);

  /// Flushes visits still in progress at `end` as censored records.
  void finish(SiteRecorder* recorder);

  int displayed_min() const { return display_; }
  int waiting(CtasLevel c) const { return static_cast<int>(queues_[c.index()].size()); }
  int waiting_total() const;
  int treating() const { return static_cast<int>(servers_.size()); }
  const SiteSummary& summary() const { return summary_; }
  const SiteConfig& config() const { return *cfg_; }

 private:
  struct Patient {
    std::int64_t seq;
    int ctas_index;
    double arrival;
    double service_min;
    double start;
  };
  struct InService {
    double end;
    Patient patient;
  };

  void schedule_arrival(std::size_t c, double from);
  void handle_arrival(std::size_t c, double t, SiteRecorder* recorder);
  void handle_departure(SiteRecorder* recorder);
  void start_service(Patient p, double t);
  void record_visit(const Patient& p, std::optional<double> start, std::optional<double> end, bool balked,
                    SiteRecorder* recorder) const;

  std::shared_ptr<const SiteConfig> cfg_;
  EpochMinutes start_;
  double now_ = 0.0;
  double next_prediction_ = 0.0;
  int display_;
  std::int64_t next_seq_ = 0;

  std::array<double, kCtasLevels> next_arrival_{};
  std::array<double, kCtasLevels> peak_rate_{};  // per minute
  double profile_peak_ = 1.0;
  std::array<double, 24> accept_by_hour_{};

  std::array<RandomStream, kCtasLevels> arrival_rng_;
  RandomStream balk_rng_;
  RandomStream service_rng_;
  RandomStream noise_rng_;

  std::array<std::deque<Patient>, kCtasLevels> queues_;
  std::vector<InService> servers_;  // min-heap on end time
  SiteSummary summary_;
};

struct EventLog {
  std::vector<VisitRecord> visits;  // includes balked arrivals, flagged
  std::vector<WaitPrediction> predictions;
  std::uint64_t seed = 0;
  EpochMinutes duration_min = 0;
  NetworkConfig config;
  std::vector<SiteSummary> summaries;
};

/// Deterministic in (config, duration, seed). Throws ConfigError on an invalid
/// configuration.
EventLog simulate_network(const NetworkConfig& config, EpochMinutes duration_min, std::uint64_t seed);

/// With probability `heap_fraction` moves a prediction to just above the next
/// display step point (step + Uniform(0, 0.5)); the displayed value follows.
std::vector<WaitPrediction> inject_heaping(std::span<const WaitPrediction> predictions, double heap_fraction,
                                           RandomStream& rng);

}  // namespace edwait
