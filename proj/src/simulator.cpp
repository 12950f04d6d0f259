#include "edwait/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "edwait/display.hpp"

namespace edwait {
namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

enum StreamId : std::uint64_t { kArrivalBase = 0, kBalk = 5, kService = 6, kNoise = 7 };

bool later_end(const auto& a, const auto& b) { return a.end > b.end; }

}  // namespace

double predict_granular_wait(int waiting_count, int treating_count, const PredictorParams& params,
                             RandomStream& rng) {
  double value = params.a0 + params.a1 * waiting_count + params.a2 * treating_count;
  if (params.noise_sd > 0.0) value += params.noise_sd * rng.normal();
  return std::max(0.0, value);
}

double balk_probability(int displayed_min, CtasLevel ctas, const BalkParams& params) {
  if (displayed_min % kDisplayBlockMin != 0) {
    throw std::invalid_argument("displayed wait must be a multiple of 30, got " + std::to_string(displayed_min));
  }
  const double alpha = params.alpha[ctas.index()];
  if (alpha == -std::numeric_limits<double>::infinity()) return 0.0;
  return logistic(alpha + params.beta[ctas.index()] * (displayed_min / 30.0));
}

DemandElasticity true_demand_elasticity(const BalkParams& params, CtasLevel ctas, int baseline_displayed_min,
                                        int floor_min, int cap_min) {
  if (baseline_displayed_min < floor_min || baseline_displayed_min > cap_min) {
    throw std::invalid_argument("baseline display " + std::to_string(baseline_displayed_min) +
                                " outside [" + std::to_string(floor_min) + ", " + std::to_string(cap_min) + "]");
  }
  const double w = baseline_displayed_min;
  const double p0 = balk_probability(baseline_displayed_min, ctas, params);
  const double p1 = balk_probability(baseline_displayed_min + kDisplayBlockMin, ctas, params);
  DemandElasticity out{};
  // d(1-p)/dW = -beta p (1-p) / 30, so the log-log slope is -beta p W / 30.
  out.analytic = -params.beta[ctas.index()] * p0 * w / 30.0;
  out.discrete = ((1.0 - p1) - (1.0 - p0)) / (1.0 - p0) / (30.0 / w);
  return out;
}

SiteSimulator::SiteSimulator(const SiteConfig& cfg, EpochMinutes start, std::uint64_t seed,
                             std::size_t site_index)
    : cfg_(std::make_shared<const SiteConfig>(cfg)),
      start_(start),
      display_(cfg.display_floor_min) {
  if (auto issues = validate_config(cfg); !issues.empty()) throw ConfigError(std::move(issues));

  RandomStream site_seeder(seed, 0x51730000ULL + site_index);
  const std::uint64_t site_seed = site_seeder.next_u64();
  for (std::size_t c = 0; c < kCtasLevels; ++c) arrival_rng_[c] = RandomStream(site_seed, kArrivalBase + c);
  balk_rng_ = RandomStream(site_seed, kBalk);
  service_rng_ = RandomStream(site_seed, kService);
  noise_rng_ = RandomStream(site_seed, kNoise);

  if (!cfg.arrival_profile.empty()) {
    const double mean = std::accumulate(cfg.arrival_profile.begin(), cfg.arrival_profile.end(), 0.0) / 24.0;
    profile_peak_ = *std::max_element(cfg.arrival_profile.begin(), cfg.arrival_profile.end()) / mean;
    for (std::size_t h = 0; h < 24; ++h) accept_by_hour_[h] = cfg.arrival_profile[h] / mean / profile_peak_;
  }
  summary_.site_id = cfg.site_id;
  summary_.kind = cfg.kind;
  servers_.reserve(static_cast<std::size_t>(cfg.server_count));
  for (std::size_t c = 0; c < kCtasLevels; ++c) {
    peak_rate_[c] = cfg.arrival_rates[c] / 60.0 * profile_peak_;
    schedule_arrival(c, 0.0);
  }
}

int SiteSimulator::waiting_total() const {
  int total = 0;
  for (const auto& q : queues_) total += static_cast<int>(q.size());
  return total;
}

void SiteSimulator::schedule_arrival(std::size_t c, double from) {
  next_arrival_[c] = peak_rate_[c] > 0.0 ? from + arrival_rng_[c].exponential(1.0 / peak_rate_[c]) : kNever;
}

void SiteSimulator::advance_to(double t, SiteRecorder* recorder) {
  for (;;) {
    std::size_t c_next = 0;
    for (std::size_t c = 1; c < kCtasLevels; ++c) {
      if (next_arrival_[c] < next_arrival_[c_next]) c_next = c;
    }
    const double t_arrival = next_arrival_[c_next];
    const double t_departure = servers_.empty() ? kNever : servers_.front().end;
    const double t_next = std::min(t_arrival, t_departure);
    if (!(t_next < t)) break;
    if (t_departure <= t_arrival) {
      now_ = t_departure;
      handle_departure(recorder);
    } else {
      now_ = t_arrival;
      handle_arrival(c_next, t_arrival, recorder);
    }
  }
  now_ = std::max(now_, t);
}

void SiteSimulator::handle_arrival(std::size_t c, double t, SiteRecorder* recorder) {
  const auto& cfg = *cfg_;
  schedule_arrival(c, t);
  if (!cfg.arrival_profile.empty()) {
    const double minute_of_day = std::fmod(static_cast<double>(start_ % 1440) + t, 1440.0);
    const auto hour = static_cast<std::size_t>(minute_of_day / 60.0) % 24;
    const double accept = accept_by_hour_[hour];
    // The thinning draw comes from the arrival stream so that it never
    // depends on the displayed wait.
    if (arrival_rng_[c].uniform() >= accept) return;
  }

  Patient p{next_seq_++, static_cast<int>(c), t, 0.0, 0.0};
  const double u_balk = balk_rng_.uniform();
  p.service_min = service_rng_.exponential(cfg.service_mean_min[c]);
  ++summary_.arrivals[c];

  const CtasLevel level(static_cast<int>(c) + 1);
  if (u_balk < balk_probability(display_, level, cfg.balking)) {
    ++summary_.balked[c];
    record_visit(p, std::nullopt, std::nullopt, true, recorder);
    return;
  }
  if (static_cast<int>(servers_.size()) < cfg.server_count) {
    start_service(p, t);
  } else {
    queues_[c].push_back(p);
  }
}

void SiteSimulator::start_service(Patient p, double t) {
  p.start = t;
  ++summary_.started;
  summary_.total_wait_min += t - p.arrival;
  servers_.push_back({t + p.service_min, p});
  std::push_heap(servers_.begin(), servers_.end(), [](const auto& a, const auto& b) { return later_end(a, b); });
}

void SiteSimulator::handle_departure(SiteRecorder* recorder) {
  std::pop_heap(servers_.begin(), servers_.end(), [](const auto& a, const auto& b) { return later_end(a, b); });
  const InService done = servers_.back();
  servers_.pop_back();
  ++summary_.discharged;
  record_visit(done.patient, done.patient.start, done.end, false, recorder);

  for (auto& q : queues_) {  // strict CTAS priority, FIFO within level
    if (!q.empty()) {
      Patient next = q.front();
      q.pop_front();
      start_service(next, done.end);
      break;
    }
  }
}

void SiteSimulator::emit_prediction(SiteRecorder* recorder, std::optional<int> forced_display_min) {
  const auto& cfg = *cfg_;
  const double granular = predict_granular_wait(waiting_total(), treating(), cfg.predictor, noise_rng_);
  const auto t = start_ + static_cast<EpochMinutes>(std::llround(next_prediction_));
  WaitPrediction prediction(cfg.site_id, t, granular, cfg.display_cap_min, PredictionSource::Simulated);
  display_ = forced_display_min.value_or(prediction.coarse_min());
  ++summary_.predictions;
  if (recorder) recorder->predictions.push_back(std::move(prediction));
  next_prediction_ += kPredictionCadenceMin;
}

void SiteSimulator::finish(SiteRecorder* recorder) {
  for (const auto& q : queues_) {
    for (const auto& p : q) record_visit(p, std::nullopt, std::nullopt, false, recorder);
  }
  for (const auto& s : servers_) record_visit(s.patient, s.patient.start, std::nullopt, false, recorder);
}

void SiteSimulator::record_visit(const Patient& p, std::optional<double> start, std::optional<double> end,
                                 bool balked, SiteRecorder* recorder) const {
  if (!recorder) return;
  auto stamp = [this](double minutes) { return start_ + static_cast<EpochMinutes>(std::floor(minutes)); };
  std::optional<EpochMinutes> physician;
  std::optional<EpochMinutes> discharge;
  if (start) physician = stamp(*start);
  if (end) discharge = stamp(*end);
  recorder->visits.emplace_back(
      p.seq, VisitRecord(cfg_->site_id + "-" + std::to_string(p.seq), cfg_->site_id, CtasLevel(p.ctas_index + 1),
                         stamp(p.arrival), physician, discharge, balked));
}

EventLog simulate_network(const NetworkConfig& config, EpochMinutes duration_min, std::uint64_t seed) {
  if (auto issues = validate_sites(config.sites); !issues.empty()) throw ConfigError(std::move(issues));
  if (duration_min < 0) throw std::invalid_argument("duration must be non-negative");

  EventLog log;
  log.seed = seed;
  log.duration_min = duration_min;
  log.config = config;
  const auto end = static_cast<double>(duration_min);

  for (std::size_t i = 0; i < config.sites.size(); ++i) {
    SiteSimulator sim(config.sites[i], config.start, seed, i);
    SiteRecorder rec;
    while (sim.next_prediction_time() < end) {
      sim.advance_to(sim.next_prediction_time(), &rec);
      sim.emit_prediction(&rec);
    }
    sim.advance_to(end, &rec);
    sim.finish(&rec);

    std::sort(rec.visits.begin(), rec.visits.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [seq, visit] : rec.visits) log.visits.push_back(std::move(visit));
    for (auto& p : rec.predictions) log.predictions.push_back(std::move(p));
    log.summaries.push_back(sim.summary());
  }
  std::stable_sort(log.predictions.begin(), log.predictions.end(), [](const auto& a, const auto& b) {
    return a.site_id() != b.site_id() ? a.site_id() < b.site_id() : a.t() < b.t();
  });
  return log;
}

std::vector<WaitPrediction> inject_heaping(std::span<const WaitPrediction> predictions, double heap_fraction,
                                           RandomStream& rng) {
  if (!(heap_fraction >= 0.0 && heap_fraction <= 1.0)) {
    throw std::invalid_argument("heap_fraction must lie in [0, 1]");
  }
  std::vector<WaitPrediction> out(predictions.begin(), predictions.end());
  if (heap_fraction == 0.0) return out;
  for (auto& p : out) {
    if (rng.uniform() >= heap_fraction) continue;
    // Next step point at or above the granular value, limited to the nine
    // published steps (57 ... 297).
    int j = 1;
    while (j < 9 && display_step_point(j) < p.granular_min()) ++j;
    const double heaped = display_step_point(j) + 0.5 * rng.uniform();
    p = WaitPrediction(p.site_id(), p.t(), heaped, p.display_cap_min(), p.source());
  }
  return out;
}

}  // namespace edwait
