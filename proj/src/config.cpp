#include "edwait/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "edwait/ingest.hpp"
#include "edwait/timefmt.hpp"

namespace edwait {
namespace {

using nlohmann::json;

constexpr PerCtas<double> kCtasShare{0.0153, 0.2743, 0.4757, 0.1693, 0.0653};
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> diurnal_profile() {
  std::vector<double> profile(24);
  for (int h = 0; h < 24; ++h) profile[h] = 1.0 + 0.35 * std::cos(2.0 * std::numbers::pi * (h - 14) / 24.0);
  return profile;
}

SiteConfig default_site(std::string id, SiteKind kind) {
  SiteConfig s;
  s.site_id = std::move(id);
  s.kind = kind;
  s.display_cap_min = display_cap_for(kind);
  s.arrival_profile = diurnal_profile();
  const bool ed = kind == SiteKind::FullED;
  const double total_per_hour = ed ? 8.0 : 4.0;
  for (std::size_t c = 0; c < kCtasLevels; ++c) s.arrival_rates[c] = total_per_hour * kCtasShare[c];
  s.service_mean_min = ed ? PerCtas<double>{180, 150, 130, 100, 80} : PerCtas<double>{90, 80, 60, 45, 35};
  s.server_count = ed ? 19 : 5;
  s.predictor = ed ? PredictorParams{20.0, 11.0, 0.0, 10.0} : PredictorParams{20.0, 14.0, 0.0, 8.0};
  s.balking.alpha = {kNegInf, -5.0, -3.0, -3.0, -3.0};
  s.balking.beta = {0.0, 0.1, 0.15, 0.2, 0.2};
  return s;
}

class Reader {
 public:
  std::vector<ConfigIssue> issues;

  void fail(const std::string& path, std::string message) { issues.push_back({path, std::move(message)}); }

  bool object_at(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    fail(path, "expected an object");
    return false;
  }

  void check_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : j.items()) {
      bool known = false;
      for (auto a : allowed) known = known || a == key;
      if (!known) fail(join(path, key), "unknown key");
    }
  }

  static std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
  }

  void number(const json& j, const std::string& path, std::string_view key, double& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(std::string(key));
    if (v.is_number()) {
      out = v.get<double>();
    } else {
      fail(join(path, key), "expected a number");
    }
  }

  template <class Int>
  void integer(const json& j, const std::string& path, std::string_view key, Int& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(std::string(key));
    if (v.is_number_integer()) {
      out = v.get<Int>();
    } else {
      fail(join(path, key), "expected an integer");
    }
  }

  void boolean(const json& j, const std::string& path, std::string_view key, bool& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(std::string(key));
    if (v.is_boolean()) {
      out = v.get<bool>();
    } else {
      fail(join(path, key), "expected true or false");
    }
  }

  void string(const json& j, const std::string& path, std::string_view key, std::string& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(std::string(key));
    if (v.is_string()) {
      out = v.get<std::string>();
    } else {
      fail(join(path, key), "expected a string");
    }
  }

  // Accepts numbers, and null or "-inf" for negative infinity.
  std::optional<double> extended_number(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "-inf")) return kNegInf;
    fail(path, "expected a number, null or \"-inf\"");
    return std::nullopt;
  }

  void per_ctas(const json& j, const std::string& path, std::string_view key, PerCtas<double>& out,
                bool allow_neg_inf = false) {
    if (!j.contains(key)) return;
    const auto& v = j.at(std::string(key));
    const auto p = join(path, key);
    if (!v.is_array() || v.size() != kCtasLevels) {
      fail(p, "expected an array of 5 values (CTAS 1-5)");
      return;
    }
    for (std::size_t c = 0; c < kCtasLevels; ++c) {
      const auto ep = p + "[" + std::to_string(c) + "]";
      if (allow_neg_inf) {
        if (auto x = extended_number(v[c], ep)) out[c] = *x;
      } else if (v[c].is_number()) {
        out[c] = v[c].get<double>();
      } else {
        fail(ep, "expected a number");
      }
    }
  }

  void outcomes(const json& j, const std::string& path, std::string_view key, std::vector<OutcomeSelector>& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(std::string(key));
    const auto p = join(path, key);
    if (!v.is_array() || v.empty()) {
      fail(p, "expected a non-empty array of outcome tags");
      return;
    }
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto ep = p + "[" + std::to_string(i) + "]";
      const auto sel = v[i].is_string() ? OutcomeSelector::parse(v[i].get<std::string>()) : std::nullopt;
      if (sel) {
        out.push_back(*sel);
      } else {
        fail(ep, "unknown outcome tag");
      }
    }
  }

  std::optional<Subgroup> subgroup(const json& v, const std::string& path) {
    auto s = v.is_string() ? parse_subgroup(v.get<std::string>()) : std::nullopt;
    if (!s) fail(path, "expected \"all\", \"ED\" or \"UC\"");
    return s;
  }
};

SiteConfig read_site(Reader& r, const json& j, const std::string& path) {
  SiteConfig s;
  if (!r.object_at(j, path)) return s;
  r.check_keys(j, path,
               {"site_id", "kind", "display_floor_min", "display_cap_min", "arrival_rates_per_hour", "arrival_profile",
                "service_mean_min", "server_count", "predictor", "balking"});
  if (!j.contains("site_id")) r.fail(Reader::join(path, "site_id"), "required");
  r.string(j, path, "site_id", s.site_id);
  s.kind = infer_site_kind(s.site_id);
  if (j.contains("kind")) {
    std::string kind;
    r.string(j, path, "kind", kind);
    if (auto k = parse_site_kind(kind)) {
      s.kind = *k;
    } else {
      r.fail(Reader::join(path, "kind"), "expected \"ED\" or \"UC\"");
    }
  }
  s.display_cap_min = display_cap_for(s.kind);
  r.integer(j, path, "display_floor_min", s.display_floor_min);
  r.integer(j, path, "display_cap_min", s.display_cap_min);
  r.per_ctas(j, path, "arrival_rates_per_hour", s.arrival_rates);
  if (j.contains("arrival_profile")) {
    const auto& v = j.at("arrival_profile");
    const auto p = Reader::join(path, "arrival_profile");
    if (v.is_null()) {
      s.arrival_profile.clear();
    } else if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
      r.fail(p, "expected null or an array of 24 hourly multipliers");
    } else {
      s.arrival_profile = v.get<std::vector<double>>();
    }
  }
  r.per_ctas(j, path, "service_mean_min", s.service_mean_min);
  r.integer(j, path, "server_count", s.server_count);
  if (j.contains("predictor")) {
    const auto& pj = j.at("predictor");
    const auto p = Reader::join(path, "predictor");
    if (r.object_at(pj, p)) {
      r.check_keys(pj, p, {"a0", "a1", "a2", "noise_sd"});
      r.number(pj, p, "a0", s.predictor.a0);
      r.number(pj, p, "a1", s.predictor.a1);
      r.number(pj, p, "a2", s.predictor.a2);
      r.number(pj, p, "noise_sd", s.predictor.noise_sd);
    }
  }
  if (j.contains("balking")) {
    const auto& bj = j.at("balking");
    const auto p = Reader::join(path, "balking");
    if (r.object_at(bj, p)) {
      r.check_keys(bj, p, {"alpha", "beta"});
      r.per_ctas(bj, p, "alpha", s.balking.alpha, true);
      r.per_ctas(bj, p, "beta", s.balking.beta);
    }
  }
  return s;
}

json per_ctas_json(const PerCtas<double>& v, bool neg_inf_as_text = false) {
  json a = json::array();
  for (double x : v) {
    if (neg_inf_as_text && x == kNegInf) {
      a.push_back("-inf");
    } else {
      a.push_back(x);
    }
  }
  return a;
}

}  // namespace

RunConfig default_config() {
  RunConfig cfg;
  cfg.network.start = parse_iso_minutes("2019-01-01T00:00");
  cfg.network.sites = {default_site("ED1", SiteKind::FullED), default_site("ED2", SiteKind::FullED),
                       default_site("ED3", SiteKind::FullED), default_site("UC1", SiteKind::UrgentCare),
                       default_site("UC2", SiteKind::UrgentCare)};
  return cfg;
}

RunConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError({{"", std::string("malformed JSON: ") + e.what()}});
  }
  Reader r;
  RunConfig cfg = default_config();
  if (!r.object_at(j, "")) throw ConfigError(r.issues);
  r.check_keys(j, "", {"start", "duration_days", "seed", "sites", "estimation", "study"});

  if (j.contains("start")) {
    std::string start;
    r.string(j, "", "start", start);
    try {
      cfg.network.start = parse_iso_minutes(start);
    } catch (const std::invalid_argument& e) {
      r.fail("start", e.what());
    }
  }
  r.number(j, "", "duration_days", cfg.duration_days);
  if (cfg.duration_days < 0.0) r.fail("duration_days", "must be non-negative");
  r.integer(j, "", "seed", cfg.seed);

  if (j.contains("sites")) {
    const auto& sj = j.at("sites");
    if (!sj.is_array() || sj.empty()) {
      r.fail("sites", "expected a non-empty array");
    } else {
      cfg.network.sites.clear();
      for (std::size_t i = 0; i < sj.size(); ++i) {
        cfg.network.sites.push_back(read_site(r, sj[i], "sites[" + std::to_string(i) + "]"));
      }
    }
  }

  if (j.contains("estimation") && r.object_at(j.at("estimation"), "estimation")) {
    const auto& ej = j.at("estimation");
    const std::string p = "estimation";
    auto& e = cfg.estimation;
    r.check_keys(ej, p,
                 {"bandwidth", "grid_min", "leads", "lags", "lag_source", "require_full_coverage", "interact_rd", "hc",
                  "outcomes", "subgroups"});
    r.number(ej, p, "bandwidth", e.panel.bandwidth);
    r.integer(ej, p, "grid_min", e.panel.grid_min);
    r.integer(ej, p, "leads", e.panel.leads);
    r.integer(ej, p, "lags", e.panel.lags);
    r.boolean(ej, p, "require_full_coverage", e.panel.require_full_coverage);
    r.boolean(ej, p, "interact_rd", e.interact_rd);
    if (ej.contains("lag_source")) {
      std::string s;
      r.string(ej, p, "lag_source", s);
      if (s == "same") {
        e.panel.lag_source = LagSource::SameOutcome;
      } else if (s == "total") {
        e.panel.lag_source = LagSource::TotalWaiting;
      } else {
        r.fail("estimation.lag_source", "expected \"same\" or \"total\"");
      }
    }
    if (ej.contains("hc")) {
      std::string s;
      r.string(ej, p, "hc", s);
      if (s == "HC0") {
        e.hc = HcVariant::HC0;
      } else if (s == "HC1") {
        e.hc = HcVariant::HC1;
      } else {
        r.fail("estimation.hc", "expected \"HC0\" or \"HC1\"");
      }
    }
    r.outcomes(ej, p, "outcomes", e.outcomes);
    if (ej.contains("subgroups")) {
      const auto& v = ej.at("subgroups");
      if (!v.is_array() || v.empty()) {
        r.fail("estimation.subgroups", "expected a non-empty array");
      } else {
        e.subgroups.clear();
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (auto s = r.subgroup(v[i], "estimation.subgroups[" + std::to_string(i) + "]")) e.subgroups.push_back(*s);
        }
      }
    }
    if (!(e.panel.bandwidth > 0.0 && e.panel.bandwidth <= 15.0)) r.fail("estimation.bandwidth", "must lie in (0, 15]");
    if (e.panel.grid_min < 1) r.fail("estimation.grid_min", "must be ≥ 1");
    if (e.panel.leads < 1) r.fail("estimation.leads", "must be ≥ 1");
    if (e.panel.lags < 0) r.fail("estimation.lags", "must be ≥ 0");
  }

  if (j.contains("study") && r.object_at(j.at("study"), "study")) {
    const auto& sj = j.at("study");
    const std::string p = "study";
    auto& s = cfg.study;
    r.check_keys(sj, p,
                 {"reps", "horizons", "outcomes", "subgroup", "counterfactual_truth", "elasticity", "max_truth_events"});
    r.integer(sj, p, "reps", s.reps);
    if (sj.contains("horizons")) {
      const auto& v = sj.at("horizons");
      if (!v.is_array() || v.empty() || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number_integer(); })) {
        r.fail("study.horizons", "expected a non-empty array of integers");
      } else {
        s.horizons = v.get<std::vector<int>>();
      }
    }
    r.outcomes(sj, p, "outcomes", s.outcomes);
    if (sj.contains("subgroup")) {
      if (auto g = r.subgroup(sj.at("subgroup"), "study.subgroup")) s.subgroup = *g;
    }
    r.boolean(sj, p, "counterfactual_truth", s.counterfactual_truth);
    r.boolean(sj, p, "elasticity", s.elasticity);
    r.integer(sj, p, "max_truth_events", s.max_truth_events);
  }

  for (std::size_t i = 0; i < cfg.network.sites.size(); ++i) {
    auto more = validate_config(cfg.network.sites[i], "sites[" + std::to_string(i) + "]");
    r.issues.insert(r.issues.end(), more.begin(), more.end());
  }
  if (r.issues.empty()) {
    auto more = validate_sites(cfg.network.sites);
    r.issues.insert(r.issues.end(), more.begin(), more.end());
  }
  if (!r.issues.empty()) throw ConfigError(std::move(r.issues));
  return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError({{"", "cannot open config file " + file.string()}});
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["start"] = format_iso_minutes(cfg.network.start);
  j["duration_days"] = cfg.duration_days;
  j["seed"] = cfg.seed;
  j["sites"] = json::array();
  for (const auto& s : cfg.network.sites) {
    json sj;
    sj["site_id"] = s.site_id;
    sj["kind"] = std::string(to_string(s.kind));
    sj["display_floor_min"] = s.display_floor_min;
    sj["display_cap_min"] = s.display_cap_min;
    sj["arrival_rates_per_hour"] = per_ctas_json(s.arrival_rates);
    sj["arrival_profile"] = s.arrival_profile.empty() ? json(nullptr) : json(s.arrival_profile);
    sj["service_mean_min"] = per_ctas_json(s.service_mean_min);
    sj["server_count"] = s.server_count;
    sj["predictor"] = {{"a0", s.predictor.a0}, {"a1", s.predictor.a1}, {"a2", s.predictor.a2},
                       {"noise_sd", s.predictor.noise_sd}};
    sj["balking"] = {{"alpha", per_ctas_json(s.balking.alpha, true)}, {"beta", per_ctas_json(s.balking.beta)}};
    j["sites"].push_back(std::move(sj));
  }
  const auto& e = cfg.estimation;
  json outcomes = json::array();
  for (const auto& o : e.outcomes) outcomes.push_back(o.tag());
  json subgroups = json::array();
  for (auto g : e.subgroups) subgroups.push_back(std::string(to_string(g)));
  j["estimation"] = {{"bandwidth", e.panel.bandwidth},
                     {"grid_min", e.panel.grid_min},
                     {"leads", e.panel.leads},
                     {"lags", e.panel.lags},
                     {"lag_source", e.panel.lag_source == LagSource::SameOutcome ? "same" : "total"},
                     {"require_full_coverage", e.panel.require_full_coverage},
                     {"interact_rd", e.interact_rd},
                     {"hc", e.hc == HcVariant::HC0 ? "HC0" : "HC1"},
                     {"outcomes", outcomes},
                     {"subgroups", subgroups}};
  const auto& s = cfg.study;
  json study_outcomes = json::array();
  for (const auto& o : s.outcomes) study_outcomes.push_back(o.tag());
  j["study"] = {{"reps", s.reps},
                {"horizons", s.horizons},
                {"outcomes", study_outcomes},
                {"subgroup", std::string(to_string(s.subgroup))},
                {"counterfactual_truth", s.counterfactual_truth},
                {"elasticity", s.elasticity},
                {"max_truth_events", s.max_truth_events}};
  return j.dump(2) + "\n";
}

}  // namespace edwait
