#include <doctest.h>

#include <cmath>

#include "edwait/config.hpp"

using namespace edwait;

namespace {

std::vector<ConfigIssue> issues_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.issues();
  }
  return {};
}

bool has_path(const std::vector<ConfigIssue>& issues, const std::string& path) {
  for (const auto& i : issues) {
    if (i.path == path) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("default config is valid and serializes losslessly") {
  const auto cfg = default_config();
  CHECK(cfg.network.sites.size() == 5);
  CHECK(validate_sites(cfg.network.sites).empty());
  const auto text = config_to_json(cfg);
  const auto back = parse_config(text);
  CHECK(config_to_json(back) == text);
  CHECK(std::isinf(back.network.sites[0].balking.alpha[0]));
  CHECK(back.estimation.panel.bandwidth == 3.0);
  CHECK(back.estimation.panel.leads == 36);
  CHECK(back.estimation.panel.lags == 14);
  CHECK(back.estimation.panel.grid_min == 5);
}

TEST_CASE("partial configs keep defaults") {
  const auto cfg = parse_config(R"({"seed": 9, "estimation": {"lags": 4, "hc": "HC1", "outcomes": ["treating"]}})");
  CHECK(cfg.seed == 9);
  CHECK(cfg.network.sites.size() == 5);
  CHECK(cfg.estimation.panel.lags == 4);
  CHECK(cfg.estimation.hc == HcVariant::HC1);
  REQUIRE(cfg.estimation.outcomes.size() == 1);
  CHECK(cfg.estimation.outcomes[0].kind == OutcomeKind::Treating);
}

TEST_CASE("site lists replace the default network") {
  const auto cfg = parse_config(R"({"sites": [{"site_id": "UC7", "server_count": 2,
      "arrival_rates_per_hour": [0, 1, 1, 1, 0], "balking": {"alpha": [null, "-inf", -2, -2, -2]}}]})");
  REQUIRE(cfg.network.sites.size() == 1);
  const auto& s = cfg.network.sites[0];
  CHECK(s.kind == SiteKind::UrgentCare);
  CHECK(s.display_cap_min == 180);
  CHECK(std::isinf(s.balking.alpha[1]));
  CHECK(s.balking.alpha[2] == -2.0);
}

TEST_CASE("errors carry field paths") {
  CHECK(has_path(issues_of(R"({"sites": [{"site_id": "ED1", "server_count": 0}]})"), "sites[0].server_count"));
  CHECK(has_path(issues_of(R"({"sites": [{"site_id": "ED1", "kind": "ED", "display_cap_min": 180}]})"),
                 "sites[0].display_cap_min"));
  CHECK(has_path(issues_of(R"({"sites": [{"site_id": "ED1"}, {"site_id": "ED2", "arrival_rates_per_hour": [1, 2]}]})"),
                 "sites[1].arrival_rates_per_hour"));
  CHECK(has_path(issues_of(R"({"estimation": {"bandwidth": -1}})"), "estimation.bandwidth"));
  CHECK(has_path(issues_of(R"({"estimation": {"outcomes": ["waiting", "beds"]}})"), "estimation.outcomes[1]"));
  CHECK(has_path(issues_of(R"({"study": {"subgroup": "clinic"}})"), "study.subgroup"));
  CHECK(has_path(issues_of(R"({"sedd": 3})"), "sedd"));
  CHECK(has_path(issues_of(R"({"sites": [{"site_id": "ED1", "predictor": {"a3": 1}}]})"), "sites[0].predictor.a3"));
  CHECK_FALSE(issues_of("{not json").empty());
}

TEST_CASE("every problem is reported at once") {
  const auto issues = issues_of(R"({"duration_days": -1, "sites": [{"site_id": "ED1", "server_count": 0,
      "service_mean_min": [1, 1, 0, 1, 1]}]})");
  CHECK(has_path(issues, "duration_days"));
  CHECK(has_path(issues, "sites[0].server_count"));
  CHECK(has_path(issues, "sites[0].service_mean_min[2]"));
}

TEST_CASE("load_config reports unreadable files") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
