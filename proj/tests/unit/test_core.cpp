#include <doctest.h>

#include <random>
#include <sstream>

#include "edwait/core.hpp"
#include "edwait/ingest.hpp"
#include "edwait/timefmt.hpp"

using namespace edwait;

namespace {

bool has_issue(const std::vector<ConfigIssue>& issues, std::string_view path, std::string_view fragment) {
  for (const auto& i : issues) {
    if (i.path == path && i.message.find(fragment) != std::string::npos) return true;
  }
  return false;
}

SiteConfig valid_site(std::string id, SiteKind kind) {
  SiteConfig s;
  s.site_id = std::move(id);
  s.kind = kind;
  s.display_cap_min = display_cap_for(kind);
  s.arrival_rates = {0.1, 1, 2, 1, 0.5};
  s.server_count = 3;
  return s;
}

}  // namespace

TEST_CASE("site kinds carry their display caps") {
  CHECK(display_cap_for(SiteKind::FullED) == 300);
  CHECK(display_cap_for(SiteKind::UrgentCare) == 180);
  CHECK(parse_site_kind("UC") == SiteKind::UrgentCare);
  CHECK(parse_site_kind("ED") == SiteKind::FullED);
  CHECK_FALSE(parse_site_kind("clinic").has_value());
}

TEST_CASE("CtasLevel accepts 1..5 only") {
  CHECK(CtasLevel(1).index() == 0);
  CHECK(CtasLevel(5).value() == 5);
  CHECK(CtasLevel(1) < CtasLevel(2));
  CHECK_THROWS_AS(CtasLevel(0), std::invalid_argument);
  CHECK_THROWS_AS(CtasLevel(6), std::invalid_argument);
}

TEST_CASE("validate_config") {
  SUBCASE("urgent care with cap 180 is valid") {
    CHECK(validate_config(valid_site("UC1", SiteKind::UrgentCare)).empty());
  }
  SUBCASE("ED with cap 180 is a cap mismatch") {
    auto s = valid_site("ED1", SiteKind::FullED);
    s.display_cap_min = 180;
    CHECK(has_issue(validate_config(s, "sites[0]"), "sites[0].display_cap_min", "cap mismatch"));
  }
  SUBCASE("zero servers") {
    auto s = valid_site("ED1", SiteKind::FullED);
    s.server_count = 0;
    CHECK(has_issue(validate_config(s), "server_count", "server_count ≥ 1"));
  }
  SUBCASE("every violation is reported") {
    auto s = valid_site("ED1", SiteKind::FullED);
    s.display_floor_min = 15;
    s.arrival_rates[2] = -1;
    s.service_mean_min[4] = 0;
    s.predictor.noise_sd = -2;
    const auto issues = validate_config(s);
    CHECK(has_issue(issues, "display_floor_min", "30"));
    CHECK(has_issue(issues, "arrival_rates[2]", ""));
    CHECK(has_issue(issues, "service_mean_min[4]", ""));
    CHECK(has_issue(issues, "predictor.noise_sd", ""));
  }
  SUBCASE("duplicate site ids") {
    std::vector<SiteConfig> sites{valid_site("ED1", SiteKind::FullED), valid_site("ED1", SiteKind::FullED)};
    CHECK_FALSE(validate_sites(sites).empty());
  }
}

TEST_CASE("WaitPrediction derives the display from the granular value") {
  WaitPrediction p("ED1", 600, 61.0, 300, PredictionSource::Scraped);
  CHECK(p.coarse_min() == 60);
  WaitPrediction uc("UC1", 600, 250.0, 180);
  CHECK(uc.coarse_min() == 180);
  CHECK_THROWS(WaitPrediction("ED1", 0, -1.0, 300));
}

TEST_CASE("WaitPrediction survives a CSV round trip bit for bit") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> g(0.0, 400.0);
  std::vector<WaitPrediction> original;
  const EpochMinutes t0 = parse_iso_minutes("2020-03-01T00:00");
  for (int i = 0; i < 2000; ++i) {
    const std::string site = i % 3 == 0 ? "UC1" : "ED" + std::to_string(i % 3);
    const int cap = site.rfind("UC", 0) == 0 ? 180 : 300;
    original.emplace_back(site, t0 + 6 * i, g(rng), cap, i % 2 ? PredictionSource::Vendor : PredictionSource::Scraped);
  }
  std::stringstream buf;
  write_predictions_csv(buf, original);
  const auto parsed = parse_prediction_log(buf);
  CHECK(parsed.warnings.empty());
  REQUIRE(parsed.predictions.size() == original.size());
  auto sorted = original;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.site_id() != b.site_id() ? a.site_id() < b.site_id() : a.t() < b.t();
  });
  for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(parsed.predictions[i] == sorted[i]);
}

TEST_CASE("VisitRecord ordering") {
  CHECK_NOTHROW(VisitRecord("v", "ED1", CtasLevel(3), 10, 25, 60));
  CHECK_NOTHROW(VisitRecord("v", "ED1", CtasLevel(3), 10, std::nullopt, 60));
  CHECK_NOTHROW(VisitRecord("v", "ED1", CtasLevel(3), 10, 10, 10));
  CHECK_THROWS_AS(VisitRecord("v", "ED1", CtasLevel(3), 10, 5, 60), std::invalid_argument);
  CHECK_THROWS_AS(VisitRecord("v", "ED1", CtasLevel(3), 10, 30, 20), std::invalid_argument);
  CHECK_THROWS_AS(VisitRecord("v", "ED1", CtasLevel(3), 10, std::nullopt, 5), std::invalid_argument);
  CHECK_THROWS_AS(VisitRecord("v", "ED1", CtasLevel(3), 10, 12, 20, true), std::invalid_argument);
}

TEST_CASE("ISO timestamps") {
  CHECK(parse_iso_minutes("1970-01-01T00:00") == 0);
  CHECK(parse_iso_minutes("1970-01-02T01:05") == 1440 + 65);
  CHECK(parse_iso_minutes("2019-06-01 12:30:59") == parse_iso_minutes("2019-06-01T12:30"));
  CHECK(parse_iso_minutes("2019-06-01T12:30:00.250Z") == parse_iso_minutes("2019-06-01T12:30"));
  CHECK(format_iso_minutes(parse_iso_minutes("2020-02-29T23:59")) == "2020-02-29T23:59");
  CHECK_THROWS_AS(parse_iso_minutes("2019-02-30T00:00"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iso_minutes("yesterday"), std::invalid_argument);
  CHECK_THROWS_AS(parse_iso_minutes("2019-01-01T24:00"), std::invalid_argument);
}

TEST_CASE("StockSeries indexing") {
  StockSeries s("ED1", 100, 5, 4);
  CHECK(s.end() == 120);
  CHECK(s.index_of(105) == 1u);
  CHECK_FALSE(s.index_of(106).has_value());
  CHECK_FALSE(s.index_of(120).has_value());
  CHECK_FALSE(s.index_of(95).has_value());
}
