#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "edwait/elasticity.hpp"

using namespace edwait;

namespace {

PanelObservation obs(const std::string& site, int j, bool treated, double y_now) {
  PanelObservation o;
  o.site_id = site;
  o.site_kind = site.rfind("UC", 0) == 0 ? SiteKind::UrgentCare : SiteKind::FullED;
  o.rd = RdPoint(j);
  o.treated = treated;
  o.y_now = y_now;
  return o;
}

Panel panel_of(std::vector<PanelObservation> observations) {
  Panel p;
  for (const auto& o : observations) {
    auto& cell = p.counts_by_rd[o.rd.index()];
    (o.treated ? cell.treated : cell.control) += 1;
  }
  p.observations = std::move(observations);
  return p;
}

IrfEstimate irf_row(const std::string& rd, int horizon_min, double psi, double se) {
  IrfEstimate e;
  e.outcome = "waiting";
  e.subgroup = "all";
  e.rd = rd;
  e.horizon = horizon_min / 5;
  e.horizon_min = horizon_min;
  e.psi = psi;
  e.se = se;
  return e;
}

}  // namespace

TEST_CASE("compute_elasticity examples") {
  CHECK(compute_elasticity(0.0, 0.1, 1.22, 30).eta == 0.0);
  CHECK(compute_elasticity(-0.2, 0.1, 1.22, 30).eta == doctest::Approx(-0.1639).epsilon(1e-3));
  CHECK(compute_elasticity(-0.5, 0.1, 15.037, 240).eta == doctest::Approx(-0.2660).epsilon(1e-3));
  const auto e = compute_elasticity(-0.2, 0.1, 1.22, 60);
  CHECK(e.eta == doctest::Approx((-0.2 / 1.22) / (30.0 / 60.0)).epsilon(1e-15));
  CHECK(e.se_eta == doctest::Approx(0.1 / 1.22 / 0.5).epsilon(1e-15));
}

TEST_CASE("compute_elasticity: scale and sign") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> psi(-3, 3), mu(0.1, 20);
  for (int i = 0; i < 200; ++i) {
    const double p = psi(rng), m = mu(rng);
    const int k = 30 * (1 + i % 8);
    const auto a = compute_elasticity(p, 0.3, m, k);
    const auto b = compute_elasticity(2 * p, 0.6, 2 * m, k);
    CHECK(b.eta == doctest::Approx(a.eta).epsilon(1e-14));
    CHECK(b.se_eta == doctest::Approx(a.se_eta).epsilon(1e-14));
    CHECK((a.eta > 0) == (p > 0));
    CHECK(a.se_eta >= 0.0);
  }
}

TEST_CASE("compute_elasticity: undefined and invalid inputs") {
  CHECK_THROWS_AS(compute_elasticity(-0.2, 0.1, 0.0, 30), UndefinedElasticity);
  CHECK_THROWS_AS(compute_elasticity(-0.2, 0.1, 1.0, 270), std::invalid_argument);
  CHECK_THROWS_AS(compute_elasticity(-0.2, 0.1, 1.0, 45), std::invalid_argument);
}

TEST_CASE("control_mean") {
  SUBCASE("single control observation") {
    const auto p = panel_of({obs("ED1", 1, false, 4.0), obs("ED1", 1, true, 100.0)});
    CHECK(control_mean(p, RdPoint(1)) == 4.0);
  }
  SUBCASE("empty control cell") {
    const auto p = panel_of({obs("ED1", 2, true, 3.0)});
    CHECK_THROWS_AS(control_mean(p, RdPoint(2)), UndefinedElasticity);
    CHECK_THROWS_AS(control_mean(p, RdPoint(3)), UndefinedElasticity);
  }
  SUBCASE("subgroup restriction") {
    const auto p = panel_of({obs("ED1", 1, false, 2.0), obs("UC1", 1, false, 6.0)});
    CHECK(control_mean(p, RdPoint(1), Subgroup::UC) == 6.0);
    CHECK(control_mean(p, RdPoint(1)) == 4.0);
  }
  SUBCASE("large panel against a two-pass mean") {
    std::mt19937_64 rng(6);
    std::poisson_distribution<int> y(12.0);
    std::vector<PanelObservation> v;
    for (int i = 0; i < 200000; ++i) v.push_back(obs("ED1", 4, i % 3 == 0, y(rng) + 1e-3 * i));
    const auto p = panel_of(v);
    double first = 0;
    std::size_t n = 0;
    for (const auto& o : p.observations) {
      if (!o.treated) {
        first += o.y_now;
        ++n;
      }
    }
    const double rough = first / static_cast<double>(n);
    double correction = 0;
    for (const auto& o : p.observations) {
      if (!o.treated) correction += o.y_now - rough;
    }
    const double two_pass = rough + correction / static_cast<double>(n);
    CHECK(std::abs(control_mean(p, RdPoint(4)) - two_pass) < 1e-12 * two_pass);
  }
}

TEST_CASE("elasticity_profile: grid, exclusion and failures") {
  std::vector<PanelObservation> v;
  for (int j = 1; j <= 9; ++j) {
    v.push_back(obs("ED1", j, false, 2.0 * j));
    v.push_back(obs("ED1", j, true, 2.0 * j));
  }
  const auto panel = panel_of(v);
  std::vector<IrfEstimate> irf;
  for (int j = 1; j <= 9; ++j) {
    if (j == 4) continue;  // no estimate for 120-150
    for (int h : {30, 90, 150}) irf.push_back(irf_row(RdPoint(j).label(), h, -0.1 * j, 0.01));
  }
  const auto rows = elasticity_profile({{AcuityGroup::All, &panel, &irf}});
  CHECK(rows.size() == 8 * 3);
  for (const auto& r : rows) {
    CHECK(r.rd != "270-300");
    if (r.rd == "120-150") {
      CHECK(r.failure.has_value());
      continue;
    }
    REQUIRE_FALSE(r.failure.has_value());
    const int j = RdPoint::from_label(r.rd)->index();
    CHECK(r.baseline_wait == 30 * j);
    CHECK(r.control_mean == 2.0 * j);
    CHECK(r.eta == doctest::Approx((-0.1 * j / (2.0 * j)) / (30.0 / (30 * j))));
    CHECK(r.significant == (std::abs(r.eta) > 1.96 * r.se_eta));
  }

  std::ostringstream out;
  write_elasticity_csv(out, rows);
  const auto text = out.str();
  CHECK(text.rfind("rd,horizon_min,acuity_group,eta,se_eta,psi,control_mean,baseline_wait,significant\n", 0) == 0);
  CHECK(text.find("270-300") == std::string::npos);
  CHECK(text.find("120-150,30,all,NA") != std::string::npos);
}

TEST_CASE("acuity groups") {
  CHECK(outcome_for(AcuityGroup::Low).tag() == "waiting_low");
  CHECK(outcome_for(AcuityGroup::High).tag() == "waiting_high");
  CHECK(outcome_for(AcuityGroup::All).tag() == "waiting");
  CHECK(parse_acuity_group("low") == AcuityGroup::Low);
  CHECK_FALSE(reported_in_elasticity(RdPoint(9)));
  CHECK(reported_in_elasticity(RdPoint(8)));
}
