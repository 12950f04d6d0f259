#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "edwait/config.hpp"
#include "edwait/ingest.hpp"
#include "edwait/lp.hpp"
#include "oracles.hpp"

using namespace edwait;

namespace {

Panel panel_of(const NetworkConfig& network, std::uint64_t seed) {
  const auto log = simulate_network(network, 30 * 1440, seed);
  StockMap stocks;
  for (const auto& s : network.sites) {
    stocks.emplace(s.site_id, build_stock_series(log.visits, s.site_id, 1,
                                                 StockWindow{network.start, network.start + 30 * 1440}));
  }
  return build_panel(log.predictions, stocks, {});
}

// A month of the default network, panelled for total waiting.
const Panel& simulated_panel() {
  static const Panel panel = panel_of(default_config().network, 11);
  return panel;
}

const IrfEstimate& at_horizon(const IrfResult& r, int h) {
  return *std::find_if(r.estimates.begin(), r.estimates.end(), [h](const auto& e) { return e.horizon == h; });
}

}  // namespace

TEST_CASE("ols_hc: exact fit") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 0, 1, 1, 1, 2;
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  const auto fit = ols_hc(X, y);
  CHECK(fit.coefficients(0) == doctest::Approx(1.0));
  CHECK(fit.coefficients(1) == doctest::Approx(1.0));
  CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fit.se(0) < 1e-12);
  CHECK(fit.se(1) < 1e-12);
}

TEST_CASE("ols_hc: coefficients match the pseudo-inverse oracle") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sys = oracle::random_system(200, 6, seed);
    const auto fit = ols_hc(sys.X, sys.y);
    const Eigen::VectorXd ref = oracle::pinv_coefficients(sys.X, sys.y);
    for (int j = 0; j < 6; ++j) {
      CHECK(std::abs(fit.coefficients(j) - ref(j)) <= 1e-8 * std::max(1.0, std::abs(ref(j))));
    }
  }
}

TEST_CASE("ols_hc: HC0 matches the sandwich oracle") {
  const auto sys = oracle::random_system(200, 6, 77);
  const auto fit = ols_hc(sys.X, sys.y);
  const Eigen::VectorXd ref_beta = oracle::pinv_coefficients(sys.X, sys.y);
  const Eigen::MatrixXd ref = oracle::sandwich_hc0(sys.X, sys.y - sys.X * ref_beta);
  CHECK((fit.robust_cov - ref).cwiseAbs().maxCoeff() < 1e-10);
  for (int j = 0; j < 6; ++j) CHECK(std::abs(fit.se(j) - std::sqrt(ref(j, j))) < 1e-10);

  // Under heteroskedasticity the classical formula disagrees.
  const double s2 = fit.residuals.squaredNorm() / (200 - 6);
  const Eigen::MatrixXd classical = s2 * (sys.X.transpose() * sys.X).inverse();
  CHECK(std::abs(std::sqrt(classical(1, 1)) - fit.se(1)) > 0.05 * fit.se(1));
}

TEST_CASE("ols_hc: HC1 scales HC0 by n / (n - p)") {
  const auto sys = oracle::random_system(50, 4, 3);
  const auto hc0 = ols_hc(sys.X, sys.y, HcVariant::HC0);
  const auto hc1 = ols_hc(sys.X, sys.y, HcVariant::HC1);
  CHECK((hc1.robust_cov - hc0.robust_cov * 50.0 / 46.0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ols_hc: robust covariance is symmetric positive semidefinite") {
  const auto sys = oracle::random_system(120, 5, 9);
  const auto fit = ols_hc(sys.X, sys.y);
  CHECK((fit.robust_cov - fit.robust_cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.robust_cov);
  CHECK(eig.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("ols_hc: near-collinear columns stay accurate") {
  auto sys = oracle::random_system(300, 4, 5);
  const auto noise = oracle::random_system(300, 2, 6);
  sys.X.col(3) = sys.X.col(2) + 1e-6 * noise.X.col(1);
  const auto fit = ols_hc(sys.X, sys.y);
  const Eigen::VectorXd ref = oracle::pinv_coefficients(sys.X, sys.y);
  CHECK((fit.coefficients - ref).cwiseAbs().maxCoeff() < 1e-4 * ref.cwiseAbs().maxCoeff());
}

TEST_CASE("ols_hc: rank deficiency names the dependent column") {
  auto sys = oracle::random_system(40, 4, 2);
  sys.X.col(3) = 2.0 * sys.X.col(1) - sys.X.col(2);
  try {
    ols_hc(sys.X, sys.y, HcVariant::HC0, {"intercept", "a", "b", "c"});
    FAIL("expected RankDeficientError");
  } catch (const RankDeficientError& e) {
    REQUIRE(e.dependent_columns().size() == 1);
    const auto& name = e.dependent_columns()[0];
    CHECK((name == "a" || name == "b" || name == "c"));
    CHECK(std::string(e.what()).find(name) != std::string::npos);
  }
}

TEST_CASE("ols_hc: n <= p is rejected") {
  const auto sys = oracle::random_system(4, 4, 1);
  CHECK_THROWS_AS(ols_hc(sys.X, sys.y), EstimationError);
}

TEST_CASE("LeastSquares::fit_selected agrees with the full covariance") {
  const auto sys = oracle::random_system(150, 6, 21);
  const LeastSquares ls(sys.X);
  const auto full = ls.fit(sys.y, HcVariant::HC1);
  const auto sel = ls.fit_selected(sys.y, {0, 4}, HcVariant::HC1);
  CHECK(sel[0].estimate == doctest::Approx(full.coefficients(0)).epsilon(1e-12));
  CHECK(sel[1].se == doctest::Approx(full.se(4)).epsilon(1e-10));
}

TEST_CASE("estimate_irf: shape and CI") {
  const auto result = estimate_irf(simulated_panel());
  CHECK(result.failures.empty());
  REQUIRE(result.estimates.size() == 36);
  for (std::size_t i = 0; i < result.estimates.size(); ++i) {
    const auto& e = result.estimates[i];
    CHECK(e.horizon == static_cast<int>(i) + 1);
    CHECK(e.horizon_min == 5 * e.horizon);
    CHECK(e.rd == "pooled");
    CHECK(e.outcome == "waiting");
    CHECK(e.subgroup == "all");
    CHECK(e.ci_lo == doctest::Approx(e.psi - 1.96 * e.se));
    CHECK(e.ci_hi == doctest::Approx(e.psi + 1.96 * e.se));
    CHECK(e.n == simulated_panel().observations.size());
  }
}

TEST_CASE("estimate_irf: horizons are estimated independently") {
  const auto all = estimate_irf(simulated_panel());
  IrfOptions only;
  only.horizons = {36, 7};
  const auto some = estimate_irf(simulated_panel(), Subgroup::All, only);
  REQUIRE(some.estimates.size() == 2);
  CHECK(at_horizon(some, 36).psi == at_horizon(all, 36).psi);
  CHECK(at_horizon(some, 36).se == at_horizon(all, 36).se);
  CHECK(at_horizon(some, 7).psi == at_horizon(all, 7).psi);
}

TEST_CASE("estimate_irf: reference site changes controls but not psi") {
  IrfOptions a, b;
  a.horizons = b.horizons = {6, 36};
  b.reference_site = "UC2";
  const auto ra = estimate_irf(simulated_panel(), Subgroup::All, a);
  const auto rb = estimate_irf(simulated_panel(), Subgroup::All, b);
  for (int h : {6, 36}) {
    CHECK(at_horizon(rb, h).psi == doctest::Approx(at_horizon(ra, h).psi).epsilon(1e-9));
    CHECK(at_horizon(rb, h).se == doctest::Approx(at_horizon(ra, h).se).epsilon(1e-8));
  }
}

TEST_CASE("estimate_irf: no jump at the event time") {
  // Balance at t needs the prediction to be mostly noise around the cutoff.
  // With the default state-driven predictor the treated side is busier.
  auto network = default_config().network;
  for (auto& site : network.sites) site.predictor = {150.0, 1.0, 0.0, 60.0};
  IrfOptions opts;
  opts.horizons = {0};
  const auto r = estimate_irf(panel_of(network, 11), Subgroup::All, opts);
  REQUIRE(r.estimates.size() == 1);
  const auto& e = r.estimates[0];
  CHECK(e.horizon_min == 0);
  CHECK(std::abs(e.psi) < 3.0 * e.se);
}

TEST_CASE("estimate_irf: interacted effects carry RD labels") {
  IrfOptions opts;
  opts.interact_rd = true;
  opts.horizons = {6};
  const auto r = estimate_irf(simulated_panel(), Subgroup::All, opts);
  REQUIRE_FALSE(r.estimates.empty());
  for (const auto& e : r.estimates) {
    CHECK(RdPoint::from_label(e.rd).has_value());
    CHECK(e.horizon == 6);
  }
  CHECK(r.estimates.size() + r.skipped_rd.size() == simulated_panel().counts_by_rd.size());
}

TEST_CASE("estimate_irf: subgroup filter and empty subgroup") {
  const auto ed = estimate_irf(simulated_panel(), Subgroup::ED, {.horizons = {1}});
  CHECK(ed.estimates[0].subgroup == "ED");
  CHECK(ed.estimates[0].n < simulated_panel().observations.size());

  Panel ed_only = filter_subgroup(simulated_panel(), Subgroup::ED);
  CHECK_THROWS_AS(estimate_irf(ed_only, Subgroup::UC), EstimationError);
}

TEST_CASE("estimate_irf: fewer lags than the panel carries") {
  IrfOptions opts;
  opts.horizons = {3};
  opts.lags = 4;
  CHECK(estimate_irf(simulated_panel(), Subgroup::All, opts).estimates.size() == 1);
  opts.lags = 15;
  CHECK_THROWS_AS(estimate_irf(simulated_panel(), Subgroup::All, opts), EstimationError);
}

TEST_CASE("estimate_irf: a failing horizon does not stop the others") {
  // A panel of two observations cannot support any regression.
  Panel tiny = simulated_panel();
  tiny.observations.resize(2);
  const auto r = estimate_irf(tiny, Subgroup::All, {.horizons = {1, 2}});
  CHECK(r.estimates.empty());
  CHECK(r.failures.size() == 2);
}

TEST_CASE("write_irf_csv") {
  const auto r = estimate_irf(simulated_panel(), Subgroup::All, {.horizons = {1, 2}});
  std::ostringstream out;
  write_irf_csv(out, r.estimates);
  const auto text = out.str();
  CHECK(text.rfind("outcome,subgroup,rd,horizon_min,psi,se,ci_lo,ci_hi,n\n", 0) == 0);
  CHECK(text.find("\nwaiting,all,pooled,5,") != std::string::npos);
  CHECK(text.find("\nwaiting,all,pooled,10,") != std::string::npos);
}
