#include "edwait/lp.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "edwait/csv.hpp"

namespace edwait {
namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

// Singular values below this fraction of the largest pivot count as zero.
constexpr double kRankThreshold = 1e-10;

}  // namespace

RankDeficientError::RankDeficientError(std::vector<std::string> dependent_columns)
    : EstimationError("design matrix is rank deficient; linearly dependent columns: " + join(dependent_columns)),
      columns_(std::move(dependent_columns)) {}

double RegressionFit::se(Eigen::Index k) const { return std::sqrt(std::max(0.0, robust_cov(k, k))); }

LeastSquares::LeastSquares(Eigen::MatrixXd x, std::vector<std::string> column_names)
    : x_(std::move(x)), names_(std::move(column_names)) {
  const Eigen::Index n = x_.rows();
  const Eigen::Index p = x_.cols();
  if (names_.empty()) {
    for (Eigen::Index j = 0; j < p; ++j) names_.push_back("x" + std::to_string(j));
  }
  if (static_cast<Eigen::Index>(names_.size()) != p) throw std::invalid_argument("one name per design column required");
  if (p == 0) throw EstimationError("design matrix has no columns");
  if (n <= p) {
    throw EstimationError("need more observations than regressors (n = " + std::to_string(n) +
                          ", p = " + std::to_string(p) + ")");
  }
  if (!x_.allFinite()) throw EstimationError("design matrix contains non-finite values");

  qr_.setThreshold(kRankThreshold);
  qr_.compute(x_);
  if (qr_.rank() < p) {
    std::vector<std::string> dependent;
    const auto& perm = qr_.colsPermutation().indices();
    for (Eigen::Index k = qr_.rank(); k < p; ++k) dependent.push_back(names_[static_cast<std::size_t>(perm(k))]);
    throw RankDeficientError(std::move(dependent));
  }

  q_thin_ = Eigen::MatrixXd::Identity(n, p);
  qr_.householderQ().applyThisOnTheLeft(q_thin_);
  r_inv_ = qr_.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  influence_.resize(static_cast<std::size_t>(p));
}

Eigen::VectorXd LeastSquares::solve(const Eigen::VectorXd& y) const {
  if (y.size() != x_.rows()) throw std::invalid_argument("outcome length does not match design rows");
  if (!y.allFinite()) throw EstimationError("outcome contains non-finite values");
  const Eigen::VectorXd qty = q_thin_.transpose() * y;
  const Eigen::VectorXd z = qr_.matrixR().topLeftCorner(cols(), cols()).triangularView<Eigen::Upper>().solve(qty);
  return qr_.colsPermutation() * z;
}

const Eigen::VectorXd& LeastSquares::influence_row(Eigen::Index k) const {
  auto& slot = influence_[static_cast<std::size_t>(k)];
  if (!slot) {
    const auto& perm = qr_.colsPermutation().indices();
    Eigen::Index pos = 0;
    while (perm(pos) != k) ++pos;
    slot = q_thin_ * r_inv_.row(pos).transpose();
  }
  return *slot;
}

RegressionFit LeastSquares::fit(const Eigen::VectorXd& y, HcVariant hc) const {
  RegressionFit out;
  out.coefficients = solve(y);
  out.residuals = y - x_ * out.coefficients;
  out.n = static_cast<std::size_t>(rows());
  out.column_names = names_;

  // In pivoted coordinates X P = Q R, so (X'X)^-1 X' = P R^-1 Q'.
  const Eigen::MatrixXd scaled = q_thin_.array().colwise() * out.residuals.array();
  const Eigen::MatrixXd meat = scaled.transpose() * scaled;
  Eigen::MatrixXd cov = r_inv_ * meat * r_inv_.transpose();
  cov = qr_.colsPermutation() * cov * qr_.colsPermutation().transpose();
  if (hc == HcVariant::HC1) cov *= static_cast<double>(rows()) / static_cast<double>(rows() - cols());
  out.robust_cov = 0.5 * (cov + cov.transpose());
  return out;
}

std::vector<LeastSquares::Coefficient> LeastSquares::fit_selected(const Eigen::VectorXd& y,
                                                                  const std::vector<Eigen::Index>& which,
                                                                  HcVariant hc) const {
  const Eigen::VectorXd b = solve(y);
  const Eigen::VectorXd e2 = (y - x_ * b).array().square();
  const double scale = hc == HcVariant::HC1 ? static_cast<double>(rows()) / static_cast<double>(rows() - cols()) : 1.0;
  std::vector<Coefficient> out;
  for (Eigen::Index k : which) {
    const auto& a = influence_row(k);
    out.push_back({b(k), std::sqrt(scale * a.array().square().matrix().dot(e2))});
  }
  return out;
}

RegressionFit ols_hc(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, HcVariant hc,
                     std::vector<std::string> column_names) {
  if (y.size() != x.rows()) throw std::invalid_argument("outcome length does not match design rows");
  return LeastSquares(x, std::move(column_names)).fit(y, hc);
}

IrfResult estimate_irf(const Panel& panel, Subgroup subgroup, const IrfOptions& options) {
  const Panel sub = filter_subgroup(panel, subgroup);
  const std::string outcome_tag = panel.outcome.tag();
  const std::string subgroup_tag(to_string(subgroup));
  if (sub.observations.empty()) {
    throw EstimationError("no panel observations for subgroup " + subgroup_tag + " (outcome " + outcome_tag + ")");
  }
  const int lags = options.lags.value_or(panel.options.lags);
  if (lags < 0 || lags > panel.options.lags) {
    throw EstimationError("requested " + std::to_string(lags) + " lags but the panel carries " +
                          std::to_string(panel.options.lags));
  }

  IrfResult result;
  std::set<int> usable_rd;
  for (const auto& [j, cell] : sub.counts_by_rd) {
    if (!options.interact_rd || (cell.treated > 0 && cell.control > 0)) {
      usable_rd.insert(j);
    } else {
      result.skipped_rd.push_back(RdPoint(j).label());
    }
  }
  std::vector<const PanelObservation*> obs;
  for (const auto& o : sub.observations) {
    if (usable_rd.count(o.rd.index())) obs.push_back(&o);
  }
  if (obs.empty()) throw EstimationError("no RD point has observations on both sides of the cutoff");

  std::set<std::string> site_set;
  for (const auto* o : obs) site_set.insert(o->site_id);
  const std::vector<std::string> sites(site_set.begin(), site_set.end());
  const std::string reference = options.reference_site.value_or(sites.front());
  if (!site_set.count(reference)) throw EstimationError("reference site " + reference + " has no observations");
  const std::vector<int> rds(usable_rd.begin(), usable_rd.end());

  // Column layout: treatment term(s), site dummies, RD dummies, lags, intercept.
  std::vector<std::string> names;
  std::vector<Eigen::Index> treatment_cols;
  std::vector<std::string> treatment_labels;
  if (options.interact_rd) {
    for (int j : rds) {
      treatment_cols.push_back(static_cast<Eigen::Index>(names.size()));
      treatment_labels.push_back(RdPoint(j).label());
      names.push_back("treated:" + RdPoint(j).label());
    }
  } else {
    treatment_cols.push_back(0);
    treatment_labels.push_back("pooled");
    names.push_back("treated");
  }
  const auto site_base = static_cast<Eigen::Index>(names.size());
  std::vector<std::string> dummy_sites;
  for (const auto& s : sites) {
    if (s != reference) {
      dummy_sites.push_back(s);
      names.push_back("site:" + s);
    }
  }
  const auto rd_base = static_cast<Eigen::Index>(names.size());
  for (std::size_t i = 1; i < rds.size(); ++i) names.push_back("rd:" + RdPoint(rds[i]).label());
  const auto lag_base = static_cast<Eigen::Index>(names.size());
  for (int l = 1; l <= lags; ++l) names.push_back("lag" + std::to_string(l));
  names.push_back("intercept");
  const auto p = static_cast<Eigen::Index>(names.size());

  auto fill_row = [&](Eigen::MatrixXd& x, Eigen::Index r, const PanelObservation& o) {
    x.row(r).setZero();
    if (options.interact_rd) {
      const auto pos = std::find(rds.begin(), rds.end(), o.rd.index()) - rds.begin();
      if (o.treated) x(r, pos) = 1.0;
    } else {
      x(r, 0) = o.treated ? 1.0 : 0.0;
    }
    if (auto it = std::find(dummy_sites.begin(), dummy_sites.end(), o.site_id); it != dummy_sites.end()) {
      x(r, site_base + (it - dummy_sites.begin())) = 1.0;
    }
    if (const auto pos = std::find(rds.begin(), rds.end(), o.rd.index()) - rds.begin(); pos > 0) {
      x(r, rd_base + pos - 1) = 1.0;
    }
    for (int l = 0; l < lags; ++l) x(r, lag_base + l) = o.y_lag[static_cast<std::size_t>(l)];
    x(r, p - 1) = 1.0;
  };

  std::vector<int> horizons = options.horizons;
  if (horizons.empty()) {
    for (int h = 1; h <= panel.options.leads; ++h) horizons.push_back(h);
  }

  std::vector<std::size_t> cached_rows;
  std::optional<LeastSquares> cached;
  std::string cached_error;
  for (int h : horizons) {
    if (h < 0 || h > panel.options.leads) {
      result.failures.push_back({h, "horizon outside 0.." + std::to_string(panel.options.leads)});
      continue;
    }
    auto outcome_at = [h](const PanelObservation& o) {
      return h == 0 ? o.y_now : o.y_lead[static_cast<std::size_t>(h - 1)];
    };
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (std::isfinite(outcome_at(*obs[i]))) rows.push_back(i);
    }
    if (rows != cached_rows || (!cached && cached_error.empty())) {
      cached.reset();
      cached_error.clear();
      cached_rows = rows;
      Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), p);
      for (std::size_t r = 0; r < rows.size(); ++r) fill_row(x, static_cast<Eigen::Index>(r), *obs[rows[r]]);
      // A lag that never moves (a site pinned at capacity) duplicates the intercept.
      std::vector<Eigen::Index> keep;
      for (Eigen::Index c = 0; c < p; ++c) {
        const bool lag = c >= lag_base && c < p - 1;
        if (!lag || x.rows() == 0 || (x.col(c).array() != x(0, c)).any()) keep.push_back(c);
      }
      std::vector<std::string> kept_names;
      for (auto c : keep) kept_names.push_back(names[static_cast<std::size_t>(c)]);
      if (static_cast<Eigen::Index>(keep.size()) < p) x = x(Eigen::all, keep).eval();
      try {
        cached.emplace(std::move(x), std::move(kept_names));
      } catch (const EstimationError& e) {
        cached_error = e.what();
      }
    }
    if (!cached) {
      result.failures.push_back({h, cached_error});
      continue;
    }
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) y(static_cast<Eigen::Index>(r)) = outcome_at(*obs[rows[r]]);
    try {
      const auto coefs = cached->fit_selected(y, treatment_cols, options.hc);
      for (std::size_t k = 0; k < coefs.size(); ++k) {
        IrfEstimate est;
        est.outcome = outcome_tag;
        est.subgroup = subgroup_tag;
        est.rd = treatment_labels[k];
        est.horizon = h;
        est.horizon_min = h * panel.options.grid_min;
        est.psi = coefs[k].estimate;
        est.se = coefs[k].se;
        est.ci_lo = est.psi - 1.96 * est.se;
        est.ci_hi = est.psi + 1.96 * est.se;
        est.n = rows.size();
        result.estimates.push_back(std::move(est));
      }
    } catch (const EstimationError& e) {
      result.failures.push_back({h, e.what()});
    }
  }
  return result;
}

void write_irf_csv(std::ostream& out, const std::vector<IrfEstimate>& estimates, bool header) {
  if (header) out << "outcome,subgroup,rd,horizon_min,psi,se,ci_lo,ci_hi,n\n";
  for (const auto& e : estimates) {
    out << e.outcome << ',' << e.subgroup << ',' << e.rd << ',' << e.horizon_min << ',' << csv::format_double(e.psi)
        << ',' << csv::format_double(e.se) << ',' << csv::format_double(e.ci_lo) << ','
        << csv::format_double(e.ci_hi) << ',' << e.n << '\n';
  }
}

}  // namespace edwait
