#pragma once

// Least squares with sandwich covariance, and per-horizon local projections
// on the RD event panel.

#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "edwait/rd.hpp"

namespace edwait {

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficientError : public EstimationError {
 public:
  explicit RankDeficientError(std::vector<std::string> dependent_columns);
  const std::vector<std::string>& dependent_columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

enum class HcVariant { HC0, HC1 };

struct RegressionFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd robust_cov;
  Eigen::VectorXd residuals;
  std::size_t n = 0;
  int h = 0;
  std::vector<std::string> column_names;

  double se(Eigen::Index k) const;
};

/// Column-pivoted Householder QR of a design matrix, checked for full column
/// rank on construction and reusable across many outcome vectors.
class LeastSquares {
 public:
  explicit LeastSquares(Eigen::MatrixXd x, std::vector<std::string> column_names = {});

  Eigen::Index rows() const { return x_.rows(); }
  Eigen::Index cols() const { return x_.cols(); }
  const std::vector<std::string>& column_names() const { return names_; }

  RegressionFit fit(const Eigen::VectorXd& y, HcVariant hc = HcVariant::HC0) const;

  struct Coefficient {
    double estimate;
    double se;
  };
  /// Estimates and robust standard errors for the listed coefficients only;
  /// O(n) per coefficient once the factorization exists.
  std::vector<Coefficient> fit_selected(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& which,
                                        HcVariant hc = HcVariant::HC0) const;

 private:
  Eigen::VectorXd solve(const Eigen::VectorXd& y) const;
  const Eigen::VectorXd& influence_row(Eigen::Index k) const;

  Eigen::MatrixXd x_;
  std::vector<std::string> names_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::MatrixXd q_thin_;
  Eigen::MatrixXd r_inv_;
  mutable std::vector<std::optional<Eigen::VectorXd>> influence_;  // rows of (X'X)^-1 X'
};

/// OLS with Eicker-Huber-White covariance. Requires n > p and full column rank.
RegressionFit ols_hc(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, HcVariant hc = HcVariant::HC0,
                     std::vector<std::string> column_names = {});

struct IrfOptions {
  std::vector<int> horizons;  // empty: 1..panel leads; 0 regresses the outcome at t
  std::optional<int> lags;    // default: every lag in the panel
  bool interact_rd = false;
  HcVariant hc = HcVariant::HC0;
  std::optional<std::string> reference_site;  // default: first site id
};

struct IrfEstimate {
  std::string outcome;
  std::string subgroup;
  std::string rd = "pooled";
  int horizon = 0;
  int horizon_min = 0;
  double psi = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n = 0;
};

struct HorizonFailure {
  int horizon;
  std::string message;
};

struct IrfResult {
  std::vector<IrfEstimate> estimates;   // ordered by horizon, then RD point
  std::vector<HorizonFailure> failures;
  std::vector<std::string> skipped_rd;  // interacted cells lacking one side of the cutoff
};

/// One regression per horizon of the lead outcome on the treatment dummy
/// (or treatment x RD-point dummies), site and RD-point dummies, the outcome
/// lags and an intercept. Throws EstimationError when the subgroup is empty;
/// failures at individual horizons are collected instead.
IrfResult estimate_irf(const Panel& panel, Subgroup subgroup = Subgroup::All, const IrfOptions& options = {});

void write_irf_csv(std::ostream& out, const std::vector<IrfEstimate>& estimates, bool header = true);

}  // namespace edwait
