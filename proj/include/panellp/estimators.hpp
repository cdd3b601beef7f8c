#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panellp/panel_data.hpp"

namespace panellp {

/// Full-sample and half-sample FE coefficients behind an SPJ estimate.
struct JackknifeParts {
  Eigen::VectorXd full;
  Eigen::VectorXd half_a;
  Eigen::VectorXd half_b;
};

struct FitResult {
  Estimator estimator = Estimator::FE;
  Eigen::VectorXd coefficients;
  /// ỹ - W̃'θ on the rows of the demeaned sample the fit belongs to.
  Eigen::VectorXd residuals;
  /// Q̂ = W̃'W̃ / n, with n the number of retained rows.
  Eigen::MatrixXd cross_moment;
  std::size_t n_units = 0;
  std::size_t n_rows = 0;
  std::optional<JackknifeParts> jackknife;

  /// Rows per unit; equals T_h in a balanced panel.
  double rows_per_unit() const {
    return n_units == 0 ? 0.0 : static_cast<double>(n_rows) / static_cast<double>(n_units);
  }
};

/// Scalars entering the analytic bias correction of the prototype model.
struct BiasInputs {
  double beta0 = 0.0;       // contemporaneous FE slope
  double rho = 0.0;         // AR(1) coefficient of the shock
  double sigma2_ux = 0.0;   // AR(1) innovation variance
  double s2_x = 0.0;        // mean square of the demeaned shock at this horizon
  double rows_per_unit = 0; // T_h
  int horizon = 0;

  void validate() const;
};

struct Ar1Fit {
  double rho = 0.0;
  double sigma2 = 0.0;
  std::size_t n_units = 0;
  std::size_t n_pairs = 0;
};

inline constexpr double kMaxCondition = 1e12;

/// Least squares on the demeaned design via Householder QR. Throws
/// RankDeficient when the column-equilibrated Q̂ has condition number above
/// kMaxCondition, naming the columns involved in the near-dependence.
FitResult fe_fit(const DemeanedSample& sample);

/// 2·θ̂ - (θ̂_a + θ̂_b)/2, each half re-demeaned on its own rows. Residuals are
/// taken on the full demeaned sample.
FitResult spj_fit(const RegressionSample& sample, DemeanMode mode);

/// Panel AR(1) with unit effects: x_{t+1} on x_t over consecutive time pairs.
/// Units with fewer than two pairs are skipped. The innovation variance is the
/// plain mean of squared residuals.
Ar1Fit ar1_fe(const PanelDataset& data, const std::string& var);

/// Nickell-bias shape function of the prototype model.
double f_T_h(double rho, int T, int h);

/// Asymptotic bias limit under N/T → c.
double bias_limit(double beta0, double rho, int h, double c, double sigma2_ux, double sigma2_x);

/// FE plus the analytic bias correction; prototype (single regressor) only.
FitResult db_fit(const DemeanedSample& sample, const BiasInputs& aux);

/// Mean of squared demeaned shock values (first regressor column).
double shock_mean_square(const DemeanedSample& sample);

}  // namespace panellp
