#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panellp/estimators.hpp"
#include "panellp/panel_data.hpp"

namespace panellp {

inline constexpr double kCriticalValue = 1.96;
/// Fewer clusters than this triggers a warning (no small-sample correction is applied).
inline constexpr std::size_t kFewClusters = 10;

struct VarianceEstimate {
  Eigen::MatrixXd covariance;
  Eigen::VectorXd se;
  ClusterMode cluster = ClusterMode::Unit;
  Estimator estimator = Estimator::FE;
  std::vector<std::string> warnings;
};

struct CoefficientInference {
  double estimate = 0.0;
  double se = 0.0;
  double null_value = 0.0;
  double t_stat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;

  bool rejects() const { return std::abs(t_stat) > kCriticalValue; }
  bool covers(double value) const { return ci_lo <= value && value <= ci_hi; }
};

/// Score outer-product sums, each normalised by 1/n.
struct ClusterMeats {
  Eigen::MatrixXd by_unit;  // Σ_i (Σ_t s e)(Σ_t s e)'
  Eigen::MatrixXd by_time;  // Σ_t (Σ_i s e)(Σ_i s e)'
  Eigen::MatrixXd robust;   // Σ_{i,t} s s' e²
};

ClusterMeats cluster_meats(const Eigen::MatrixXd& scores, const Eigen::VectorXd& residuals,
                           const SampleLayout& layout);

/// Q⁻¹ R Q⁻¹ / n for the requested clustering; unit+time combines
/// V_unit + V_time - V_robust and clips any negative diagonal to the robust one.
VarianceEstimate sandwich(const Eigen::MatrixXd& cross_moment, const ClusterMeats& meats,
                          std::size_t n_rows, ClusterMode cluster, const SampleLayout& layout);

/// Unit-clustered FE variance; for d = 1 the SE is
/// sqrt(Σ_i (Σ_t x̃ ẽ)²) / Σ x̃².
VarianceEstimate se_fe_cluster_unit(const DemeanedSample& sample, const FitResult& fit);

/// FE variance with any clustering, scores W̃.
VarianceEstimate var_fe(const DemeanedSample& sample, const FitResult& fit, ClusterMode cluster);

/// Jackknife scores: each row centred on the per-unit mean of the opposite
/// half. In two-way mode the result is also centred across units within each
/// period.
Eigen::MatrixXd d_star(const RegressionSample& sample, DemeanMode mode);

VarianceEstimate var_spj(const RegressionSample& sample, const FitResult& fit, ClusterMode cluster,
                         DemeanMode mode);

CoefficientInference t_and_ci(double estimate, double se, double null_value = 0.0);

/// σ̂²_{xe,h} = (N T_h)⁻¹ Σ_i [Σ_t x̃ ê_db]².
double sigma_xe_h(const DemeanedSample& sample, const FitResult& db);

/// Standard error of the debiased estimator, σ̂_{xe,h} / (s_x² sqrt(N T_h)).
double se_db(double sigma_xe, double s_x, std::size_t n_units, double rows_per_unit);

/// DB variance; unit clustering goes through sigma_xe_h / se_db.
VarianceEstimate var_db(const DemeanedSample& sample, const FitResult& fit, ClusterMode cluster);

}  // namespace panellp
