#include "panellp/inference.hpp"

#include <cmath>
#include <limits>

#include "panellp/error.hpp"

namespace panellp {
namespace {

void check_pair(const DemeanedSample& sample, const FitResult& fit) {
  if (static_cast<std::size_t>(fit.residuals.size()) != sample.n_rows() ||
      static_cast<std::size_t>(fit.coefficients.size()) != sample.dim() ||
      fit.cross_moment.rows() != fit.coefficients.size()) {
    throw InvalidParameter("fit does not belong to this sample");
  }
}

void finish(VarianceEstimate& v) {
  v.covariance = 0.5 * (v.covariance + v.covariance.transpose());
  v.se = v.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

ClusterMeats cluster_meats(const Eigen::MatrixXd& scores, const Eigen::VectorXd& residuals,
                           const SampleLayout& layout) {
  const auto d = scores.cols();
  const auto n = static_cast<double>(layout.rows());
  ClusterMeats m{Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d),
                 Eigen::MatrixXd::Zero(d, d)};
  Eigen::VectorXd v(d);
  for (const auto& g : layout.groups) {
    v.setZero();
    for (std::size_t r = g.begin; r < g.end; ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      v += scores.row(i).transpose() * residuals(i);
    }
    m.by_unit.noalias() += v * v.transpose();
  }

  Eigen::MatrixXd per_period = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(layout.n_periods()));
  for (std::size_t r = 0; r < layout.rows(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    per_period.col(static_cast<Eigen::Index>(layout.row_period[r])) +=
        scores.row(i).transpose() * residuals(i);
  }
  m.by_time.noalias() = per_period * per_period.transpose();

  const Eigen::MatrixXd weighted = scores.array().colwise() * residuals.array();
  m.robust.noalias() = weighted.transpose() * weighted;

  m.by_unit /= n;
  m.by_time /= n;
  m.robust /= n;
  return m;
}

VarianceEstimate sandwich(const Eigen::MatrixXd& cross_moment, const ClusterMeats& meats,
                          std::size_t n_rows, ClusterMode cluster, const SampleLayout& layout) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cross_moment);
  const double n = static_cast<double>(n_rows);
  auto wrap = [&](const Eigen::MatrixXd& meat) -> Eigen::MatrixXd {
    const Eigen::MatrixXd left = ldlt.solve(meat);
    return ldlt.solve(left.transpose()).transpose() / n;
  };

  VarianceEstimate v;
  v.cluster = cluster;
  switch (cluster) {
    case ClusterMode::Unit:
      v.covariance = wrap(meats.by_unit);
      break;
    case ClusterMode::Robust:
      v.covariance = wrap(meats.robust);
      break;
    case ClusterMode::UnitTime: {
      const Eigen::MatrixXd robust = wrap(meats.robust);
      v.covariance = wrap(meats.by_unit) + wrap(meats.by_time) - robust;
      for (Eigen::Index k = 0; k < v.covariance.rows(); ++k) {
        if (v.covariance(k, k) < 0.0) {
          v.covariance(k, k) = robust(k, k);
          v.warnings.push_back("two-way variance had a negative diagonal entry " +
                               std::to_string(k) + "; replaced by the robust variance");
        }
      }
      break;
    }
  }

  if (cluster != ClusterMode::Robust && layout.n_groups() < kFewClusters) {
    v.warnings.push_back("only " + std::to_string(layout.n_groups()) +
                         " unit clusters; clustered standard errors are unreliable");
  }
  if (cluster == ClusterMode::UnitTime && layout.n_periods() < kFewClusters) {
    v.warnings.push_back("only " + std::to_string(layout.n_periods()) +
                         " time clusters; clustered standard errors are unreliable");
  }
  finish(v);
  return v;
}

VarianceEstimate var_fe(const DemeanedSample& sample, const FitResult& fit, ClusterMode cluster) {
  check_pair(sample, fit);
  const auto meats = cluster_meats(sample.regressors, fit.residuals, sample.layout);
  auto v = sandwich(fit.cross_moment, meats, fit.n_rows, cluster, sample.layout);
  v.estimator = fit.estimator;
  return v;
}

VarianceEstimate se_fe_cluster_unit(const DemeanedSample& sample, const FitResult& fit) {
  return var_fe(sample, fit, ClusterMode::Unit);
}

Eigen::MatrixXd d_star(const RegressionSample& sample, DemeanMode mode) {
  const auto& layout = sample.layout;
  const auto& halves = layout.halves.empty() ? split_halves(layout) : layout.halves;
  const auto& w = sample.regressors;
  const auto d = w.cols();
  Eigen::MatrixXd out(w.rows(), d);

  Eigen::RowVectorXd mean_a(d);
  Eigen::RowVectorXd mean_b(d);
  for (const auto& g : layout.groups) {
    mean_a.setZero();
    mean_b.setZero();
    std::size_t na = 0;
    std::size_t nb = 0;
    for (std::size_t r = g.begin; r < g.end; ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      if (halves[r] == Half::A) {
        mean_a += w.row(i);
        ++na;
      } else {
        mean_b += w.row(i);
        ++nb;
      }
    }
    if (na > 0) mean_a /= static_cast<double>(na);
    if (nb > 0) mean_b /= static_cast<double>(nb);
    for (std::size_t r = g.begin; r < g.end; ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      out.row(i) = w.row(i) - (halves[r] == Half::A ? mean_b : mean_a);
    }
  }

  if (mode == DemeanMode::TwoWay) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(layout.n_periods()), d);
    std::vector<std::size_t> counts(layout.n_periods(), 0);
    for (std::size_t r = 0; r < layout.rows(); ++r) {
      sums.row(static_cast<Eigen::Index>(layout.row_period[r])) += out.row(static_cast<Eigen::Index>(r));
      ++counts[layout.row_period[r]];
    }
    for (std::size_t r = 0; r < layout.rows(); ++r) {
      const auto p = layout.row_period[r];
      out.row(static_cast<Eigen::Index>(r)) -=
          sums.row(static_cast<Eigen::Index>(p)) / static_cast<double>(counts[p]);
    }
  }
  return out;
}

VarianceEstimate var_spj(const RegressionSample& sample, const FitResult& fit, ClusterMode cluster,
                         DemeanMode mode) {
  if (static_cast<std::size_t>(fit.residuals.size()) != sample.n_rows() ||
      static_cast<std::size_t>(fit.coefficients.size()) != sample.dim()) {
    throw InvalidParameter("fit does not belong to this sample");
  }
  const auto scores = d_star(sample, mode);
  const auto meats = cluster_meats(scores, fit.residuals, sample.layout);
  auto v = sandwich(fit.cross_moment, meats, fit.n_rows, cluster, sample.layout);
  v.estimator = Estimator::SPJ;
  return v;
}

CoefficientInference t_and_ci(double estimate, double se, double null_value) {
  if (!(se >= 0.0)) throw InvalidParameter("standard error must be non-negative");
  CoefficientInference ci;
  ci.estimate = estimate;
  ci.se = se;
  ci.null_value = null_value;
  const double diff = estimate - null_value;
  if (se > 0.0) {
    ci.t_stat = diff / se;
  } else if (diff != 0.0) {
    ci.t_stat = std::copysign(std::numeric_limits<double>::infinity(), diff);
  } else {
    ci.t_stat = 0.0;
  }
  ci.ci_lo = estimate - kCriticalValue * se;
  ci.ci_hi = estimate + kCriticalValue * se;
  return ci;
}

double sigma_xe_h(const DemeanedSample& sample, const FitResult& db) {
  check_pair(sample, db);
  const auto& x = sample.regressors;
  double total = 0.0;
  for (const auto& g : sample.layout.groups) {
    double inner = 0.0;
    for (std::size_t r = g.begin; r < g.end; ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      inner += x(i, 0) * db.residuals(i);
    }
    total += inner * inner;
  }
  return total / static_cast<double>(sample.n_rows());
}

double se_db(double sigma_xe, double s_x, std::size_t n_units, double rows_per_unit) {
  if (!(s_x > 0.0)) throw InvalidParameter("s_x must be positive");
  return sigma_xe / (s_x * s_x * std::sqrt(static_cast<double>(n_units) * rows_per_unit));
}

VarianceEstimate var_db(const DemeanedSample& sample, const FitResult& fit, ClusterMode cluster) {
  check_pair(sample, fit);
  if (cluster != ClusterMode::Unit) {
    auto v = var_fe(sample, fit, cluster);
    v.estimator = Estimator::DB;
    return v;
  }
  const double s_x = std::sqrt(shock_mean_square(sample));
  const double se = se_db(std::sqrt(sigma_xe_h(sample, fit)), s_x, fit.n_units, fit.rows_per_unit());
  VarianceEstimate v;
  v.cluster = cluster;
  v.estimator = Estimator::DB;
  v.covariance = Eigen::MatrixXd::Constant(1, 1, se * se);
  v.se = Eigen::VectorXd::Constant(1, se);
  if (sample.n_units() < kFewClusters) {
    v.warnings.push_back("only " + std::to_string(sample.n_units()) +
                         " unit clusters; clustered standard errors are unreliable");
  }
  return v;
}

}  // namespace panellp
