#include "panellp/estimators.hpp"

#include <cmath>
#include <sstream>

#include "panellp/error.hpp"

namespace panellp {
namespace {

// Rejects designs whose equilibrated cross-moment matrix is numerically singular.
void check_conditioning(const DemeanedSample& s, const Eigen::MatrixXd& q) {
  const auto d = q.rows();
  Eigen::VectorXd norms = q.diagonal().cwiseSqrt();

  for (Eigen::Index c = 0; c < d; ++c) {
    Eigen::VectorXd raw = s.regressors.col(c);
    for (std::size_t r = 0; r < s.n_rows(); ++r) {
      raw(static_cast<Eigen::Index>(r)) +=
          s.unit_effects(static_cast<Eigen::Index>(s.layout.row_group[r]), c + 1) +
          s.time_effects(static_cast<Eigen::Index>(s.layout.row_period[r]), c + 1);
    }
    const double raw_norm = raw.norm() / std::sqrt(static_cast<double>(s.n_rows()));
    if (!(norms(c) > 0.0) || norms(c) * norms(c) <= raw_norm * raw_norm / kMaxCondition) {
      throw RankDeficient("column '" + s.regressor_names[static_cast<std::size_t>(c)] +
                          "' has no variation after removing fixed effects");
    }
  }
  if (d == 1) return;

  const Eigen::VectorXd inv = norms.cwiseInverse();
  const Eigen::MatrixXd corr = inv.asDiagonal() * q * inv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(d - 1);
  if (lo > 0.0 && hi / lo < kMaxCondition) return;

  const Eigen::VectorXd v = es.eigenvectors().col(0);
  const double vmax = v.cwiseAbs().maxCoeff();
  std::ostringstream msg;
  msg << "design is rank-deficient (condition estimate "
      << (lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity())
      << "); near-collinear columns:";
  for (Eigen::Index c = 0; c < d; ++c) {
    if (std::abs(v(c)) >= 0.1 * vmax) msg << " '" << s.regressor_names[static_cast<std::size_t>(c)] << "'";
  }
  throw RankDeficient(msg.str());
}

}  // namespace

void BiasInputs::validate() const {
  if (!(std::abs(rho) < 1.0)) throw InvalidParameter("bias correction requires |rho| < 1");
  if (!(sigma2_ux > 0.0)) throw InvalidParameter("AR(1) innovation variance must be positive");
  if (!(s2_x > 0.0)) throw InvalidParameter("shock variance s_x^2 must be positive");
  if (!(rows_per_unit > 0.0)) throw InvalidParameter("T_h must be positive");
  if (horizon < 0) throw InvalidParameter("horizon must be non-negative");
}

FitResult fe_fit(const DemeanedSample& sample) {
  const auto n = static_cast<Eigen::Index>(sample.n_rows());
  const auto d = static_cast<Eigen::Index>(sample.dim());
  if (d == 0) throw InvalidParameter("design has no regressors");
  if (n < d + 1) {
    throw RankDeficient("too few rows (" + std::to_string(n) + ") for " + std::to_string(d) +
                        " regressors");
  }
  const auto& w = sample.regressors;

  FitResult fit;
  fit.estimator = Estimator::FE;
  fit.cross_moment = Eigen::MatrixXd::Zero(d, d);
  fit.cross_moment.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose(), 1.0 / static_cast<double>(n));
  fit.cross_moment = fit.cross_moment.selfadjointView<Eigen::Lower>();
  check_conditioning(sample, fit.cross_moment);

  fit.coefficients = w.householderQr().solve(sample.response);
  fit.residuals = sample.response - w * fit.coefficients;
  fit.n_units = sample.n_units();
  fit.n_rows = sample.n_rows();
  return fit;
}

FitResult spj_fit(const RegressionSample& sample, DemeanMode mode) {
  const auto full_sample = demean(sample, mode);
  FitResult full = fe_fit(full_sample);

  auto half_fit = [&](Half h) {
    try {
      return fe_fit(demean(subsample(sample, h), mode));
    } catch (const RankDeficient& e) {
      throw RankDeficient(std::string(h == Half::A ? "first" : "second") + " half: " + e.what());
    } catch (const EmptySample& e) {
      throw EmptySample(std::string(h == Half::A ? "first" : "second") + " half: " + e.what());
    }
  };
  const FitResult a = half_fit(Half::A);
  const FitResult b = half_fit(Half::B);

  FitResult fit;
  fit.estimator = Estimator::SPJ;
  fit.coefficients = 2.0 * full.coefficients - 0.5 * (a.coefficients + b.coefficients);
  fit.residuals = full_sample.response - full_sample.regressors * fit.coefficients;
  fit.cross_moment = full.cross_moment;
  fit.n_units = full.n_units;
  fit.n_rows = full.n_rows;
  fit.jackknife = JackknifeParts{full.coefficients, a.coefficients, b.coefficients};
  return fit;
}

Ar1Fit ar1_fe(const PanelDataset& data, const std::string& var) {
  const auto x = data.column(var);
  const auto times = data.times();
  double sxy = 0.0;
  double sxx = 0.0;
  double raw_xx = 0.0;
  Ar1Fit out;
  std::vector<double> lead;
  std::vector<double> lag;
  std::vector<double> resid_lead;
  std::vector<double> resid_lag;

  for (const auto& u : data.units()) {
    lead.clear();
    lag.clear();
    for (std::size_t r = u.begin; r + 1 < u.end; ++r) {
      if (times[r + 1] != times[r] + 1 || is_missing(x[r]) || is_missing(x[r + 1])) continue;
      lag.push_back(x[r]);
      lead.push_back(x[r + 1]);
    }
    if (lag.size() < 2) continue;
    double ml = 0.0;
    double mf = 0.0;
    for (std::size_t k = 0; k < lag.size(); ++k) {
      ml += lag[k];
      mf += lead[k];
    }
    ml /= static_cast<double>(lag.size());
    mf /= static_cast<double>(lag.size());
    for (std::size_t k = 0; k < lag.size(); ++k) {
      const double a = lag[k] - ml;
      const double b = lead[k] - mf;
      sxy += a * b;
      sxx += a * a;
      raw_xx += lag[k] * lag[k];
      resid_lag.push_back(a);
      resid_lead.push_back(b);
    }
    ++out.n_units;
    out.n_pairs += lag.size();
  }
  if (out.n_pairs == 0) {
    throw NoWithinVariation("variable '" + var + "' has no unit with three consecutive observations");
  }
  if (!(sxx > 1e-12 * raw_xx)) {
    throw NoWithinVariation("variable '" + var + "' has no within-unit variation");
  }
  out.rho = sxy / sxx;
  double ssr = 0.0;
  for (std::size_t k = 0; k < resid_lag.size(); ++k) {
    const double e = resid_lead[k] - out.rho * resid_lag[k];
    ssr += e * e;
  }
  out.sigma2 = ssr / static_cast<double>(out.n_pairs);
  return out;
}

double f_T_h(double rho, int T, int h) {
  if (!(std::abs(rho) < 1.0)) throw InvalidParameter("f_T_h requires |rho| < 1");
  if (h < 0 || h >= T) throw InvalidParameter("f_T_h requires 0 <= h < T");
  if (h == 0) return 0.0;
  const double th = static_cast<double>(T - h);
  if (2 * h <= T) {
    const double om2 = (1.0 - rho) * (1.0 - rho);
    const double tail = std::pow(rho, T - 2 * h + 1) * (1.0 - std::pow(rho, 2 * h)) /
                        (th * om2 * (1.0 - rho * rho));
    return (1.0 - std::pow(rho, h)) / om2 - static_cast<double>(h) / (th * om2) + tail;
  }
  // The closed form assumes T_h >= h; sum the defining series otherwise.
  double total = 0.0;
  for (int s = 0; s < h; ++s) {
    for (int t = h - s; t <= T - h; ++t) {
      total += (1.0 - static_cast<double>(t) / th) * std::pow(rho, t - h + 2 * s);
    }
  }
  return total;
}

double bias_limit(double beta0, double rho, int h, double c, double sigma2_ux, double sigma2_x) {
  if (!(std::abs(rho) < 1.0)) throw InvalidParameter("bias_limit requires |rho| < 1");
  if (!(c >= 0.0)) throw InvalidParameter("bias_limit requires c >= 0");
  if (!(sigma2_ux > 0.0) || !(sigma2_x > 0.0)) {
    throw InvalidParameter("bias_limit requires positive variances");
  }
  if (h < 0) throw InvalidParameter("horizon must be non-negative");
  return -beta0 * (sigma2_ux / sigma2_x) * std::sqrt(c) * (1.0 - std::pow(rho, h)) /
         ((1.0 - rho) * (1.0 - rho));
}

double shock_mean_square(const DemeanedSample& sample) {
  if (sample.n_rows() == 0 || sample.dim() == 0) return 0.0;
  return sample.regressors.col(0).squaredNorm() / static_cast<double>(sample.n_rows());
}

FitResult db_fit(const DemeanedSample& sample, const BiasInputs& aux) {
  if (sample.dim() != 1) {
    throw InvalidParameter("the debiased estimator is defined for a single shock regressor only");
  }
  aux.validate();
  FitResult fit = fe_fit(sample);
  const int T = static_cast<int>(std::lround(aux.rows_per_unit)) + aux.horizon;
  const double correction = aux.beta0 / (aux.rows_per_unit * aux.s2_x) * aux.sigma2_ux *
                            f_T_h(aux.rho, T, aux.horizon);
  fit.estimator = Estimator::DB;
  fit.coefficients(0) += correction;
  fit.residuals = sample.response - sample.regressors * fit.coefficients;
  return fit;
}

}  // namespace panellp
