#include <algorithm>
#include <cmath>
#include <limits>

#include "panellp/error.hpp"
#include "panellp/panel_data.hpp"

namespace panellp {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Neumaier-compensated accumulator; also tracks the sum of magnitudes so a
// mean at rounding-noise level can be recognised.
struct Accumulator {
  double sum = 0.0;
  double comp = 0.0;
  double abs_sum = 0.0;
  std::size_t n = 0;

  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
    abs_sum += std::abs(v);
    ++n;
  }
  double mean() const { return n == 0 ? 0.0 : (sum + comp) / static_cast<double>(n); }
  // Zero when the mean is indistinguishable from the rounding error of an
  // already centred column; keeps the one-way projection exactly idempotent.
  double centred_mean() const {
    const double m = mean();
    if (n == 0) return 0.0;
    return std::abs(m) <= 4.0 * kEps * (abs_sum / static_cast<double>(n)) ? 0.0 : m;
  }
};

// Subtracts per-group means in place; returns the largest |mean| removed.
double sweep_units(Eigen::MatrixXd& m, const SampleLayout& layout, Eigen::MatrixXd& unit_effects) {
  double largest = 0.0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (std::size_t g = 0; g < layout.n_groups(); ++g) {
      const auto& grp = layout.groups[g];
      Accumulator acc;
      for (std::size_t r = grp.begin; r < grp.end; ++r) acc.add(m(static_cast<Eigen::Index>(r), c));
      const double mu = acc.centred_mean();
      if (mu == 0.0) continue;
      for (std::size_t r = grp.begin; r < grp.end; ++r) m(static_cast<Eigen::Index>(r), c) -= mu;
      unit_effects(static_cast<Eigen::Index>(g), c) += mu;
      largest = std::max(largest, std::abs(mu));
    }
  }
  return largest;
}

double sweep_periods(Eigen::MatrixXd& m, const SampleLayout& layout,
                     Eigen::MatrixXd& time_effects) {
  const std::size_t n = layout.rows();
  const std::size_t p = layout.n_periods();
  double largest = 0.0;
  std::vector<Accumulator> acc(p);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    std::fill(acc.begin(), acc.end(), Accumulator{});
    for (std::size_t r = 0; r < n; ++r) acc[layout.row_period[r]].add(m(static_cast<Eigen::Index>(r), c));
    std::vector<double> mu(p);
    for (std::size_t k = 0; k < p; ++k) {
      mu[k] = acc[k].centred_mean();
      time_effects(static_cast<Eigen::Index>(k), c) += mu[k];
      largest = std::max(largest, std::abs(mu[k]));
    }
    for (std::size_t r = 0; r < n; ++r) m(static_cast<Eigen::Index>(r), c) -= mu[layout.row_period[r]];
  }
  return largest;
}

// Balanced two-way: x - unit mean - period mean + grand mean.
void two_way_balanced(Eigen::MatrixXd& m, const SampleLayout& layout, Eigen::MatrixXd& unit_effects,
                      Eigen::MatrixXd& time_effects) {
  const std::size_t n = layout.rows();
  const std::size_t p = layout.n_periods();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    std::vector<Accumulator> by_period(p);
    Accumulator grand;
    std::vector<double> unit_mean(layout.n_groups());
    for (std::size_t g = 0; g < layout.n_groups(); ++g) {
      Accumulator acc;
      for (std::size_t r = layout.groups[g].begin; r < layout.groups[g].end; ++r) {
        const double v = m(static_cast<Eigen::Index>(r), c);
        acc.add(v);
        by_period[layout.row_period[r]].add(v);
        grand.add(v);
      }
      unit_mean[g] = acc.mean();
    }
    const double gm = grand.mean();
    std::vector<double> period_mean(p);
    for (std::size_t k = 0; k < p; ++k) {
      period_mean[k] = by_period[k].mean();
      time_effects(static_cast<Eigen::Index>(k), c) = period_mean[k] - gm;
    }
    for (std::size_t g = 0; g < layout.n_groups(); ++g) {
      unit_effects(static_cast<Eigen::Index>(g), c) = unit_mean[g];
    }
    for (std::size_t r = 0; r < n; ++r) {
      auto& v = m(static_cast<Eigen::Index>(r), c);
      v = v - unit_mean[layout.row_group[r]] - period_mean[layout.row_period[r]] + gm;
    }
  }
}

DemeanedSample demean_impl(const Eigen::VectorXd& response, const Eigen::MatrixXd& regressors,
                           const SampleLayout& layout, DemeanMode mode, int horizon) {
  if (layout.rows() == 0) throw EmptySample("cannot demean an empty sample");
  const auto n = static_cast<Eigen::Index>(layout.rows());
  const auto d = regressors.cols();

  Eigen::MatrixXd m(n, d + 1);
  m.col(0) = response;
  m.rightCols(d) = regressors;

  DemeanedSample out;
  out.horizon = horizon;
  out.mode = mode;
  out.layout = layout;
  out.unit_effects = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(layout.n_groups()), d + 1);
  out.time_effects = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(layout.n_periods()), d + 1);

  if (mode == DemeanMode::OneWay) {
    sweep_units(m, layout, out.unit_effects);
  } else if (layout.balanced()) {
    two_way_balanced(m, layout, out.unit_effects, out.time_effects);
  } else {
    // Alternating projections; tolerance is relative to each column's scale.
    const Eigen::RowVectorXd scale =
        m.cwiseAbs().colwise().maxCoeff().cwiseMax(Eigen::RowVectorXd::Ones(d + 1));
    const double tol = kDemeanTolerance * scale.maxCoeff();
    const double floor = 1e-15 * scale.maxCoeff();
    bool converged = false;
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t sweep = 1;; ++sweep) {
      const double du = sweep_units(m, layout, out.unit_effects);
      const double dt = sweep_periods(m, layout, out.time_effects);
      const double change = std::max(du, dt);
      out.sweeps = sweep;
      if (change < tol) converged = true;
      // Past the tolerance, keep polishing until the change hits rounding level or stalls.
      if (converged && (change < floor || change >= previous)) break;
      previous = change;
      if (sweep >= kMaxDemeanSweeps) {
        if (converged) break;
        throw NonConvergence("two-way demeaning did not converge within " +
                             std::to_string(kMaxDemeanSweeps) + " sweeps");
      }
    }
  }

  out.response = m.col(0);
  out.regressors = m.rightCols(d);
  return out;
}

}  // namespace

DemeanedSample demean(const RegressionSample& sample, DemeanMode mode) {
  auto out = demean_impl(sample.response, sample.regressors, sample.layout, mode, sample.horizon);
  out.regressor_names = sample.regressor_names;
  out.unit_ids = sample.unit_ids;
  out.row_time = sample.row_time;
  return out;
}

DemeanedSample demean(const DemeanedSample& sample, DemeanMode mode) {
  auto out = demean_impl(sample.response, sample.regressors, sample.layout, mode, sample.horizon);
  out.regressor_names = sample.regressor_names;
  out.unit_ids = sample.unit_ids;
  out.row_time = sample.row_time;
  if (mode == sample.mode) {
    out.unit_effects += sample.unit_effects;
    out.time_effects += sample.time_effects;
  }
  return out;
}

}  // namespace panellp
