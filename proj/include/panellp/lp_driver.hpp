#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "panellp/inference.hpp"
#include "panellp/lp_spec.hpp"
#include "panellp/panel_data.hpp"

namespace panellp {

/// One (horizon, estimator) cell. A gap row has ok == false and carries the
/// error message instead of estimates.
struct IRFRow {
  int horizon = 0;
  Estimator estimator = Estimator::FE;
  bool ok = false;
  std::string error;
  Eigen::VectorXd coefficients;  // unscaled
  std::vector<std::string> regressor_names;
  CoefficientInference shock;  // scaled by irf_scale
  std::size_t n_units = 0;
  std::size_t n_rows = 0;
  std::vector<std::string> warnings;
};

struct IRFResult {
  LPSpec spec;
  std::vector<IRFRow> rows;  // horizon ascending, then FE, SPJ, DB
  std::vector<std::string> warnings;

  const IRFRow* find(int horizon, Estimator e) const;
  std::vector<Estimator> estimators() const { return spec.estimators; }
};

/// Auxiliary quantities of the analytic bias correction.
struct DbAuxiliary {
  double beta0 = 0.0;
  double rho = 0.0;
  double sigma2_ux = 0.0;
};

/// Throws UnknownVariable if the spec refers to a column the data lacks.
void check_spec_against(const PanelDataset& data, const LPSpec& spec);

/// β̂⁰ from the h = 0 FE fit and the panel AR(1) of the shock.
DbAuxiliary db_auxiliary(const PanelDataset& data, const LPSpec& spec);

IRFResult run_lp(const PanelDataset& data, const LPSpec& spec);

enum class PeakRule { MostNegative, MostPositive, MaxAbs };
std::string_view to_string(PeakRule r);
PeakRule parse_peak_rule(std::string_view s);

/// |a / fe - 1| * 100, or nothing when fe == 0.
std::optional<double> relative_difference(double a, double fe);

struct ComparisonRow {
  Estimator estimator = Estimator::FE;
  int peak_horizon = 0;
  double estimate = 0.0;
  double fe_at_peak = 0.0;   // FE at this estimator's peak horizon
  int fe_peak_horizon = 0;
  double fe_peak = 0.0;      // FE at its own peak
  std::optional<double> relative_at_peak;   // vs FE at the same horizon
  std::optional<double> relative_peak_to_peak;  // vs FE at its own peak
};

/// Peaks are located per estimator over the non-gap rows.
std::vector<ComparisonRow> compare_estimators(const IRFResult& result, PeakRule rule);

void write_irf_csv(std::ostream& out, const IRFResult& result);
void write_warnings_csv(std::ostream& out, const IRFResult& result);
nlohmann::json irf_to_json(const IRFResult& result);
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows, PeakRule rule);

}  // namespace panellp
