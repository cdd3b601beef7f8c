#include "panellp/lp_driver.hpp"

#include <algorithm>
#include <cmath>

#include "panellp/error.hpp"
#include "panellp/estimators.hpp"
#include "panellp/format.hpp"
#include "yaml_util.hpp"

namespace panellp {
namespace {

std::string tag(int h, Estimator e) {
  return "h=" + std::to_string(h) + " " + std::string(to_string(e)) + ": ";
}

IRFRow gap_row(int h, Estimator e, const std::string& message) {
  IRFRow row;
  row.horizon = h;
  row.estimator = e;
  row.ok = false;
  row.error = tag(h, e) + message;
  row.shock.estimate = row.shock.se = row.shock.ci_lo = row.shock.ci_hi = kMissing;
  row.shock.t_stat = kMissing;
  return row;
}

IRFRow make_row(int h, const RegressionSample& sample, const FitResult& fit, const VarianceEstimate& var,
                double scale) {
  IRFRow row;
  row.horizon = h;
  row.estimator = fit.estimator;
  row.ok = true;
  row.coefficients = fit.coefficients;
  row.regressor_names = sample.regressor_names;
  row.shock = t_and_ci(scale * fit.coefficients(0), std::abs(scale) * var.se(0));
  row.n_units = fit.n_units;
  row.n_rows = fit.n_rows;
  row.warnings = sample.warnings;
  row.warnings.insert(row.warnings.end(), var.warnings.begin(), var.warnings.end());
  return row;
}

// Spec restricted to one horizon, with response lag 0 removed at h = 0.
LPSpec horizon_spec(const LPSpec& spec, int h, std::vector<std::string>& warnings) {
  LPSpec s = spec;
  s.horizon_min = s.horizon_max = h;
  if (h == 0) {
    const auto it = std::find(s.response_lags.begin(), s.response_lags.end(), 0);
    if (it != s.response_lags.end()) {
      s.response_lags.erase(it);
      warnings.push_back("h=0: response lag 0 would duplicate the response and was dropped");
    }
  }
  return s;
}

}  // namespace

const IRFRow* IRFResult::find(int horizon, Estimator e) const {
  for (const auto& r : rows) {
    if (r.horizon == horizon && r.estimator == e) return &r;
  }
  return nullptr;
}

void check_spec_against(const PanelDataset& data, const LPSpec& spec) {
  auto need = [&](const std::string& v) {
    if (!data.has_variable(v)) throw UnknownVariable("spec refers to unknown variable '" + v + "'");
  };
  need(spec.response);
  need(spec.shock);
  for (const auto& c : spec.extra_controls) need(c.variable);
}

DbAuxiliary db_auxiliary(const PanelDataset& data, const LPSpec& spec) {
  LPSpec s0 = spec;
  s0.horizon_min = s0.horizon_max = 0;
  const auto mode = demean_mode_for(spec.fixed_effects);
  const auto fit0 = fe_fit(demean(build_sample(data, s0, 0), mode));
  const auto ar = ar1_fe(data, spec.shock);
  return {fit0.coefficients(0), ar.rho, ar.sigma2};
}

IRFResult run_lp(const PanelDataset& data, const LPSpec& spec) {
  spec.validate();
  check_spec_against(data, spec);

  IRFResult result;
  result.spec = spec;
  const auto mode = demean_mode_for(spec.fixed_effects);

  std::optional<DbAuxiliary> aux;
  std::string aux_error;
  if (spec.wants(Estimator::DB)) {
    try {
      aux = db_auxiliary(data, spec);
    } catch (const NumericalError& e) {
      aux_error = std::string("bias-correction inputs unavailable: ") + e.what();
    }
  }

  std::vector<Estimator> order;
  for (auto e : {Estimator::FE, Estimator::SPJ, Estimator::DB}) {
    if (spec.wants(e)) order.push_back(e);
  }

  for (int h = spec.horizon_min; h <= spec.horizon_max; ++h) {
    const LPSpec hs = horizon_spec(spec, h, result.warnings);
    std::optional<RegressionSample> sample;
    std::optional<DemeanedSample> demeaned;
    std::string sample_error;
    try {
      sample = build_sample(data, hs, h);
      demeaned = demean(*sample, mode);
    } catch (const NumericalError& e) {
      sample_error = e.what();
    }

    std::optional<FitResult> fe;
    for (auto est : order) {
      if (!sample_error.empty()) {
        result.rows.push_back(gap_row(h, est, sample_error));
        continue;
      }
      try {
        switch (est) {
          case Estimator::FE: {
            fe = fe_fit(*demeaned);
            result.rows.push_back(
                make_row(h, *sample, *fe, var_fe(*demeaned, *fe, spec.cluster), spec.irf_scale));
            break;
          }
          case Estimator::SPJ: {
            const auto fit = spj_fit(*sample, mode);
            result.rows.push_back(
                make_row(h, *sample, fit, var_spj(*sample, fit, spec.cluster, mode), spec.irf_scale));
            break;
          }
          case Estimator::DB: {
            if (!aux) {
              result.rows.push_back(gap_row(h, est, aux_error));
              break;
            }
            BiasInputs in;
            in.beta0 = aux->beta0;
            in.rho = aux->rho;
            in.sigma2_ux = aux->sigma2_ux;
            in.s2_x = shock_mean_square(*demeaned);
            in.rows_per_unit = static_cast<double>(demeaned->n_rows()) /
                               static_cast<double>(demeaned->n_units());
            in.horizon = h;
            const auto fit = db_fit(*demeaned, in);
            result.rows.push_back(
                make_row(h, *sample, fit, var_db(*demeaned, fit, spec.cluster), spec.irf_scale));
            break;
          }
        }
      } catch (const NumericalError& e) {
        result.rows.push_back(gap_row(h, est, e.what()));
      } catch (const InvalidParameter& e) {
        if (est != Estimator::DB) throw;
        result.rows.push_back(gap_row(h, est, e.what()));
      }
    }
  }
  return result;
}

std::string_view to_string(PeakRule r) {
  switch (r) {
    case PeakRule::MostNegative: return "most-negative";
    case PeakRule::MostPositive: return "most-positive";
    case PeakRule::MaxAbs: return "max-abs";
  }
  return "most-negative";
}

PeakRule parse_peak_rule(std::string_view s) {
  const auto v = detail::lower(s);
  if (v == "most-negative") return PeakRule::MostNegative;
  if (v == "most-positive") return PeakRule::MostPositive;
  if (v == "max-abs") return PeakRule::MaxAbs;
  throw ValidationError("unknown peak rule '" + std::string(s) +
                        "' (expected most-negative, most-positive or max-abs)");
}

std::optional<double> relative_difference(double a, double fe) {
  if (fe == 0.0 || !std::isfinite(fe) || !std::isfinite(a)) return std::nullopt;
  return std::abs(a / fe - 1.0) * 100.0;
}

std::vector<ComparisonRow> compare_estimators(const IRFResult& result, PeakRule rule) {
  const auto& ests = result.spec.estimators;
  if (ests.size() < 2) throw InvalidParameter("comparison needs at least two estimators");
  if (!result.spec.wants(Estimator::FE)) throw InvalidParameter("comparison needs the FE estimator");

  auto better = [rule](double a, double b) {
    switch (rule) {
      case PeakRule::MostNegative: return a < b;
      case PeakRule::MostPositive: return a > b;
      case PeakRule::MaxAbs: return std::abs(a) > std::abs(b);
    }
    return false;
  };
  auto peak_of = [&](Estimator e) -> const IRFRow* {
    const IRFRow* best = nullptr;
    for (const auto& r : result.rows) {
      if (r.estimator != e || !r.ok) continue;
      if (!best || better(r.shock.estimate, best->shock.estimate)) best = &r;
    }
    return best;
  };

  const IRFRow* fe_peak = peak_of(Estimator::FE);
  if (!fe_peak) throw EmptySample("FE has no estimated horizon to compare against");

  std::vector<ComparisonRow> out;
  for (auto e : {Estimator::FE, Estimator::SPJ, Estimator::DB}) {
    if (!result.spec.wants(e)) continue;
    const IRFRow* p = peak_of(e);
    if (!p) continue;
    ComparisonRow row;
    row.estimator = e;
    row.peak_horizon = p->horizon;
    row.estimate = p->shock.estimate;
    row.fe_peak_horizon = fe_peak->horizon;
    row.fe_peak = fe_peak->shock.estimate;
    const IRFRow* fe_same = result.find(p->horizon, Estimator::FE);
    row.fe_at_peak = (fe_same && fe_same->ok) ? fe_same->shock.estimate : kMissing;
    if (fe_same && fe_same->ok) row.relative_at_peak = relative_difference(row.estimate, row.fe_at_peak);
    row.relative_peak_to_peak = relative_difference(row.estimate, row.fe_peak);
    out.push_back(row);
  }
  return out;
}

void write_irf_csv(std::ostream& out, const IRFResult& result) {
  out << "horizon,estimator,coefficient,se,ci_lo,ci_hi,n_units,n_rows\n";
  for (const auto& r : result.rows) {
    out << r.horizon << ',' << to_string(r.estimator) << ',';
    if (r.ok) {
      out << format_double(r.shock.estimate) << ',' << format_double(r.shock.se) << ','
          << format_double(r.shock.ci_lo) << ',' << format_double(r.shock.ci_hi) << ',' << r.n_units
          << ',' << r.n_rows << '\n';
    } else {
      out << ",,,,,\n";
    }
  }
}

namespace {

std::string csv_quote(const std::string& s) {
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

void write_warnings_csv(std::ostream& out, const IRFResult& result) {
  out << "horizon,estimator,kind,message\n";
  for (const auto& w : result.warnings) out << ",,warning," << csv_quote(w) << '\n';
  for (const auto& r : result.rows) {
    if (!r.ok) out << r.horizon << ',' << to_string(r.estimator) << ",error," << csv_quote(r.error) << '\n';
    for (const auto& w : r.warnings) {
      out << r.horizon << ',' << to_string(r.estimator) << ",warning," << csv_quote(w) << '\n';
    }
  }
}

namespace {

nlohmann::json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

nlohmann::json irf_to_json(const IRFResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : result.rows) {
    nlohmann::json j{{"horizon", r.horizon}, {"estimator", std::string(to_string(r.estimator))}, {"ok", r.ok}};
    if (r.ok) {
      nlohmann::json coefs = nlohmann::json::object();
      for (Eigen::Index k = 0; k < r.coefficients.size(); ++k) {
        coefs[r.regressor_names[static_cast<std::size_t>(k)]] = num(r.coefficients(k));
      }
      j["coefficient"] = num(r.shock.estimate);
      j["se"] = num(r.shock.se);
      j["t_stat"] = num(r.shock.t_stat);
      j["ci_lo"] = num(r.shock.ci_lo);
      j["ci_hi"] = num(r.shock.ci_hi);
      j["n_units"] = r.n_units;
      j["n_rows"] = r.n_rows;
      j["coefficients"] = coefs;
    } else {
      j["error"] = r.error;
    }
    j["warnings"] = r.warnings;
    rows.push_back(std::move(j));
  }
  return {{"spec", to_json(result.spec)}, {"warnings", result.warnings}, {"rows", rows}};
}

void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows, PeakRule rule) {
  out << "estimator,peak_rule,peak_horizon,estimate,fe_at_peak,relative_diff_pct,fe_peak_horizon,"
         "fe_peak,relative_diff_peak_to_peak_pct\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
  for (const auto& r : rows) {
    out << to_string(r.estimator) << ',' << to_string(rule) << ',' << r.peak_horizon << ','
        << format_double(r.estimate) << ',' << format_double(r.fe_at_peak) << ',' << opt(r.relative_at_peak)
        << ',' << r.fe_peak_horizon << ',' << format_double(r.fe_peak) << ','
        << opt(r.relative_peak_to_peak) << '\n';
  }
}

}  // namespace panellp
