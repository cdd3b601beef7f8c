#include "panellp/panel_data.hpp"

#include <algorithm>
#include <unordered_set>

#include "panellp/error.hpp"

namespace panellp {

PanelDataset PanelDataset::from_grouped_rows(std::span<const std::string> unit_of_row,
                                             std::vector<std::int64_t> times,
                                             std::vector<std::string> variable_names,
                                             std::vector<std::vector<double>> columns) {
  const std::size_t n = times.size();
  if (unit_of_row.size() != n) {
    throw InvalidParameter("unit and time columns differ in length");
  }
  if (variable_names.size() != columns.size()) {
    throw InvalidParameter("variable names and columns differ in count");
  }
  PanelDataset d;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].size() != n) {
      throw InvalidParameter("column '" + variable_names[c] + "' has " +
                             std::to_string(columns[c].size()) + " values for " +
                             std::to_string(n) + " rows");
    }
    if (!d.index_.emplace(variable_names[c], c).second) {
      throw InvalidParameter("variable '" + variable_names[c] + "' declared twice");
    }
  }

  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < n; ++r) {
    if (r == 0 || unit_of_row[r] != unit_of_row[r - 1]) {
      if (!seen.insert(unit_of_row[r]).second) {
        throw NonMonotoneTime("rows of unit '" + unit_of_row[r] + "' are not contiguous");
      }
      if (!d.units_.empty()) d.units_.back().end = r;
      d.units_.push_back(UnitBlock{unit_of_row[r], r, n});
      continue;
    }
    if (times[r] == times[r - 1]) {
      throw DuplicateKey("duplicate (unit, time) = (" + unit_of_row[r] + ", " +
                         std::to_string(times[r]) + ")");
    }
    if (times[r] < times[r - 1]) {
      throw NonMonotoneTime("time decreases within unit '" + unit_of_row[r] + "' at " +
                            std::to_string(times[r]));
    }
  }

  d.contiguous_.reserve(d.units_.size());
  for (const auto& u : d.units_) {
    const auto span = times[u.end - 1] - times[u.begin];
    d.contiguous_.push_back(static_cast<std::size_t>(span) + 1 == u.size());
  }

  d.balanced_ = true;
  if (!d.units_.empty()) {
    const auto& first = d.units_.front();
    for (const auto& u : d.units_) {
      if (u.size() != first.size() ||
          !std::equal(times.begin() + static_cast<std::ptrdiff_t>(u.begin),
                      times.begin() + static_cast<std::ptrdiff_t>(u.end),
                      times.begin() + static_cast<std::ptrdiff_t>(first.begin))) {
        d.balanced_ = false;
        break;
      }
    }
  }

  d.times_ = std::move(times);
  d.names_ = std::move(variable_names);
  d.columns_ = std::move(columns);
  return d;
}

bool PanelDataset::has_variable(std::string_view name) const {
  return index_.find(std::string(name)) != index_.end();
}

std::span<const double> PanelDataset::column(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw UnknownVariable("unknown variable '" + std::string(name) + "'");
  }
  return columns_[it->second];
}

std::optional<std::size_t> PanelDataset::find_row(std::size_t unit, std::int64_t time) const {
  const auto& u = units_[unit];
  const auto first = times_[u.begin];
  if (time < first || time > times_[u.end - 1]) return std::nullopt;
  if (contiguous_[unit]) return u.begin + static_cast<std::size_t>(time - first);
  auto b = times_.begin() + static_cast<std::ptrdiff_t>(u.begin);
  auto e = times_.begin() + static_cast<std::ptrdiff_t>(u.end);
  auto it = std::lower_bound(b, e, time);
  if (it == e || *it != time) return std::nullopt;
  return static_cast<std::size_t>(it - times_.begin());
}

std::string_view to_string(DemeanMode m) {
  return m == DemeanMode::OneWay ? "one-way" : "two-way";
}

DemeanMode demean_mode_for(FixedEffects fe) {
  return fe == FixedEffects::Unit ? DemeanMode::OneWay : DemeanMode::TwoWay;
}

bool SampleLayout::balanced() const noexcept {
  return std::all_of(groups.begin(), groups.end(),
                     [&](const SampleGroup& g) { return g.size() == periods.size(); });
}

namespace {

struct RegressorSource {
  std::span<const double> column;
  int lag;
};

// Fills row_period/periods from per-row time values.
void index_periods(SampleLayout& layout, const std::vector<std::int64_t>& row_time) {
  layout.periods = row_time;
  std::sort(layout.periods.begin(), layout.periods.end());
  layout.periods.erase(std::unique(layout.periods.begin(), layout.periods.end()),
                       layout.periods.end());
  layout.row_period.resize(row_time.size());
  for (std::size_t r = 0; r < row_time.size(); ++r) {
    auto it = std::lower_bound(layout.periods.begin(), layout.periods.end(), row_time[r]);
    layout.row_period[r] = static_cast<std::size_t>(it - layout.periods.begin());
  }
}

std::string lag_name(const std::string& var, int lag) {
  return lag == 0 ? var + "[t]" : var + "[t-" + std::to_string(lag) + "]";
}

}  // namespace

RegressionSample build_sample(const PanelDataset& data, const LPSpec& spec, int h) {
  if (h < 0) throw InvalidParameter("horizon must be non-negative");
  if (h < spec.horizon_min || h > spec.horizon_max) {
    throw InvalidParameter("horizon " + std::to_string(h) + " outside the spec range [" +
                           std::to_string(spec.horizon_min) + ", " +
                           std::to_string(spec.horizon_max) + "]");
  }

  const auto y = data.column(spec.response);
  std::vector<RegressorSource> sources;
  RegressionSample out;
  out.horizon = h;

  const auto shock = data.column(spec.shock);
  for (int j = 0; j <= spec.shock_lags; ++j) {
    sources.push_back({shock, j});
    out.regressor_names.push_back(lag_name(spec.shock, j));
  }
  for (int k : spec.response_lags) {
    sources.push_back({y, k});
    out.regressor_names.push_back(lag_name(spec.response, k));
  }
  for (const auto& c : spec.extra_controls) {
    const auto col = data.column(c.variable);
    for (int k : c.lags) {
      sources.push_back({col, k});
      out.regressor_names.push_back(lag_name(c.variable, k));
    }
  }

  const std::size_t d = sources.size();
  const std::size_t min_rows = d + 2;
  const bool differenced = spec.response_transform == ResponseTransform::CumulativeDifference;
  const auto times = data.times();

  std::vector<double> resp;
  std::vector<double> regs;  // row-major n x d
  std::vector<double> row_buf(d);
  resp.reserve(data.rows());
  regs.reserve(data.rows() * d);

  for (std::size_t u = 0; u < data.n_units(); ++u) {
    const auto& unit = data.units()[u];
    const std::size_t start = resp.size();
    for (std::size_t r = unit.begin; r < unit.end; ++r) {
      const auto t = times[r];
      const auto lead = data.find_row(u, t + h);
      if (!lead) continue;
      double value = y[*lead];
      if (differenced) value -= y[r];
      if (is_missing(value)) continue;
      bool complete = true;
      for (std::size_t k = 0; k < d && complete; ++k) {
        const auto lagged =
            sources[k].lag == 0 ? std::optional<std::size_t>(r) : data.find_row(u, t - sources[k].lag);
        if (!lagged || is_missing(sources[k].column[*lagged])) {
          complete = false;
        } else {
          row_buf[k] = sources[k].column[*lagged];
        }
      }
      if (!complete) continue;
      resp.push_back(value * spec.response_scale);
      regs.insert(regs.end(), row_buf.begin(), row_buf.end());
      out.row_time.push_back(t);
    }
    const std::size_t count = resp.size() - start;
    if (count == 0) continue;
    if (count < min_rows) {
      out.warnings.push_back("unit '" + unit.id + "' dropped at horizon " + std::to_string(h) +
                             ": " + std::to_string(count) + " complete rows, need at least " +
                             std::to_string(min_rows));
      resp.resize(start);
      regs.resize(start * d);
      out.row_time.resize(start);
      continue;
    }
    const std::size_t g = out.layout.groups.size();
    out.layout.groups.push_back({start, resp.size()});
    out.layout.row_group.insert(out.layout.row_group.end(), count, g);
    out.unit_ids.push_back(unit.id);
  }

  if (resp.empty()) {
    throw EmptySample("no complete rows at horizon " + std::to_string(h));
  }

  const auto n = static_cast<Eigen::Index>(resp.size());
  out.response = Eigen::Map<const Eigen::VectorXd>(resp.data(), n);
  out.regressors = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>(regs.data(), n,
                                                                    static_cast<Eigen::Index>(d));
  index_periods(out.layout, out.row_time);
  out.layout.halves = split_halves(out.layout);
  return out;
}

std::vector<Half> split_halves(const SampleLayout& layout) {
  std::vector<Half> labels(layout.rows(), Half::B);
  for (const auto& g : layout.groups) {
    const std::size_t first = (g.size() + 1) / 2;
    std::fill_n(labels.begin() + static_cast<std::ptrdiff_t>(g.begin), first, Half::A);
  }
  return labels;
}

std::vector<Half> split_halves(const RegressionSample& sample) {
  return split_halves(sample.layout);
}

RegressionSample subsample(const RegressionSample& sample, Half half) {
  const auto& halves =
      sample.layout.halves.empty() ? split_halves(sample.layout) : sample.layout.halves;
  std::vector<Eigen::Index> keep;
  keep.reserve(sample.n_rows());
  RegressionSample out;
  out.horizon = sample.horizon;
  out.regressor_names = sample.regressor_names;

  for (std::size_t g = 0; g < sample.layout.n_groups(); ++g) {
    const auto& grp = sample.layout.groups[g];
    const std::size_t start = keep.size();
    for (std::size_t r = grp.begin; r < grp.end; ++r) {
      if (halves[r] == half) keep.push_back(static_cast<Eigen::Index>(r));
    }
    if (keep.size() == start) continue;
    const std::size_t ng = out.layout.groups.size();
    out.layout.groups.push_back({start, keep.size()});
    out.layout.row_group.insert(out.layout.row_group.end(), keep.size() - start, ng);
    out.unit_ids.push_back(sample.unit_ids[g]);
  }

  const auto n = static_cast<Eigen::Index>(keep.size());
  out.response.resize(n);
  out.regressors.resize(n, sample.regressors.cols());
  out.row_time.resize(keep.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.response(i) = sample.response(keep[i]);
    out.regressors.row(i) = sample.regressors.row(keep[i]);
    out.row_time[i] = sample.row_time[keep[i]];
  }
  index_periods(out.layout, out.row_time);
  out.layout.halves = split_halves(out.layout);
  return out;
}

}  // namespace panellp
