#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "panellp/lp_spec.hpp"

namespace panellp {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return std::isnan(v); }

struct UnitBlock {
  std::string id;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

/// Long-format panel. Rows are grouped by unit (units keep the order in which
/// they first appeared in the input) and sorted by time within each unit.
/// Missing values are stored as NaN.
class PanelDataset {
 public:
  PanelDataset() = default;

  /// Builds a dataset from rows that are already grouped by unit. Throws
  /// NonMonotoneTime if a unit's rows are not contiguous or its times do not
  /// strictly increase, and DuplicateKey on a repeated (unit, time) pair.
  static PanelDataset from_grouped_rows(std::span<const std::string> unit_of_row,
                                        std::vector<std::int64_t> times,
                                        std::vector<std::string> variable_names,
                                        std::vector<std::vector<double>> columns);

  std::size_t rows() const noexcept { return times_.size(); }
  std::size_t n_units() const noexcept { return units_.size(); }
  std::span<const UnitBlock> units() const noexcept { return units_; }
  std::span<const std::int64_t> times() const noexcept { return times_; }
  const std::vector<std::string>& variables() const noexcept { return names_; }
  bool has_variable(std::string_view name) const;
  std::span<const double> column(std::string_view name) const;
  bool balanced() const noexcept { return balanced_; }

  /// Row holding (unit, time), if observed.
  std::optional<std::size_t> find_row(std::size_t unit, std::int64_t time) const;

 private:
  std::vector<UnitBlock> units_;
  std::vector<std::int64_t> times_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<bool> contiguous_;
  bool balanced_ = false;
};

struct CsvSchema {
  std::string unit_column = "unit";
  std::string time_column = "time";
  /// Variables to keep; empty keeps every other column.
  std::vector<std::string> variables;
};

/// Reads a long-format CSV (header row, comma separated, empty cell = missing).
PanelDataset load_csv(const std::string& path, const CsvSchema& schema = {});
PanelDataset read_csv(std::istream& in, const CsvSchema& schema = {});

enum class Half : std::uint8_t { A, B };
enum class DemeanMode { OneWay, TwoWay };

std::string_view to_string(DemeanMode m);
DemeanMode demean_mode_for(FixedEffects fe);

struct SampleGroup {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

/// Row bookkeeping shared by raw and demeaned samples. Rows of one unit are
/// contiguous and time-ordered.
struct SampleLayout {
  std::vector<SampleGroup> groups;
  std::vector<std::size_t> row_group;
  std::vector<std::size_t> row_period;  // dense index into periods
  std::vector<std::int64_t> periods;    // distinct time values, ascending
  std::vector<Half> halves;             // empty until labeled

  std::size_t rows() const noexcept { return row_group.size(); }
  std::size_t n_groups() const noexcept { return groups.size(); }
  std::size_t n_periods() const noexcept { return periods.size(); }
  /// Every group observes every period.
  bool balanced() const noexcept;
};

struct RegressionSample {
  int horizon = 0;
  Eigen::VectorXd response;
  Eigen::MatrixXd regressors;
  std::vector<std::string> regressor_names;
  std::vector<std::string> unit_ids;  // aligned with layout.groups
  std::vector<std::int64_t> row_time;
  SampleLayout layout;
  std::vector<std::string> warnings;

  std::size_t n_rows() const noexcept { return static_cast<std::size_t>(response.size()); }
  std::size_t n_units() const noexcept { return layout.n_groups(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(regressors.cols()); }
};

struct DemeanedSample {
  int horizon = 0;
  DemeanMode mode = DemeanMode::OneWay;
  Eigen::VectorXd response;
  Eigen::MatrixXd regressors;
  std::vector<std::string> regressor_names;
  std::vector<std::string> unit_ids;
  std::vector<std::int64_t> row_time;
  SampleLayout layout;
  /// raw = demeaned + unit_effects(group) + time_effects(period); column 0 is
  /// the response, columns 1..d the regressors.
  Eigen::MatrixXd unit_effects;
  Eigen::MatrixXd time_effects;
  std::size_t sweeps = 0;

  std::size_t n_rows() const noexcept { return static_cast<std::size_t>(response.size()); }
  std::size_t n_units() const noexcept { return layout.n_groups(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(regressors.cols()); }
};

/// Per-horizon design: response y_{i,t+h} (or the scaled h-difference) and the
/// regressor stack of `spec`, with listwise deletion. Units with fewer than d+2
/// complete rows are dropped with a warning. Halves are labeled on return.
RegressionSample build_sample(const PanelDataset& data, const LPSpec& spec, int h);

inline constexpr double kDemeanTolerance = 1e-10;
inline constexpr std::size_t kMaxDemeanSweeps = 10000;

DemeanedSample demean(const RegressionSample& sample, DemeanMode mode);
/// Re-applies the projection to already demeaned values.
DemeanedSample demean(const DemeanedSample& sample, DemeanMode mode);

/// First ceil(T_i/2) rows of each unit go to half A, the rest to B.
std::vector<Half> split_halves(const SampleLayout& layout);
std::vector<Half> split_halves(const RegressionSample& sample);

/// Rows of one half, re-indexed as a standalone sample.
RegressionSample subsample(const RegressionSample& sample, Half half);

}  // namespace panellp
