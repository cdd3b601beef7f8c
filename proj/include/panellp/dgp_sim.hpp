#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "panellp/lp_spec.hpp"
#include "panellp/panel_data.hpp"

namespace panellp {

enum class DgpKind { Prototype, Var1 };
enum class InitMode { BurnIn, Stationary };

std::string_view to_string(DgpKind k);
std::string_view to_string(InitMode m);

/// Parameters of one simulation cell.
///
/// prototype: y = μʸ + β⁰x + uʸ,  x = μˣ + ρx₋₁ + uˣ
/// var1:      y = μʸ + g_t + τy₋₁ + β⁰x + uʸ,  x = μˣ + κy₋₁ + ρx₋₁ + uˣ
/// with μʸ = fe_scale·sqrt(T)·x̄ + ξ, ξ ~ N(0,1), μˣ = mu_x_sd·N(0,1) and
/// g_t = time_linear·t + time_quadratic·t² on the observed periods t = 1..T.
struct DgpParams {
  DgpKind dgp = DgpKind::Prototype;
  double beta0 = -0.6;
  double rho = 0.8;
  double tau = 0.0;
  double kappa = 0.0;
  double fe_scale = 0.2;
  double mu_x_sd = 0.0;
  double time_linear = 0.0;
  double time_quadratic = 0.0;
  int n_units = 50;
  int n_periods = 120;
  int burn_in = 200;
  InitMode init = InitMode::BurnIn;

  /// Throws InvalidParameter, or UnstableSystem for an explosive var1.
  void validate() const;
};

/// Reduced-form transition of the state (y, x)'.
Eigen::Matrix2d var1_transition(double beta0, double rho, double tau, double kappa);
double spectral_radius(const Eigen::Matrix2d& m);

double true_irf_prototype(double beta0, double rho, int h);
/// Response of the h-difference Δ_h y_{t+h} = Σ_{r=1..h} β⁰ρ^r.
double true_irf_cumulative(double beta0, double rho, int h);
/// Coefficient on x_t in the projection of y_{t+h} on (y_t, x_t); β⁰ at h = 0.
double true_irf_var1(double beta0, double rho, double tau, double kappa, int h);
double true_irf(const DgpParams& p, int h);

PanelDataset gen_prototype(const DgpParams& p, std::uint64_t seed, std::uint64_t replication);
PanelDataset gen_var1(const DgpParams& p, std::uint64_t seed, std::uint64_t replication);
PanelDataset generate(const DgpParams& p, std::uint64_t seed, std::uint64_t replication);

/// A Monte Carlo study: the base parameters crossed with the rho and (N, T)
/// grids.
struct SimConfig {
  DgpParams base;
  std::vector<double> rho_grid;
  std::vector<std::pair<int, int>> size_grid;
  int horizon_min = 0;
  int horizon_max = 10;
  int replications = 1000;
  std::uint64_t seed = 20231001;
  std::vector<Estimator> estimators{Estimator::FE, Estimator::SPJ, Estimator::DB};
  ClusterMode cluster = ClusterMode::Unit;
  FixedEffects fixed_effects = FixedEffects::Unit;

  void validate() const;
  std::vector<DgpParams> cells() const;
  /// Estimation spec used for the horizons h >= first_horizon.
  LPSpec lp_spec() const;
};

/// Defaults depend on `dgp`; see the bundled configs for annotated examples.
SimConfig parse_sim_config(const std::string& text);
SimConfig load_sim_config(const std::string& path);
nlohmann::json to_json(const SimConfig& cfg);

struct SimCell {
  DgpKind dgp = DgpKind::Prototype;
  double rho = 0.0;
  int n_units = 0;
  int n_periods = 0;
  int horizon = 0;
  Estimator estimator = Estimator::FE;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;
  std::size_t replications = 0;  // successful ones
  std::size_t failures = 0;
  /// Per-replication estimates and SEs in replication order (NaN on failure);
  /// filled only when raw output is requested.
  std::vector<double> raw_estimates;
  std::vector<double> raw_se;
};

struct SimReport {
  SimConfig config;
  std::vector<SimCell> cells;

  const SimCell* find(double rho, int n, int t, int h, Estimator e) const;
  std::size_t total_failures() const;
};

/// Runs every cell of the study. `threads` = 0 uses the hardware concurrency.
/// Results are identical for any thread count.
SimReport run_mc(const SimConfig& cfg, unsigned threads = 1, bool keep_raw = false);

void write_report_csv(std::ostream& out, const SimReport& report);
void write_raw_csv(std::ostream& out, const SimReport& report);
nlohmann::json report_to_json(const SimReport& report);

}  // namespace panellp
