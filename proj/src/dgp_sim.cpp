#include "panellp/dgp_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "panellp/error.hpp"
#include "panellp/format.hpp"
#include "panellp/lp_driver.hpp"
#include "panellp/rng.hpp"
#include "yaml_util.hpp"

namespace panellp {

std::string_view to_string(DgpKind k) { return k == DgpKind::Prototype ? "prototype" : "var1"; }
std::string_view to_string(InitMode m) { return m == InitMode::BurnIn ? "burn-in" : "stationary"; }

namespace {

DgpKind parse_dgp(std::string_view s) {
  const auto v = detail::lower(s);
  if (v == "prototype") return DgpKind::Prototype;
  if (v == "var1") return DgpKind::Var1;
  throw ValidationError("unknown dgp '" + std::string(s) + "' (expected prototype or var1)");
}

InitMode parse_init(std::string_view s) {
  const auto v = detail::lower(s);
  if (v == "burn-in") return InitMode::BurnIn;
  if (v == "stationary") return InitMode::Stationary;
  throw ValidationError("unknown init '" + std::string(s) + "' (expected burn-in or stationary)");
}

}  // namespace

Eigen::Matrix2d var1_transition(double beta0, double rho, double tau, double kappa) {
  Eigen::Matrix2d m;
  m << tau + beta0 * kappa, beta0 * rho, kappa, rho;
  return m;
}

double spectral_radius(const Eigen::Matrix2d& m) {
  const double tr = m.trace();
  const double det = m.determinant();
  const double disc = tr * tr - 4.0 * det;
  if (disc < 0.0) return std::sqrt(det);
  const double s = std::sqrt(disc);
  return std::max(std::abs(0.5 * (tr + s)), std::abs(0.5 * (tr - s)));
}

void DgpParams::validate() const {
  if (!std::isfinite(beta0) || !std::isfinite(tau) || !std::isfinite(kappa) || !std::isfinite(rho)) {
    throw InvalidParameter("DGP parameters must be finite");
  }
  if (n_units < 2) throw InvalidParameter("N must be at least 2");
  if (n_periods < 4) throw InvalidParameter("T must be at least 4");
  if (burn_in < 0) throw InvalidParameter("burn_in must be >= 0");
  if (!std::isfinite(fe_scale) || !std::isfinite(mu_x_sd) || mu_x_sd < 0.0) {
    throw InvalidParameter("fixed-effect parameters must be finite and mu_x_sd >= 0");
  }
  if (!std::isfinite(time_linear) || !std::isfinite(time_quadratic)) {
    throw InvalidParameter("time-effect coefficients must be finite");
  }
  if (dgp == DgpKind::Prototype) {
    if (!(std::abs(rho) < 1.0)) {
      throw UnstableSystem("shock process is not stationary: spectral radius " + format_double(std::abs(rho)),
                           std::abs(rho));
    }
    return;
  }
  if (init == InitMode::Stationary) throw InvalidParameter("stationary init is available for the prototype only");
  const double r = spectral_radius(var1_transition(beta0, rho, tau, kappa));
  if (!(r < 1.0)) {
    throw UnstableSystem("VAR(1) transition is not stable: spectral radius " + format_double(r), r);
  }
}

double true_irf_prototype(double beta0, double rho, int h) {
  if (!(std::abs(rho) < 1.0)) throw InvalidParameter("true IRF requires |rho| < 1");
  if (h < 0) throw InvalidParameter("horizon must be non-negative");
  return beta0 * std::pow(rho, h);
}

double true_irf_cumulative(double beta0, double rho, int h) {
  if (!(std::abs(rho) < 1.0)) throw InvalidParameter("true IRF requires |rho| < 1");
  if (h < 0) throw InvalidParameter("horizon must be non-negative");
  if (rho == 0.0) return 0.0;
  return beta0 * rho * (1.0 - std::pow(rho, h)) / (1.0 - rho);
}

double true_irf_var1(double beta0, double rho, double tau, double kappa, int h) {
  if (h < 0) throw InvalidParameter("horizon must be non-negative");
  const auto m = var1_transition(beta0, rho, tau, kappa);
  const double r = spectral_radius(m);
  if (!(r < 1.0)) throw UnstableSystem("VAR(1) transition is not stable: spectral radius " + format_double(r), r);
  if (h == 0) return beta0;
  Eigen::Matrix2d p = m;
  for (int k = 1; k < h; ++k) p = (p * m).eval();
  return p(0, 1);
}

double true_irf(const DgpParams& p, int h) {
  return p.dgp == DgpKind::Prototype ? true_irf_prototype(p.beta0, p.rho, h)
                                     : true_irf_var1(p.beta0, p.rho, p.tau, p.kappa, h);
}

namespace {

PanelDataset assemble(const DgpParams& p, std::vector<double> y, std::vector<double> x) {
  const auto n = static_cast<std::size_t>(p.n_units);
  const auto t = static_cast<std::size_t>(p.n_periods);
  std::vector<std::string> ids;
  ids.reserve(n * t);
  std::vector<std::int64_t> times;
  times.reserve(n * t);
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = std::to_string(i + 1);
    for (std::size_t s = 0; s < t; ++s) {
      ids.push_back(id);
      times.push_back(static_cast<std::int64_t>(s + 1));
    }
  }
  return PanelDataset::from_grouped_rows(ids, std::move(times), {"y", "x"}, {std::move(y), std::move(x)});
}

}  // namespace

PanelDataset gen_prototype(const DgpParams& p, std::uint64_t seed, std::uint64_t replication) {
  if (p.dgp != DgpKind::Prototype) throw InvalidParameter("gen_prototype needs dgp = prototype");
  p.validate();
  const auto T = static_cast<std::size_t>(p.n_periods);
  std::vector<double> y(static_cast<std::size_t>(p.n_units) * T);
  std::vector<double> x(y.size());
  const double sqrt_t = std::sqrt(static_cast<double>(p.n_periods));

  for (int i = 0; i < p.n_units; ++i) {
    const auto unit = static_cast<std::uint64_t>(i);
    NormalStream fx(seed, replication, unit, Stream::X);
    NormalStream fy(seed, replication, unit, Stream::Y);
    NormalStream fe(seed, replication, unit, Stream::Effects);
    const double mu_x = p.mu_x_sd * fe();
    const double xi = fe();

    double xp = 0.0;
    if (p.init == InitMode::Stationary) {
      xp = mu_x / (1.0 - p.rho) + fx() / std::sqrt(1.0 - p.rho * p.rho);
    } else {
      for (int b = 0; b < p.burn_in; ++b) xp = mu_x + p.rho * xp + fx();
    }
    double* xi_row = x.data() + static_cast<std::size_t>(i) * T;
    double* yi_row = y.data() + static_cast<std::size_t>(i) * T;
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      xp = mu_x + p.rho * xp + fx();
      xi_row[t] = xp;
      sum += xp;
    }
    const double mu_y = p.fe_scale * sqrt_t * (sum / static_cast<double>(T)) + xi;
    for (std::size_t t = 0; t < T; ++t) yi_row[t] = (p.beta0 * xi_row[t] + fy()) + mu_y;
  }
  return assemble(p, std::move(y), std::move(x));
}

PanelDataset gen_var1(const DgpParams& p, std::uint64_t seed, std::uint64_t replication) {
  if (p.dgp != DgpKind::Var1) throw InvalidParameter("gen_var1 needs dgp = var1");
  p.validate();
  const auto T = static_cast<std::size_t>(p.n_periods);
  std::vector<double> y(static_cast<std::size_t>(p.n_units) * T);
  std::vector<double> x(y.size());
  const double sqrt_t = std::sqrt(static_cast<double>(p.n_periods));

  // Deterministic response of the path to a unit μʸ; μʸ enters linearly, so
  // the final path is the μʸ = 0 path plus μʸ times this response.
  std::vector<double> ry(T);
  std::vector<double> rx(T);
  {
    double yp = 0.0;
    double xp = 0.0;
    for (int b = 0; b < p.burn_in; ++b) {
      const double xn = p.rho * xp + p.kappa * yp;
      yp = 1.0 + p.tau * yp + p.beta0 * xn;
      xp = xn;
    }
    for (std::size_t t = 0; t < T; ++t) {
      const double xn = p.rho * xp + p.kappa * yp;
      yp = 1.0 + p.tau * yp + p.beta0 * xn;
      xp = xn;
      ry[t] = yp;
      rx[t] = xp;
    }
  }
  double abar = 0.0;
  for (double v : rx) abar += v;
  abar /= static_cast<double>(T);
  const double denom = 1.0 - p.fe_scale * sqrt_t * abar;
  if (!(denom > 0.0)) throw InvalidParameter("fixed-effect rule has no solution for these parameters");

  for (int i = 0; i < p.n_units; ++i) {
    const auto unit = static_cast<std::uint64_t>(i);
    NormalStream fx(seed, replication, unit, Stream::X);
    NormalStream fy(seed, replication, unit, Stream::Y);
    NormalStream fe(seed, replication, unit, Stream::Effects);
    NormalStream fb(seed, replication, unit, Stream::BurnInY);
    const double mu_x = p.mu_x_sd * fe();
    const double xi = fe();

    double xp = 0.0;
    double yp = 0.0;
    for (int b = 0; b < p.burn_in; ++b) {
      const double xn = mu_x + p.rho * xp + p.kappa * yp + fx();
      yp = 0.0 + p.tau * yp + p.beta0 * xn + fb();
      xp = xn;
    }
    double* xi_row = x.data() + static_cast<std::size_t>(i) * T;
    double* yi_row = y.data() + static_cast<std::size_t>(i) * T;
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double tt = static_cast<double>(t + 1);
      const double g = p.time_linear * tt + p.time_quadratic * tt * tt;
      const double xn = mu_x + p.rho * xp + p.kappa * yp + fx();
      yp = ((g + p.tau * yp) + p.beta0 * xn) + fy();
      xp = xn;
      xi_row[t] = xp;
      yi_row[t] = yp;
      sum += xp;
    }
    const double mu_y = (p.fe_scale * sqrt_t * (sum / static_cast<double>(T)) + xi) / denom;
    for (std::size_t t = 0; t < T; ++t) {
      xi_row[t] = xi_row[t] + mu_y * rx[t];
      yi_row[t] = yi_row[t] + mu_y * ry[t];
    }
  }
  return assemble(p, std::move(y), std::move(x));
}

PanelDataset generate(const DgpParams& p, std::uint64_t seed, std::uint64_t replication) {
  return p.dgp == DgpKind::Prototype ? gen_prototype(p, seed, replication) : gen_var1(p, seed, replication);
}

void SimConfig::validate() const {
  if (replications < 1) throw InvalidParameter("replications must be >= 1");
  if (horizon_min < 0 || horizon_max < horizon_min) throw InvalidParameter("horizons must satisfy 0 <= min <= max");
  if (estimators.empty()) throw InvalidParameter("no estimators requested");
  if (rho_grid.empty()) throw InvalidParameter("rho grid is empty");
  if (size_grid.empty()) throw InvalidParameter("sizes grid is empty");
  if (base.dgp == DgpKind::Var1 && std::find(estimators.begin(), estimators.end(), Estimator::DB) != estimators.end()) {
    throw InvalidParameter("DB is not available for the var1 design");
  }
  for (const auto& c : cells()) {
    c.validate();
    if (horizon_max >= c.n_periods - 2) {
      throw InvalidParameter("horizon " + std::to_string(horizon_max) + " leaves too few periods with T = " +
                             std::to_string(c.n_periods));
    }
  }
  lp_spec().validate();
}

std::vector<DgpParams> SimConfig::cells() const {
  std::vector<DgpParams> out;
  for (double r : rho_grid) {
    for (const auto& [n, t] : size_grid) {
      DgpParams p = base;
      p.rho = r;
      p.n_units = n;
      p.n_periods = t;
      out.push_back(p);
    }
  }
  return out;
}

LPSpec SimConfig::lp_spec() const {
  LPSpec s;
  s.response = "y";
  s.shock = "x";
  s.horizon_min = horizon_min;
  s.horizon_max = horizon_max;
  s.fixed_effects = fixed_effects;
  s.cluster = cluster;
  s.estimators.clear();
  for (auto e : {Estimator::FE, Estimator::SPJ, Estimator::DB}) {
    if (std::find(estimators.begin(), estimators.end(), e) != estimators.end()) s.estimators.push_back(e);
  }
  if (base.dgp == DgpKind::Var1) s.response_lags = {0};
  return s;
}

namespace {

std::vector<double> double_list(const YAML::Node& n, const std::string& key) {
  std::vector<double> out;
  if (n.IsScalar()) {
    out.push_back(detail::as<double>(n, key));
  } else if (n.IsSequence()) {
    for (const auto& e : n) out.push_back(detail::as<double>(e, key));
  } else {
    throw ValidationError("key '" + key + "' must be a number or a list");
  }
  return out;
}

}  // namespace

SimConfig parse_sim_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ValidationError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ValidationError("config must be a key-value map");
  detail::reject_unknown(root,
                         {"dgp", "beta0", "rho", "tau", "kappa", "fixed_effect_scale", "mu_x_sd", "time_effect",
                          "N", "T", "sizes", "burn_in", "init", "horizons", "replications", "seed",
                          "estimators", "cluster", "fixed_effects"},
                         "config");

  SimConfig c;
  c.base.dgp = parse_dgp(detail::as<std::string>(detail::require(root, "dgp"), "dgp"));
  if (c.base.dgp == DgpKind::Var1) {
    c.base.beta0 = -0.25;
    c.base.tau = 0.5;
    c.base.kappa = -0.5;
    c.base.time_linear = 0.025;
    c.base.time_quadratic = 0.001;
    c.rho_grid = {0.0, 0.2, 0.4, 0.5};
    c.estimators = {Estimator::FE, Estimator::SPJ};
    c.fixed_effects = FixedEffects::UnitTime;
  } else {
    c.rho_grid = {0.8};
  }
  c.size_grid = {{50, 120}};

  if (root["beta0"]) c.base.beta0 = detail::as<double>(root["beta0"], "beta0");
  if (root["rho"]) c.rho_grid = double_list(root["rho"], "rho");
  if (root["tau"]) c.base.tau = detail::as<double>(root["tau"], "tau");
  if (root["kappa"]) c.base.kappa = detail::as<double>(root["kappa"], "kappa");
  if (root["fixed_effect_scale"]) c.base.fe_scale = detail::as<double>(root["fixed_effect_scale"], "fixed_effect_scale");
  if (root["mu_x_sd"]) c.base.mu_x_sd = detail::as<double>(root["mu_x_sd"], "mu_x_sd");
  if (const auto te = root["time_effect"]) {
    if (!te.IsMap()) throw ValidationError("key 'time_effect' must be a map");
    detail::reject_unknown(te, {"linear", "quadratic"}, "time_effect");
    if (te["linear"]) c.base.time_linear = detail::as<double>(te["linear"], "time_effect.linear");
    if (te["quadratic"]) c.base.time_quadratic = detail::as<double>(te["quadratic"], "time_effect.quadratic");
  }
  if (root["sizes"] && (root["N"] || root["T"])) throw ValidationError("give either 'sizes' or 'N'/'T', not both");
  if (const auto s = root["sizes"]) {
    if (!s.IsSequence()) throw ValidationError("key 'sizes' must be a list of [N, T] pairs");
    c.size_grid.clear();
    for (const auto& e : s) {
      if (!e.IsSequence() || e.size() != 2) throw ValidationError("each 'sizes' entry must be [N, T]");
      c.size_grid.emplace_back(detail::as<int>(e[0], "sizes"), detail::as<int>(e[1], "sizes"));
    }
  }
  if (root["N"]) c.size_grid.front().first = detail::as<int>(root["N"], "N");
  if (root["T"]) c.size_grid.front().second = detail::as<int>(root["T"], "T");
  if (root["burn_in"]) c.base.burn_in = detail::as<int>(root["burn_in"], "burn_in");
  if (root["init"]) c.base.init = parse_init(detail::as<std::string>(root["init"], "init"));
  if (root["horizons"]) {
    const auto r = detail::parse_range(root["horizons"], "horizons");
    c.horizon_min = r.first;
    c.horizon_max = r.second;
  }
  if (root["replications"]) c.replications = detail::as<int>(root["replications"], "replications");
  if (root["seed"]) c.seed = detail::as<std::uint64_t>(root["seed"], "seed");
  if (const auto e = root["estimators"]) {
    c.estimators.clear();
    if (e.IsScalar()) {
      c.estimators.push_back(parse_estimator(detail::as<std::string>(e, "estimators")));
    } else if (e.IsSequence()) {
      for (const auto& v : e) c.estimators.push_back(parse_estimator(detail::as<std::string>(v, "estimators")));
    } else {
      throw ValidationError("key 'estimators' must be a list");
    }
  }
  if (root["cluster"]) c.cluster = parse_cluster_mode(detail::as<std::string>(root["cluster"], "cluster"));
  if (root["fixed_effects"]) {
    c.fixed_effects = parse_fixed_effects(detail::as<std::string>(root["fixed_effects"], "fixed_effects"));
  }
  c.validate();
  return c;
}

SimConfig load_sim_config(const std::string& path) {
  return parse_sim_config(detail::read_text_file(path, "config"));
}

nlohmann::json to_json(const SimConfig& c) {
  nlohmann::json sizes = nlohmann::json::array();
  for (const auto& [n, t] : c.size_grid) sizes.push_back({n, t});
  nlohmann::json est = nlohmann::json::array();
  for (auto e : c.estimators) est.push_back(std::string(to_string(e)));
  return {
      {"dgp", std::string(to_string(c.base.dgp))},
      {"beta0", c.base.beta0},
      {"rho", c.rho_grid},
      {"tau", c.base.tau},
      {"kappa", c.base.kappa},
      {"fixed_effect_scale", c.base.fe_scale},
      {"mu_x_sd", c.base.mu_x_sd},
      {"time_effect", {{"linear", c.base.time_linear}, {"quadratic", c.base.time_quadratic}}},
      {"sizes", sizes},
      {"burn_in", c.base.burn_in},
      {"init", std::string(to_string(c.base.init))},
      {"horizons", {{"min", c.horizon_min}, {"max", c.horizon_max}}},
      {"replications", c.replications},
      {"seed", c.seed},
      {"estimators", est},
      {"cluster", std::string(to_string(c.cluster))},
      {"fixed_effects", std::string(to_string(c.fixed_effects))},
  };
}

const SimCell* SimReport::find(double rho, int n, int t, int h, Estimator e) const {
  for (const auto& c : cells) {
    if (c.rho == rho && c.n_units == n && c.n_periods == t && c.horizon == h && c.estimator == e) return &c;
  }
  return nullptr;
}

std::size_t SimReport::total_failures() const {
  std::size_t f = 0;
  for (const auto& c : cells) f += c.failures;
  return f;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

SimReport run_mc(const SimConfig& cfg, unsigned threads, bool keep_raw) {
  cfg.validate();
  SimReport report;
  report.config = cfg;

  const LPSpec spec = cfg.lp_spec();
  const auto& ests = spec.estimators;
  const int n_h = cfg.horizon_max - cfg.horizon_min + 1;
  const std::size_t n_slots = static_cast<std::size_t>(n_h) * ests.size();
  const auto reps = static_cast<std::size_t>(cfg.replications);

  // var1 reports h = 0 through the structural regression on y_{t-1}.
  const bool structural_h0 = cfg.base.dgp == DgpKind::Var1 && cfg.horizon_min == 0;
  LPSpec spec_h0 = spec;
  spec_h0.horizon_min = spec_h0.horizon_max = 0;
  spec_h0.response_lags = {1};
  LPSpec spec_rest = spec;
  if (structural_h0) spec_rest.horizon_min = 1;

  for (const auto& cell : cfg.cells()) {
    std::vector<double> est(reps * n_slots, kMissing);
    std::vector<double> se(reps * n_slots, kMissing);
    std::vector<unsigned char> covers(reps * n_slots, 0);
    std::vector<double> truth(static_cast<std::size_t>(n_h));
    for (int h = cfg.horizon_min; h <= cfg.horizon_max; ++h) {
      truth[static_cast<std::size_t>(h - cfg.horizon_min)] = true_irf(cell, h);
    }

    parallel_for(reps, threads, [&](std::size_t r) {
      IRFResult res;
      try {
        const auto data = generate(cell, cfg.seed, r);
        if (structural_h0) {
          res = run_lp(data, spec_h0);
          if (spec_rest.horizon_min <= spec_rest.horizon_max) {
            auto rest = run_lp(data, spec_rest);
            res.rows.insert(res.rows.end(), rest.rows.begin(), rest.rows.end());
          }
        } else {
          res = run_lp(data, spec);
        }
      } catch (const NumericalError&) {
        return;
      }
      for (int h = cfg.horizon_min; h <= cfg.horizon_max; ++h) {
        const auto hi = static_cast<std::size_t>(h - cfg.horizon_min);
        for (std::size_t k = 0; k < ests.size(); ++k) {
          const IRFRow* row = res.find(h, ests[k]);
          if (!row || !row->ok) continue;
          const std::size_t slot = r * n_slots + hi * ests.size() + k;
          est[slot] = row->shock.estimate;
          se[slot] = row->shock.se;
          covers[slot] = row->shock.covers(truth[hi]) ? 1 : 0;
        }
      }
    });

    for (int h = cfg.horizon_min; h <= cfg.horizon_max; ++h) {
      const auto hi = static_cast<std::size_t>(h - cfg.horizon_min);
      for (std::size_t k = 0; k < ests.size(); ++k) {
        SimCell c;
        c.dgp = cell.dgp;
        c.rho = cell.rho;
        c.n_units = cell.n_units;
        c.n_periods = cell.n_periods;
        c.horizon = h;
        c.estimator = ests[k];
        c.truth = truth[hi];
        double sum = 0.0;
        std::size_t hits = 0;
        for (std::size_t r = 0; r < reps; ++r) {
          const std::size_t slot = r * n_slots + hi * ests.size() + k;
          if (is_missing(est[slot])) {
            ++c.failures;
            continue;
          }
          sum += est[slot];
          hits += covers[slot];
          ++c.replications;
        }
        if (c.replications > 0) {
          const double n = static_cast<double>(c.replications);
          c.mean = sum / n;
          double ss = 0.0;
          for (std::size_t r = 0; r < reps; ++r) {
            const double v = est[r * n_slots + hi * ests.size() + k];
            if (!is_missing(v)) ss += (v - c.mean) * (v - c.mean);
          }
          c.bias = c.mean - c.truth;
          c.rmse = std::sqrt(c.bias * c.bias + ss / n);
          c.coverage = static_cast<double>(hits) / n;
        } else {
          c.mean = c.bias = c.rmse = c.coverage = kMissing;
        }
        if (keep_raw) {
          c.raw_estimates.resize(reps);
          c.raw_se.resize(reps);
          for (std::size_t r = 0; r < reps; ++r) {
            c.raw_estimates[r] = est[r * n_slots + hi * ests.size() + k];
            c.raw_se[r] = se[r * n_slots + hi * ests.size() + k];
          }
        }
        report.cells.push_back(std::move(c));
      }
    }
  }
  return report;
}

void write_report_csv(std::ostream& out, const SimReport& report) {
  out << "dgp,rho,N,T,h,estimator,truth,mean,bias,rmse,coverage,replications,failures\n";
  for (const auto& c : report.cells) {
    out << to_string(c.dgp) << ',' << format_double(c.rho) << ',' << c.n_units << ',' << c.n_periods << ','
        << c.horizon << ',' << to_string(c.estimator) << ',' << format_double(c.truth) << ','
        << format_double(c.mean) << ',' << format_double(c.bias) << ',' << format_double(c.rmse) << ','
        << format_double(c.coverage) << ',' << c.replications << ',' << c.failures << '\n';
  }
}

void write_raw_csv(std::ostream& out, const SimReport& report) {
  out << "dgp,rho,N,T,replication,h,estimator,estimate,se\n";
  for (const auto& c : report.cells) {
    for (std::size_t r = 0; r < c.raw_estimates.size(); ++r) {
      out << to_string(c.dgp) << ',' << format_double(c.rho) << ',' << c.n_units << ',' << c.n_periods << ','
          << r << ',' << c.horizon << ',' << to_string(c.estimator) << ',' << format_double(c.raw_estimates[r])
          << ',' << format_double(c.raw_se[r]) << '\n';
    }
  }
}

nlohmann::json report_to_json(const SimReport& report) {
  auto num = [](double v) -> nlohmann::json {
    if (!std::isfinite(v)) return nullptr;
    return v;
  };
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"dgp", std::string(to_string(c.dgp))},
                     {"rho", c.rho},
                     {"N", c.n_units},
                     {"T", c.n_periods},
                     {"h", c.horizon},
                     {"estimator", std::string(to_string(c.estimator))},
                     {"truth", num(c.truth)},
                     {"mean", num(c.mean)},
                     {"bias", num(c.bias)},
                     {"rmse", num(c.rmse)},
                     {"coverage", num(c.coverage)},
                     {"replications", c.replications},
                     {"failures", c.failures}});
  }
  return {{"config", to_json(report.config)}, {"cells", cells}};
}

}  // namespace panellp
