#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "panellp/error.hpp"
#include "panellp/estimators.hpp"

using namespace panellp;

namespace {

double max_abs_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("fe_fit: exact line through one unit") {
  Eigen::MatrixXd w(3, 1);
  w << 1, 2, 3;
  const auto s = oracle::manual_sample({0, 0, 0}, {1, 2, 3}, w, Eigen::Vector3d(2, 4, 6));
  const auto fit = fe_fit(demean(s, DemeanMode::OneWay));
  CHECK(fit.coefficients(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(fit.n_units == 1);
  CHECK(fit.n_rows == 3);
}

TEST_CASE("fe_fit: two units, two regressors match OLS with unit dummies") {
  Eigen::MatrixXd w(6, 2);
  w << 1.0, 0.3, 2.0, -1.2, 4.0, 0.8, -1.0, 2.5, 0.5, 1.0, 3.0, -0.4;
  const Eigen::VectorXd y = (Eigen::VectorXd(6) << 1.5, 2.0, 5.1, -0.3, 1.9, 2.2).finished();
  const auto s = oracle::manual_sample({0, 0, 0, 1, 1, 1}, {1, 2, 3, 1, 2, 3}, w, y);
  const auto fit = fe_fit(demean(s, DemeanMode::OneWay));
  const auto ref = oracle::ols_with_dummies(y, w, {0, 0, 0, 1, 1, 1}, {0, 1, 2, 0, 1, 2}, false);
  CHECK(max_abs_diff(fit.coefficients, ref) < 1e-10);
}

TEST_CASE("fe_fit agrees with dense OLS-with-dummies on random unbalanced panels") {
  std::mt19937_64 rng(4242);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const bool unbalanced = trial % 3 != 0;
    const auto design = oracle::random_design(rng, unbalanced);
    const auto s = oracle::manual_sample(design.unit, design.time, design.w, design.y);
    for (const bool two_way : {false, true}) {
      const auto mode = two_way ? DemeanMode::TwoWay : DemeanMode::OneWay;
      const auto fit = fe_fit(demean(s, mode));
      const auto ref = oracle::ols_with_dummies(design.y, design.w, design.unit, design.period, two_way);
      const double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
      CHECK(max_abs_diff(fit.coefficients, ref) < 1e-10 * scale);
      ++checked;
    }
  }
  CHECK(checked == 240);
}

TEST_CASE("fe_fit: residuals satisfy the normal equations") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const auto design = oracle::random_design(rng, true);
    const auto s = oracle::manual_sample(design.unit, design.time, design.w, design.y);
    for (const auto mode : {DemeanMode::OneWay, DemeanMode::TwoWay}) {
      const auto dm = demean(s, mode);
      const auto fit = fe_fit(dm);
      const Eigen::VectorXd score = dm.regressors.transpose() * fit.residuals;
      const double scale = std::max(1.0, dm.regressors.cwiseAbs().maxCoeff() * dm.response.cwiseAbs().maxCoeff());
      CHECK(score.cwiseAbs().maxCoeff() < 1e-8 * scale);
      const Eigen::MatrixXd q = fit.cross_moment;
      CHECK((q - q.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(q.llt().info() == Eigen::Success);
    }
  }
}

TEST_CASE("fe_fit: duplicated regressor is rank deficient and named") {
  Eigen::MatrixXd w(6, 2);
  w << 1, 1, 2, 2, 4, 4, 0, 0, 3, 3, 1, 1;
  const Eigen::VectorXd y = (Eigen::VectorXd(6) << 1, 2, 3, 4, 5, 7).finished();
  const auto s = oracle::manual_sample({0, 0, 0, 1, 1, 1}, {1, 2, 3, 1, 2, 3}, w, y);
  try {
    fe_fit(demean(s, DemeanMode::OneWay));
    FAIL("expected RankDeficient");
  } catch (const RankDeficient& e) {
    const std::string msg = e.what();
    CHECK(msg.find("'w0'") != std::string::npos);
    CHECK(msg.find("'w1'") != std::string::npos);
  }
}

TEST_CASE("fe_fit: a regressor constant within units is rank deficient") {
  Eigen::MatrixXd w(6, 2);
  w << 1, 5, 2, 5, 4, 5, 0, -1, 3, -1, 1, -1;
  const Eigen::VectorXd y = (Eigen::VectorXd(6) << 1, 2, 3, 4, 5, 7).finished();
  const auto s = oracle::manual_sample({0, 0, 0, 1, 1, 1}, {1, 2, 3, 1, 2, 3}, w, y);
  CHECK_THROWS_WITH_AS(fe_fit(demean(s, DemeanMode::OneWay)), doctest::Contains("'w1'"), RankDeficient);
}

TEST_CASE("spj_fit: jackknife combination of independently refitted halves") {
  std::mt19937_64 rng(5150);
  for (int trial = 0; trial < 40; ++trial) {
    const auto design = oracle::random_design(rng, trial % 2 == 0);
    const auto s = oracle::manual_sample(design.unit, design.time, design.w, design.y);
    for (const bool two_way : {false, true}) {
      const auto mode = two_way ? DemeanMode::TwoWay : DemeanMode::OneWay;
      const auto fit = spj_fit(s, mode);
      REQUIRE(fit.jackknife.has_value());
      const auto& parts = *fit.jackknife;
      const Eigen::VectorXd combined = 2.0 * parts.full - 0.5 * (parts.half_a + parts.half_b);
      CHECK((combined.array() == fit.coefficients.array()).all());

      // Each half is a bona fide FE fit on its own rows with its own dummies.
      for (const auto half : {Half::A, Half::B}) {
        std::vector<std::size_t> unit;
        std::vector<std::size_t> period;
        std::vector<Eigen::Index> rows;
        for (std::size_t r = 0; r < s.n_rows(); ++r) {
          if (s.layout.halves[r] != half) continue;
          rows.push_back(static_cast<Eigen::Index>(r));
          unit.push_back(design.unit[r]);
          period.push_back(design.period[r]);
        }
        // Compact unit and period labels so the oracle sees no empty dummies.
        auto compact = [](std::vector<std::size_t>& v) {
          std::vector<std::size_t> d = v;
          std::sort(d.begin(), d.end());
          d.erase(std::unique(d.begin(), d.end()), d.end());
          for (auto& x : v) x = static_cast<std::size_t>(std::lower_bound(d.begin(), d.end(), x) - d.begin());
        };
        compact(unit);
        compact(period);
        Eigen::MatrixXd hw(static_cast<Eigen::Index>(rows.size()), design.w.cols());
        Eigen::VectorXd hy(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
          hw.row(static_cast<Eigen::Index>(k)) = design.w.row(rows[k]);
          hy(static_cast<Eigen::Index>(k)) = design.y(rows[k]);
        }
        const auto ref = oracle::ols_with_dummies(hy, hw, unit, period, two_way);
        const auto& got = half == Half::A ? parts.half_a : parts.half_b;
        const double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
        CHECK(max_abs_diff(got, ref) < 1e-9 * scale);
      }

      const auto full_ref = oracle::ols_with_dummies(design.y, design.w, design.unit, design.period, two_way);
      CHECK(max_abs_diff(parts.full, full_ref) < 1e-10 * std::max(1.0, full_ref.cwiseAbs().maxCoeff()));

      const auto dm = demean(s, mode);
      CHECK(max_abs_diff(fit.residuals, dm.response - dm.regressors * fit.coefficients) == 0.0);
    }
  }
}

TEST_CASE("spj_fit: arithmetic of the combination") {
  // 2·1.0 − (0.8 + 0.6)/2
  const Eigen::VectorXd full = Eigen::VectorXd::Constant(1, 1.0);
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 0.8);
  const Eigen::VectorXd b = Eigen::VectorXd::Constant(1, 0.6);
  CHECK((2.0 * full - 0.5 * (a + b))(0) == doctest::Approx(1.3).epsilon(1e-15));
}

TEST_CASE("spj_fit: noise-free data is a fixed point") {
  std::vector<std::size_t> unit;
  std::vector<std::int64_t> time;
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < 4; ++i) {
    for (int t = 1; t <= 10; ++t) {
      const double x = std::sin(3.0 * t + static_cast<double>(i)) + 0.1 * t * static_cast<double>(i);
      unit.push_back(i);
      time.push_back(t);
      xs.push_back(x);
      ys.push_back(-0.45 * x + 3.0 * static_cast<double>(i));
    }
  }
  const Eigen::MatrixXd w = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  const Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  const auto s = oracle::manual_sample(unit, time, w, y);
  const auto fit = spj_fit(s, DemeanMode::OneWay);
  CHECK(fit.coefficients(0) == doctest::Approx(-0.45).epsilon(1e-12));
  CHECK(fit.jackknife->half_a(0) == doctest::Approx(-0.45).epsilon(1e-12));
  CHECK(fit.jackknife->half_b(0) == doctest::Approx(-0.45).epsilon(1e-12));
}

TEST_CASE("spj_fit: linear in the response") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 20; ++trial) {
    const auto design = oracle::random_design(rng, true);
    const auto s = oracle::manual_sample(design.unit, design.time, design.w, design.y);
    auto scaled = s;
    scaled.response *= -3.5;
    for (const auto mode : {DemeanMode::OneWay, DemeanMode::TwoWay}) {
      const auto base = spj_fit(s, mode);
      const auto k = spj_fit(scaled, mode);
      const double scale = std::max(1.0, base.coefficients.cwiseAbs().maxCoeff());
      CHECK(max_abs_diff(k.coefficients, -3.5 * base.coefficients) < 1e-10 * scale);
    }
  }
}

TEST_CASE("ar1_fe: exact recursion gives rho 0.5 and zero variance") {
  std::vector<std::string> ids;
  std::vector<std::int64_t> t;
  std::vector<double> x;
  const double starts[] = {4.0, -2.0, 10.0};
  for (int i = 0; i < 3; ++i) {
    double v = starts[i];
    for (int s = 1; s <= 8; ++s) {
      ids.push_back("u" + std::to_string(i));
      t.push_back(s);
      x.push_back(v);
      v *= 0.5;
    }
  }
  const auto d = PanelDataset::from_grouped_rows(ids, t, {"x"}, {x});
  const auto fit = ar1_fe(d, "x");
  CHECK(fit.rho == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.sigma2 < 1e-24);
  CHECK(fit.n_units == 3);
  CHECK(fit.n_pairs == 21);
}

TEST_CASE("ar1_fe: plain least squares with unit effects") {
  std::vector<std::string> ids;
  std::vector<std::int64_t> t;
  std::vector<double> x;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::size_t> unit;
  for (int i = 0; i < 4; ++i) {
    double v = z(rng);
    for (int s = 1; s <= 9; ++s) {
      ids.push_back("u" + std::to_string(i));
      t.push_back(s);
      x.push_back(v);
      v = 0.6 * v + z(rng) + 0.3 * i;
    }
  }
  const auto d = PanelDataset::from_grouped_rows(ids, t, {"x"}, {x});
  const auto fit = ar1_fe(d, "x");

  Eigen::VectorXd lead(32);
  Eigen::MatrixXd lag(32, 1);
  std::vector<std::size_t> pair_unit;
  std::vector<std::size_t> pair_period;
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t s = 0; s < 8; ++s) {
      lag(k, 0) = x[i * 9 + s];
      lead(k) = x[i * 9 + s + 1];
      pair_unit.push_back(i);
      pair_period.push_back(s);
      ++k;
    }
  }
  const auto ref = oracle::ols_with_dummies(lead, lag, pair_unit, pair_period, false);
  CHECK(fit.rho == doctest::Approx(ref(0)).epsilon(1e-12));
  const Eigen::VectorXd e = oracle::dummy_residual(lead, pair_unit, pair_period, false) -
                            ref(0) * oracle::dummy_residual(lag.col(0), pair_unit, pair_period, false);
  CHECK(fit.sigma2 == doctest::Approx(e.squaredNorm() / 32.0).epsilon(1e-10));
}

TEST_CASE("ar1_fe: constant series has no within variation") {
  const auto d = PanelDataset::from_grouped_rows(std::vector<std::string>{"a", "a", "a", "a", "b", "b", "b"}, {1, 2, 3, 4, 1, 2, 3},
                                                 {"x"}, {{2, 2, 2, 2, 5, 5, 5}});
  CHECK_THROWS_AS(ar1_fe(d, "x"), NoWithinVariation);
}

TEST_CASE("ar1_fe: too short units are rejected") {
  const auto d = PanelDataset::from_grouped_rows(std::vector<std::string>{"a", "a", "b", "b"}, {1, 2, 1, 2}, {"x"}, {{1, 2, 3, 4}});
  CHECK_THROWS_AS(ar1_fe(d, "x"), NoWithinVariation);
}

TEST_CASE("f_T_h: worked values") {
  CHECK(f_T_h(0.8, 120, 0) == 0.0);
  CHECK(f_T_h(-0.3, 7, 0) == 0.0);
  CHECK(f_T_h(0.0, 10, 1) == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
  CHECK(std::abs(f_T_h(0.8, 120, 1) - 4.789915966387172) < 1e-12);
  CHECK(std::abs(f_T_h(0.8, 120, 1) - static_cast<double>(oracle::f_double_sum(0.8L, 120, 1))) < 1e-12);
}

TEST_CASE("f_T_h equals the double sum across a grid") {
  for (int ri = -9; ri <= 9; ++ri) {
    const double rho = ri / 10.0;
    for (const int T : {20, 60, 120}) {
      for (int h = 0; h <= 10; ++h) {
        const double ref = static_cast<double>(oracle::f_double_sum(static_cast<long double>(rho), T, h));
        CAPTURE(rho);
        CAPTURE(T);
        CAPTURE(h);
        CHECK(std::abs(f_T_h(rho, T, h) - ref) < 1e-12);
      }
    }
  }
}

TEST_CASE("f_T_h: short panels with 2h > T use the series") {
  for (const double rho : {0.0, 0.5, -0.7, 0.9}) {
    for (int h = 4; h < 8; ++h) {
      const double ref = static_cast<double>(oracle::f_double_sum(static_cast<long double>(rho), 8, h));
      CHECK(std::abs(f_T_h(rho, 8, h) - ref) < 1e-12);
    }
  }
}

TEST_CASE("f_T_h: invalid arguments") {
  CHECK_THROWS_AS(f_T_h(1.0, 10, 1), InvalidParameter);
  CHECK_THROWS_AS(f_T_h(-1.2, 10, 1), InvalidParameter);
  CHECK_THROWS_AS(f_T_h(0.5, 10, 10), InvalidParameter);
}

TEST_CASE("bias_limit: zero cases, limit and monotone growth") {
  CHECK(bias_limit(-0.6, 0.8, 0, 0.4, 1.0, 2.0) == 0.0);
  for (int h = 0; h <= 20; ++h) CHECK(bias_limit(0.0, 0.8, h, 0.4, 1.0, 2.0) == 0.0);

  const double c = 50.0 / 120.0;
  const double ratio = 1.0 / 2.7778;
  const double limit = 0.6 * ratio * std::sqrt(c) / 0.04;
  double previous = 0.0;
  for (int h = 1; h <= 50; ++h) {
    const double b = bias_limit(-0.6, 0.8, h, c, 1.0, 2.7778);
    CHECK(b > 0.0);
    CHECK(std::abs(b) > std::abs(previous));
    CHECK(std::abs(b) < limit);
    previous = b;
  }
  CHECK(previous == doctest::Approx(limit).epsilon(1e-4));
  CHECK_THROWS_AS(bias_limit(-0.6, 1.0, 3, c, 1.0, 1.0), InvalidParameter);
  CHECK_THROWS_AS(bias_limit(-0.6, 0.5, 3, -1.0, 1.0, 1.0), InvalidParameter);
}

TEST_CASE("db_fit: correction term and degenerate cases") {
  std::mt19937_64 rng(2024);
  const auto data = oracle::random_panel(rng, 6, 20, 1);
  LPSpec spec;
  spec.response = "y";
  spec.shock = "x1";
  spec.horizon_max = 3;
  for (const int h : {0, 3}) {
    const auto dm = demean(build_sample(data, spec, h), DemeanMode::OneWay);
    const auto fe = fe_fit(dm);
    BiasInputs aux;
    aux.beta0 = -0.6;
    aux.rho = 0.7;
    aux.sigma2_ux = 0.9;
    aux.s2_x = shock_mean_square(dm);
    aux.rows_per_unit = fe.rows_per_unit();
    aux.horizon = h;
    const auto db = db_fit(dm, aux);
    CHECK(db.estimator == Estimator::DB);
    const double expected =
        fe.coefficients(0) + aux.beta0 / (aux.rows_per_unit * aux.s2_x) * aux.sigma2_ux * f_T_h(0.7, 20, h);
    CHECK(db.coefficients(0) == doctest::Approx(expected).epsilon(1e-14));
    if (h == 0) CHECK(db.coefficients(0) == fe.coefficients(0));
    CHECK(max_abs_diff(db.residuals, dm.response - dm.regressors * db.coefficients) == 0.0);

    aux.beta0 = 0.0;
    CHECK(db_fit(dm, aux).coefficients(0) == fe.coefficients(0));

    aux.rho = 1.0;
    CHECK_THROWS_AS(db_fit(dm, aux), InvalidParameter);
    aux.rho = 0.5;
    aux.sigma2_ux = 0.0;
    CHECK_THROWS_AS(db_fit(dm, aux), InvalidParameter);
  }
}

TEST_CASE("db_fit: multiple regressors are rejected") {
  std::mt19937_64 rng(8);
  const auto data = oracle::random_panel(rng, 4, 15, 2);
  LPSpec spec;
  spec.response = "y";
  spec.shock = "x1";
  spec.extra_controls.push_back({"x2", {0}});
  const auto dm = demean(build_sample(data, spec, 0), DemeanMode::OneWay);
  BiasInputs aux{-0.5, 0.5, 1.0, 1.0, 15.0, 0};
  CHECK_THROWS_AS(db_fit(dm, aux), InvalidParameter);
}
