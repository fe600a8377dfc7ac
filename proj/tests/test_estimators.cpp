#include <doctest.h>

#include <cmath>

#include "cbipw/estimators.hpp"
#include "cbipw/metrics.hpp"
#include "cbipw/optimize.hpp"
#include "cbipw/simulate.hpp"
#include "helpers.hpp"

using namespace cbipw;
using testutil::random_dataset;

TEST_SUITE("estimators_metrics") {

TEST_CASE("hajek estimator") {
  SUBCASE("constant propensity reduces to arm means") {
    Dataset ds;
    ds.y = {1.0, 0.0, 1.0, 1.0};
    ds.a = {1, 1, 0, 0};
    ds.x = Matrix(4, 0);
    const Vector e(4, 0.5);
    const PointEffect pe = ipw_estimate(e, ds);
    CHECK(pe.theta1 == 0.5);
    CHECK(pe.theta0 == 1.0);
    CHECK(pe.tau == -0.5);
  }

  SUBCASE("binary outcomes stay in the unit interval") {
    Rng rng(401);
    for (int t = 0; t < 20; ++t) {
      Dataset ds = random_dataset(rng, 30, 2);
      Vector e(30);
      for (std::size_t i = 0; i < 30; ++i) {
        ds.y[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
        e[i] = rng.uniform(0.05, 0.95);
      }
      const PointEffect pe = ipw_estimate(e, ds);
      CHECK(pe.theta1 >= 0.0);
      CHECK(pe.theta1 <= 1.0);
      CHECK(pe.theta0 >= 0.0);
      CHECK(pe.theta0 <= 1.0);
      CHECK(pe.tau >= -1.0);
      CHECK(pe.tau <= 1.0);
    }
  }

  SUBCASE("arm means stay within the observed range") {
    Rng rng(402);
    for (int t = 0; t < 20; ++t) {
      Dataset ds = random_dataset(rng, 25, 2);
      Vector e(25);
      for (auto& ei : e) ei = rng.uniform(0.05, 0.95);
      const PointEffect pe = ipw_estimate(e, ds);
      double lo1 = 1e300, hi1 = -1e300, lo0 = 1e300, hi0 = -1e300;
      for (std::size_t i = 0; i < 25; ++i) {
        if (ds.a[i]) {
          lo1 = std::min(lo1, ds.y[i]);
          hi1 = std::max(hi1, ds.y[i]);
        } else {
          lo0 = std::min(lo0, ds.y[i]);
          hi0 = std::max(hi0, ds.y[i]);
        }
      }
      CHECK(pe.theta1 >= lo1 - 1e-12);
      CHECK(pe.theta1 <= hi1 + 1e-12);
      CHECK(pe.theta0 >= lo0 - 1e-12);
      CHECK(pe.theta0 <= hi0 + 1e-12);
    }
  }

  SUBCASE("theta1 is invariant to rescaling the treated weights") {
    Rng rng(403);
    Dataset ds = random_dataset(rng, 40, 2);
    Vector e(40), e_scaled(40);
    for (std::size_t i = 0; i < 40; ++i) {
      e[i] = rng.uniform(0.1, 0.45);
      e_scaled[i] = 2.0 * e[i];  // halves every treated weight 1/e
    }
    const PointEffect a = ipw_estimate(e, ds);
    const PointEffect b = ipw_estimate(e_scaled, ds);
    CHECK(a.theta1 == doctest::Approx(b.theta1).epsilon(1e-12));
  }

  SUBCASE("true-propensity weighting on a large synthetic draw recovers the ATE") {
    Rng rng(404);
    const std::size_t n = 1000000;
    Dataset ds;
    ds.x = gen_covariates(n, rng);
    ds.a = gen_treatment(ds.x, Scenario::a, rng);
    ds.y = gen_outcome(ds.x, ds.a, rng);
    Vector e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = expit(h_treatment(Scenario::a, ds.x.row(i)));
    const PointEffect pe = ipw_estimate(e, ds);
    CHECK(std::abs(pe.tau - 0.152) < 0.003);
  }

  SUBCASE("input validation") {
    Dataset ds;
    ds.y = {1.0, 2.0};
    ds.a = {1, 0};
    ds.x = Matrix(2, 0);
    CHECK_THROWS_AS(ipw_estimate(Vector{0.5, 1.0}, ds), std::invalid_argument);
    Dataset all_treated = ds;
    all_treated.a = {1, 1};
    CHECK_THROWS_AS(ipw_estimate(Vector{0.5, 0.5}, all_treated), std::invalid_argument);
  }
}

TEST_CASE("credible interval") {
  SUBCASE("degenerate draws collapse the interval") {
    const Vector draws(10, 3.25);
    const auto [lo, hi] = credible_interval(draws, 0.95);
    CHECK(lo == 3.25);
    CHECK(hi == 3.25);
  }

  SUBCASE("symmetric draws give a symmetric interval") {
    Vector draws;
    for (int i = 0; i < 2000; ++i) {
      const double v = (i + 0.5) / 2000.0 * 4.0 - 2.0;
      draws.push_back(v);
      draws.push_back(-v);
    }
    const auto [lo, hi] = credible_interval(draws, 0.9);
    CHECK(lo == doctest::Approx(-hi).epsilon(1e-10));
  }

  SUBCASE("standard normal draws match the known quantiles") {
    Rng rng(405);
    Vector draws(100000);
    for (auto& d : draws) d = rng.normal();
    const auto [lo, hi] = credible_interval(draws, 0.95);
    CHECK(std::abs(lo + 1.959963985) < 0.02);
    CHECK(std::abs(hi - 1.959963985) < 0.02);
  }
}

TEST_CASE("sandwich interval") {
  SUBCASE("constant 1/2 propensity equals the two-sample normal interval") {
    Rng rng(406);
    Dataset ds = random_dataset(rng, 50, 1);
    const Vector e(50, 0.5);
    const PointEffect pe = ipw_estimate(e, ds);
    const Interval ci = sandwich_ci(e, ds, 0.95, pe);

    double n1 = 0.0, n0 = 0.0, v1 = 0.0, v0 = 0.0;
    for (std::size_t i = 0; i < 50; ++i)
      if (ds.a[i]) {
        ++n1;
        v1 += (ds.y[i] - pe.theta1) * (ds.y[i] - pe.theta1);
      } else {
        ++n0;
        v0 += (ds.y[i] - pe.theta0) * (ds.y[i] - pe.theta0);
      }
    const double se = std::sqrt(v1 / (n1 * n1) + v0 / (n0 * n0));
    CHECK(ci.hi - ci.lo == doctest::Approx(2.0 * 1.959963984540054 * se).epsilon(1e-9));
  }

  SUBCASE("duplicating the sample shrinks the interval by sqrt(2)") {
    Rng rng(407);
    Dataset ds = random_dataset(rng, 30, 1);
    Vector e(30);
    for (auto& ei : e) ei = rng.uniform(0.2, 0.8);
    const Interval base = sandwich_ci(e, ds, 0.95, ipw_estimate(e, ds));

    Dataset doubled;
    doubled.y = ds.y;
    doubled.a = ds.a;
    doubled.y.insert(doubled.y.end(), ds.y.begin(), ds.y.end());
    doubled.a.insert(doubled.a.end(), ds.a.begin(), ds.a.end());
    doubled.x = Matrix(60, 0);
    Vector e2 = e;
    e2.insert(e2.end(), e.begin(), e.end());
    const Interval twice = sandwich_ci(e2, doubled, 0.95, ipw_estimate(e2, doubled));
    CHECK((twice.hi - twice.lo) / (base.hi - base.lo) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  }

  SUBCASE("zero variance is an error") {
    Dataset ds;
    ds.y = {1.0, 1.0, 0.0, 0.0};
    ds.a = {1, 1, 0, 0};
    ds.x = Matrix(4, 0);
    const Vector e(4, 0.5);
    CHECK_THROWS_AS(sandwich_ci(e, ds, 0.95, ipw_estimate(e, ds)), std::domain_error);
  }

  SUBCASE("coverage on a synthetic scenario is near nominal") {
    int covered = 0;
    const int reps = 300;
    for (int rep = 0; rep < reps; ++rep) {
      Rng rng(substream_seed(408, rep));
      Dataset ds;
      ds.x = gen_covariates(1000, rng);
      ds.a = gen_treatment(ds.x, Scenario::a, rng);
      ds.y = gen_outcome(ds.x, ds.a, rng);
      const BalanceBasis basis = build_balance_basis(ds.x, raw_terms(4), true);
      const PropensityFit fit = fit_logistic_mle(ds, basis_matrix(basis, ds.x));
      const PointEffect pe = ipw_estimate(fit.e, ds);
      const Interval ci = sandwich_ci(fit.e, ds, 0.95, pe);
      if (ci.lo <= 0.152 && 0.152 <= ci.hi) ++covered;
    }
    const double cp = static_cast<double>(covered) / reps;
    CHECK(cp >= 0.90);
    CHECK(cp <= 0.98);
  }
}

TEST_CASE("standardized mean differences") {
  SUBCASE("identical arm distributions give zero") {
    Dataset ds;
    ds.y.assign(6, 0.0);
    ds.a = {1, 1, 1, 0, 0, 0};
    ds.x = Matrix(6, 1);
    const double vals[6] = {1.0, 2.0, 3.0, 1.0, 2.0, 3.0};
    for (std::size_t i = 0; i < 6; ++i) ds.x(i, 0) = vals[i];
    const Vector s = smd(ds, {0});
    CHECK(std::abs(s[0]) < 1e-12);
  }

  SUBCASE("hand-computed four-row dataset") {
    Dataset ds;
    ds.y.assign(4, 0.0);
    ds.a = {1, 1, 0, 0};
    ds.x = Matrix(4, 1);
    ds.x(0, 0) = 1.0;
    ds.x(1, 0) = 3.0;
    ds.x(2, 0) = 2.0;
    ds.x(3, 0) = 6.0;
    // means 2 and 4; population variances 1 and 4; pooled sd sqrt(2.5)
    const Vector s = smd(ds, {0});
    CHECK(s[0] == doctest::Approx(-2.0 / std::sqrt(2.5)).epsilon(1e-14));
  }

  SUBCASE("exact-balance weights zero the basis-column SMDs") {
    Rng rng(409);
    Dataset ds;
    ds.x = gen_covariates(250, rng);
    ds.a = gen_treatment(ds.x, Scenario::b, rng);
    ds.y = gen_outcome(ds.x, ds.a, rng);
    const BalanceBasis basis = build_balance_basis(ds.x, raw_terms(4), true);
    const Matrix g = basis_matrix(basis, ds.x);
    SolverOptions opts;
    opts.tol_grad = 1e-10;
    const PropensityFit fit = fit_cbps_exact(ds, g, opts);
    Matrix cols(250, 4);
    for (std::size_t i = 0; i < 250; ++i)
      for (std::size_t j = 0; j < 4; ++j) cols(i, j) = g(i, j + 1);
    const Vector s = smd_columns(cols, ds.a, ipw_weights(fit.e, ds.a));
    for (double v : s) CHECK(std::abs(v) < 1e-8);
  }

  SUBCASE("zero pooled SD is an error") {
    Dataset ds;
    ds.y.assign(4, 0.0);
    ds.a = {1, 1, 0, 0};
    ds.x = Matrix(4, 1);
    for (std::size_t i = 0; i < 4; ++i) ds.x(i, 0) = 7.0;
    CHECK_THROWS_AS(smd(ds, {0}), std::domain_error);
    CHECK_THROWS_AS(smd(ds, {3}), std::invalid_argument);
  }
}

TEST_CASE("replication metrics") {
  SUBCASE("exact estimates give zero bias and RMSE") {
    const Vector taus(5, 0.152);
    const std::vector<Interval> ivs(5, Interval{0.1, 0.2, 0.95, IntervalKind::frequentist});
    const MetricsRow row = metrics(taus, ivs, 0.152);
    CHECK(row.bias == 0.0);
    CHECK(row.rmse == 0.0);
    CHECK(row.cp == 1.0);
  }

  SUBCASE("symmetric errors cancel in the bias but not the RMSE") {
    const double d = 0.03;
    const Vector taus{0.152 - d, 0.152 + d, 0.152 - d, 0.152 + d};
    const std::vector<Interval> ivs(4, Interval{0.0, 1.0, 0.95, IntervalKind::frequentist});
    const MetricsRow row = metrics(taus, ivs, 0.152);
    CHECK(row.bias == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(row.rmse == doctest::Approx(d).epsilon(1e-12));
  }

  SUBCASE("three hand replications") {
    const Vector taus{0.4, 0.5, 0.9};
    const std::vector<Interval> ivs{{0.3, 0.6, 0.95, IntervalKind::credible},
                                    {0.45, 0.52, 0.95, IntervalKind::credible},
                                    {0.6, 1.0, 0.95, IntervalKind::credible}};
    const MetricsRow row = metrics(taus, ivs, 0.5, MetricsReference{0.05, 0.2});
    CHECK(row.bias == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(row.rmse == doctest::Approx(std::sqrt(0.17 / 3.0)).epsilon(1e-12));
    CHECK(row.cp == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(row.avl == doctest::Approx(0.77 / 3.0).epsilon(1e-12));
    CHECK(*row.br == doctest::Approx(0.1 / 0.05).epsilon(1e-12));
    CHECK(*row.rr == doctest::Approx(std::sqrt(0.17 / 3.0) / 0.2).epsilon(1e-12));
  }

  SUBCASE("rmse^2 = bias^2 + variance") {
    Rng rng(410);
    Vector taus(40);
    for (auto& t : taus) t = 0.1 + 0.05 * rng.normal();
    const std::vector<Interval> ivs(40, Interval{0.0, 0.3, 0.95, IntervalKind::frequentist});
    const MetricsRow row = metrics(taus, ivs, 0.152);
    double mean = 0.0;
    for (double t : taus) mean += t;
    mean /= 40.0;
    double var = 0.0;
    for (double t : taus) var += (t - mean) * (t - mean);
    var /= 40.0;
    CHECK(row.rmse * row.rmse ==
          doctest::Approx(row.bias * row.bias + var).epsilon(1e-12));
    CHECK(row.rmse >= std::abs(row.bias));
  }
}

}  // TEST_SUITE
