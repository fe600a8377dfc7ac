#include <doctest.h>

#include <cmath>

#include "cbipw/simulate.hpp"
#include "helpers.hpp"

using namespace cbipw;

namespace {

double correlation(const Matrix& x, std::size_t a, std::size_t b) {
  const double n = static_cast<double>(x.rows());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    ma += x(i, a);
    mb += x(i, b);
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    sab += (x(i, a) - ma) * (x(i, b) - mb);
    saa += (x(i, a) - ma) * (x(i, a) - ma);
    sbb += (x(i, b) - mb) * (x(i, b) - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("scenario coefficient tables are frozen") {
  // independent copies of the generating constants
  const Vector base{0.4, 0.8, -0.25, 0.6, -0.4, -0.8, -0.5, 0.7};
  const Vector xi{-2.0, 0.2,  1.0,   1.0,  0.3,    -0.36, -0.73, -0.2,
                  0.71, -0.19, 0.26, -0.36, 0.15, -0.252, -0.1,  0.355};

  const Vector& b11 = scenario_constants::beta11();
  REQUIRE(b11.size() == 8);
  for (std::size_t j = 0; j < 8; ++j) CHECK(b11[j] == base[j]);

  const Vector& b12 = scenario_constants::treatment_coefficients(Scenario::b);
  REQUIRE(b12.size() == 8);
  for (std::size_t j = 0; j < 8; ++j) CHECK(b12[j] == 2.5 * base[j]);

  const Vector& b21 = scenario_constants::treatment_coefficients(Scenario::c);
  REQUIRE(b21.size() == 13);
  for (std::size_t j = 0; j < 8; ++j) CHECK(b21[j] == 0.6 * base[j]);
  CHECK(b21[8] == 1.0);
  CHECK(b21[9] == 0.96);
  CHECK(b21[10] == -0.3);
  CHECK(b21[11] == -0.48);
  CHECK(b21[12] == -0.96);

  const Vector& b22 = scenario_constants::treatment_coefficients(Scenario::d);
  REQUIRE(b22.size() == 13);
  for (std::size_t j = 0; j < 8; ++j) CHECK(b22[j] == 0.4 * base[j]);
  CHECK(b22[8] == 1.0);
  CHECK(b22[9] == 1.6);
  CHECK(b22[10] == -0.5);
  CHECK(b22[11] == -0.8);
  CHECK(b22[12] == -1.6);

  const Vector& b31 = scenario_constants::treatment_coefficients(Scenario::e);
  REQUIRE(b31.size() == 14);
  for (std::size_t j = 0; j < 8; ++j) CHECK(b31[j] == base[j]);
  CHECK(b31[8] == 0.4);
  CHECK(b31[9] == -0.4);
  CHECK(b31[10] == 0.5);
  CHECK(b31[11] == 0.5);
  CHECK(b31[12] == -0.25);
  CHECK(b31[13] == -0.5);

  const Vector& b32 = scenario_constants::treatment_coefficients(Scenario::f);
  REQUIRE(b32.size() == 14);
  for (std::size_t j = 0; j < 8; ++j) CHECK(b32[j] == 0.5 * base[j]);
  CHECK(b32[8] == 0.8);
  CHECK(b32[9] == -0.8);
  CHECK(b32[10] == 1.0);
  CHECK(b32[11] == 1.0);
  CHECK(b32[12] == -0.5);
  CHECK(b32[13] == -1.0);

  const Vector& xi_lib = scenario_constants::outcome_xi();
  REQUIRE(xi_lib.size() == 16);
  for (std::size_t j = 0; j < 16; ++j) CHECK(xi_lib[j] == xi[j]);
}

TEST_CASE("covariate generator marginals and correlations") {
  Rng rng(501);
  const Matrix x = gen_covariates(1000000, rng);

  double mean1 = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) mean1 += x(i, 0);
  mean1 /= static_cast<double>(x.rows());
  CHECK(std::abs(mean1 - 0.5) < 0.002);

  // analytic correlations implied by the generative recipe:
  //   X2 = x6 + N(0, 0.1^2): corr = 0.25 / (0.5 sqrt(0.26))
  //   X5 ~ Ber(expit(0.4(2 x1 - 1))): corr = (0.5 expit(0.4) - 0.25) / 0.25
  const double corr_strong = 0.25 / (0.5 * std::sqrt(0.26));   // ~0.981
  const double corr_weak = (0.5 * expit(0.4) - 0.25) / 0.25;   // ~0.197
  CHECK(std::abs(correlation(x, 1, 5) - corr_strong) < 0.01);  // X2 with X6
  CHECK(std::abs(correlation(x, 3, 8) - corr_strong) < 0.01);  // X4 with X9
  CHECK(std::abs(correlation(x, 0, 4) - corr_weak) < 0.01);    // X1 with X5
  CHECK(std::abs(correlation(x, 2, 7) - corr_weak) < 0.01);    // X3 with X8
  CHECK(std::abs(correlation(x, 6, 9)) < 0.01);                // X7 with X10: none
}

TEST_CASE("generators are deterministic given the seed") {
  Rng r1(502), r2(502);
  const Matrix x1 = gen_covariates(500, r1);
  const Matrix x2 = gen_covariates(500, r2);
  CHECK(x1 == x2);
  Rng t1(503), t2(503);
  CHECK(gen_treatment(x1, Scenario::e, t1) == gen_treatment(x2, Scenario::e, t2));
}

TEST_CASE("treated fraction is interior for every scenario") {
  for (Scenario s : {Scenario::a, Scenario::b, Scenario::c, Scenario::d, Scenario::e,
                     Scenario::f}) {
    Rng rng(504);
    const Matrix x = gen_covariates(100000, rng);
    const std::vector<int> a = gen_treatment(x, s, rng);
    double frac = 0.0;
    for (int ai : a) frac += ai;
    frac /= static_cast<double>(a.size());
    CHECK(frac > 0.05);
    CHECK(frac < 0.95);
  }
}

TEST_CASE("zero treatment coefficients give a balanced flip") {
  Rng rng(505);
  const Matrix x = gen_covariates(200000, rng);
  double frac = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    frac += rng.bernoulli(expit(0.0 * h_treatment(Scenario::a, x.row(i)))) ? 1.0 : 0.0;
  frac /= static_cast<double>(x.rows());
  CHECK(std::abs(frac - 0.5) < 0.005);
}

TEST_CASE("outcome model") {
  SUBCASE("intercept-only row") {
    const Vector zero(10, 0.0);
    CHECK(h_outcome(zero, 0) == -2.0);
    CHECK(expit(h_outcome(zero, 0)) == doctest::Approx(0.11920292202211755).epsilon(1e-14));
  }

  SUBCASE("outcome rate is plausible") {
    Rng rng(506);
    const Matrix x = gen_covariates(1000000, rng);
    const std::vector<int> a = gen_treatment(x, Scenario::a, rng);
    const Vector y = gen_outcome(x, a, rng);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    CHECK(mean > 0.05);
    CHECK(mean < 0.5);
  }

  SUBCASE("removing the treatment interactions changes the effect") {
    Vector xi = scenario_constants::outcome_xi();
    xi[2] = 0.0;
    xi[3] = 0.0;
    Rng r1(507), r2(507);
    const AteOracle base = true_ate_oracle(200000, r1);
    const AteOracle modified = true_ate_oracle(200000, r2, xi);
    CHECK(std::abs(base.tau0 - modified.tau0) > 0.05);
  }
}

TEST_CASE("ATE oracle") {
  SUBCASE("value and reproducibility") {
    Rng r1(508), r2(508);
    const AteOracle o1 = true_ate_oracle(2000000, r1);
    const AteOracle o2 = true_ate_oracle(2000000, r2);
    CHECK(o1.tau0 == o2.tau0);
    CHECK(std::abs(o1.tau0 - 0.152) < 0.003);
  }

  SUBCASE("monte carlo error scales as 1/sqrt(m)") {
    Rng r1(509), r2(510);
    const AteOracle small = true_ate_oracle(100000, r1);
    const AteOracle large = true_ate_oracle(200000, r2);
    CHECK(large.mc_se / small.mc_se == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.03));
  }
}

TEST_CASE("replication harness") {
  StudyConfig config;
  config.scenario = Scenario::a;
  config.n = 120;
  config.replications = 6;
  config.master_seed = 99;
  config.threads = 1;

  SUBCASE("single replication of one method") {
    StudyConfig c = config;
    c.replications = 1;
    c.methods = {make_method(MethodKind::logit)};
    const StudyResult result = run_study(c);
    REQUIRE(result.rows.size() == 1);
    CHECK(result.rows[0].replications == 1);
    CHECK((result.rows[0].cp == 0.0 || result.rows[0].cp == 1.0));
    CHECK(result.rows[0].method == "logit");
    CHECK(result.rows[0].scenario == "a");
    CHECK(result.rows[0].n == 120);
    CHECK_FALSE(result.rows[0].br.has_value());
  }

  SUBCASE("identical seeds give identical tables; thread count does not matter") {
    StudyConfig c = config;
    c.methods = {make_method(MethodKind::logit), make_method(MethodKind::cbps),
                 make_method(MethodKind::rcal_fixed, 0.05)};
    const StudyResult r1 = run_study(c);
    c.threads = 4;
    const StudyResult r2 = run_study(c);
    REQUIRE(r1.rows.size() == r2.rows.size());
    for (std::size_t m = 0; m < r1.rows.size(); ++m) {
      CHECK(r1.rows[m].bias == r2.rows[m].bias);
      CHECK(r1.rows[m].rmse == r2.rows[m].rmse);
      CHECK(r1.rows[m].cp == r2.rows[m].cp);
      CHECK(r1.rows[m].avl == r2.rows[m].avl);
    }
    for (std::size_t m = 0; m < r1.raw.size(); ++m)
      for (std::size_t r = 0; r < r1.raw[m].size(); ++r)
        CHECK(r1.raw[m][r].tau_hat == r2.raw[m][r].tau_hat);
  }

  SUBCASE("method results do not depend on the rest of the method list") {
    StudyConfig c = config;
    c.replications = 3;
    c.methods = {make_method(MethodKind::logit)};
    const StudyResult alone = run_study(c);
    c.methods = {make_method(MethodKind::cbps), make_method(MethodKind::logit)};
    const StudyResult with_other = run_study(c);
    for (std::size_t r = 0; r < 3; ++r)
      CHECK(alone.raw[0][r].tau_hat == with_other.raw[1][r].tau_hat);
  }

  SUBCASE("bias/RMSE ratios reference the PCIC-selected Bayes row") {
    StudyConfig c = config;
    c.replications = 2;
    c.n = 100;
    c.mcmc.draws = 60;
    c.mcmc.burn_in = 80;
    c.omega_grid = {0.5, 1.0};
    c.methods = {make_method(MethodKind::logit), make_method(MethodKind::brcal_pcic),
                 make_method(MethodKind::brcal_fixed, 1.0)};
    const StudyResult result = run_study(c);
    REQUIRE(result.rows.size() == 3);
    CHECK(result.rows[0].br.has_value());   // logit measured against the reference
    CHECK_FALSE(result.rows[1].br.has_value());  // the reference row itself
    CHECK(result.rows[2].br.has_value());
    CHECK(*result.rows[0].br == std::abs(result.rows[0].bias) / std::abs(result.rows[1].bias));
  }

  SUBCASE("invalid configurations are rejected") {
    StudyConfig c = config;
    c.methods.clear();
    CHECK_THROWS_AS(run_study(c), std::invalid_argument);
    c.methods = {make_method(MethodKind::logit)};
    c.replications = 0;
    CHECK_THROWS_AS(run_study(c), std::invalid_argument);
    c.replications = 1;
    c.n = 10;
    CHECK_THROWS_AS(run_study(c), std::invalid_argument);
  }
}

}  // TEST_SUITE
