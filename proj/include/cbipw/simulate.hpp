#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbipw/basis.hpp"
#include "cbipw/dataset.hpp"
#include "cbipw/estimators.hpp"
#include "cbipw/gbayes.hpp"
#include "cbipw/metrics.hpp"
#include "cbipw/optimize.hpp"
#include "cbipw/pcic.hpp"
#include "cbipw/rng.hpp"
#include "cbipw/thread_pool.hpp"

namespace cbipw {

// Synthetic data-generating mechanisms and the replication harness.
//
// Ten covariates:
//   X1, X3, X6, X9 ~ Bernoulli(0.5)         X7, X10 ~ N(0,1)
//   X2 ~ N(x6, 0.1^2)                        X4 ~ N(x9, 0.1^2)
//   X5 ~ Bernoulli(expit{0.4(2 x1 - 1)})     X8 ~ Bernoulli(expit{0.4(2 x3 - 1)})
//
// Treatment assignment uses one of six linear predictors h_A (scenarios a-f,
// rising model complexity and worsening overlap); the leading coefficient of
// each vector below multiplies an intercept. The binary outcome follows a
// fixed 16-term logistic model shared by all scenarios, so the true ATE is
// the same (about 0.152) in every scenario.

enum class Scenario { a, b, c, d, e, f };

inline Scenario scenario_from_string(const std::string& s) {
  if (s.size() == 1) {
    switch (s[0]) {
      case 'a': return Scenario::a;
      case 'b': return Scenario::b;
      case 'c': return Scenario::c;
      case 'd': return Scenario::d;
      case 'e': return Scenario::e;
      case 'f': return Scenario::f;
    }
  }
  throw std::invalid_argument("unknown scenario '" + s + "' (expected a..f)");
}

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::a: return "a";
    case Scenario::b: return "b";
    case Scenario::c: return "c";
    case Scenario::d: return "d";
    case Scenario::e: return "e";
    case Scenario::f: return "f";
  }
  return "?";
}

namespace scenario_constants {

// Base treatment coefficients (intercept first, then X1..X7).
inline const Vector& beta11() {
  static const Vector v{0.4, 0.8, -0.25, 0.6, -0.4, -0.8, -0.5, 0.7};
  return v;
}

inline Vector scaled(const Vector& base, double c, std::span<const double> extra) {
  Vector v;
  v.reserve(base.size() + extra.size());
  for (double b : base) v.push_back(c * b);
  v.insert(v.end(), extra.begin(), extra.end());
  return v;
}

inline const Vector& treatment_coefficients(Scenario s) {
  static const Vector b12 = scaled(beta11(), 2.5, {});
  static const Vector b21 = scaled(beta11(), 0.6, std::array{1.0, 0.96, -0.3, -0.48, -0.96});
  static const Vector b22 = scaled(beta11(), 0.4, std::array{1.0, 1.6, -0.5, -0.8, -1.6});
  static const Vector b31 = scaled(beta11(), 1.0, std::array{0.4, -0.4, 0.5, 0.5, -0.25, -0.5});
  static const Vector b32 = scaled(beta11(), 0.5, std::array{0.8, -0.8, 1.0, 1.0, -0.5, -1.0});
  switch (s) {
    case Scenario::a: return beta11();
    case Scenario::b: return b12;
    case Scenario::c: return b21;
    case Scenario::d: return b22;
    case Scenario::e: return b31;
    case Scenario::f: return b32;
  }
  throw std::invalid_argument("unknown scenario");
}

// Outcome coefficients for (1, A, A*X2, A*X4, X1..X4, X8..X10, X2^2,
// X1*X3, X2*X4, X4*X8, X8*X9).
inline const Vector& outcome_xi() {
  static const Vector v{-2.0, 0.2,  1.0,   1.0,  0.3,    -0.36, -0.73, -0.2,
                        0.71, -0.19, 0.26, -0.36, 0.15, -0.252, -0.1,  0.355};
  return v;
}

}  // namespace scenario_constants

inline double h_treatment(Scenario s, std::span<const double> x) {
  const Vector& b = scenario_constants::treatment_coefficients(s);
  const double base = b[0] + b[1] * x[0] + b[2] * x[1] + b[3] * x[2] + b[4] * x[3] +
                      b[5] * x[4] + b[6] * x[5] + b[7] * x[6];
  switch (s) {
    case Scenario::a:
    case Scenario::b:
      return base;
    case Scenario::c:
    case Scenario::d:
      return base + b[8] * x[1] * x[1] + b[9] * x[0] * x[2] + b[10] * x[1] * x[3] +
             b[11] * x[3] * x[4] + b[12] * x[4] * x[5];
    case Scenario::e:
    case Scenario::f:
      return base + b[8] * x[0] * x[2] + b[9] * x[4] * x[5] +
             b[10] * std::sin(2.0 * x[1] * x[3]) + b[11] * std::cos(2.0 * x[3] * x[4]) +
             b[12] * std::exp(2.0 * x[1] * x[3]) + b[13] * x[1] * x[4] * x[5];
  }
  throw std::invalid_argument("unknown scenario");
}

inline double h_outcome(std::span<const double> x, int a, std::span<const double> xi) {
  return xi[0] + xi[1] * a + xi[2] * a * x[1] + xi[3] * a * x[3] + xi[4] * x[0] +
         xi[5] * x[1] + xi[6] * x[2] + xi[7] * x[3] + xi[8] * x[7] + xi[9] * x[8] +
         xi[10] * x[9] + xi[11] * x[1] * x[1] + xi[12] * x[0] * x[2] + xi[13] * x[1] * x[3] +
         xi[14] * x[3] * x[7] + xi[15] * x[7] * x[8];
}

inline double h_outcome(std::span<const double> x, int a) {
  return h_outcome(x, a, scenario_constants::outcome_xi());
}

// One covariate row in a fixed draw order (the Bernoulli/normal parents
// first, then the children that depend on them).
inline void gen_covariate_row(std::span<double> x, Rng& rng) {
  x[0] = rng.bernoulli(0.5) ? 1.0 : 0.0;                        // X1
  x[2] = rng.bernoulli(0.5) ? 1.0 : 0.0;                        // X3
  x[5] = rng.bernoulli(0.5) ? 1.0 : 0.0;                        // X6
  x[8] = rng.bernoulli(0.5) ? 1.0 : 0.0;                        // X9
  x[6] = rng.normal();                                          // X7
  x[9] = rng.normal();                                          // X10
  x[1] = rng.normal(x[5], 0.1);                                 // X2
  x[3] = rng.normal(x[8], 0.1);                                 // X4
  x[4] = rng.bernoulli(expit(0.4 * (2.0 * x[0] - 1.0))) ? 1.0 : 0.0;  // X5
  x[7] = rng.bernoulli(expit(0.4 * (2.0 * x[2] - 1.0))) ? 1.0 : 0.0;  // X8
}

inline Matrix gen_covariates(std::size_t n, Rng& rng) {
  Matrix x(n, 10);
  for (std::size_t i = 0; i < n; ++i) gen_covariate_row(x.row(i), rng);
  return x;
}

inline std::vector<int> gen_treatment(const Matrix& x, Scenario s, Rng& rng) {
  std::vector<int> a(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    a[i] = rng.bernoulli(expit(h_treatment(s, x.row(i)))) ? 1 : 0;
  return a;
}

inline Vector gen_outcome(const Matrix& x, const std::vector<int>& a, Rng& rng) {
  if (a.size() != x.rows()) throw std::invalid_argument("gen_outcome: shape mismatch");
  Vector y(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    y[i] = rng.bernoulli(expit(h_outcome(x.row(i), a[i]))) ? 1.0 : 0.0;
  return y;
}

struct AteOracle {
  double tau0 = 0.0;
  double mc_se = 0.0;
};

// Monte Carlo average of expit{h_Y(X,1)} - expit{h_Y(X,0)}; no outcome noise
// is needed because the potential-outcome probabilities are available in
// closed form given X. The value does not depend on the scenario.
inline AteOracle true_ate_oracle(std::size_t m, Rng& rng,
                                 std::span<const double> xi = {}) {
  if (m < 1) throw std::invalid_argument("true_ate_oracle: m < 1");
  const std::span<const double> coef =
      xi.empty() ? std::span<const double>(scenario_constants::outcome_xi()) : xi;
  double mean = 0.0, m2 = 0.0;
  std::array<double, 10> x{};
  for (std::size_t i = 1; i <= m; ++i) {
    gen_covariate_row(x, rng);
    const double diff = expit(h_outcome(x, 1, coef)) - expit(h_outcome(x, 0, coef));
    const double delta = diff - mean;
    mean += delta / static_cast<double>(i);
    m2 += delta * (diff - mean);
  }
  AteOracle out;
  out.tau0 = mean;
  out.mc_se = m > 1 ? std::sqrt(m2 / static_cast<double>(m) / static_cast<double>(m)) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Replication harness
// ---------------------------------------------------------------------------

enum class MethodKind { logit, cbps, rcal_fixed, rcal_cv, brcal_pcic, brcal_fixed };

struct MethodSpec {
  MethodKind kind = MethodKind::logit;
  double lambda = 0.0;  // rcal_fixed
  double omega = 1.0;   // brcal_fixed
  std::string label;

  // Stable salt for per-method RNG substreams; depends only on the method
  // itself so each method's results are invariant to the rest of the list.
  std::uint64_t salt() const {
    std::uint64_t s = 0xabcd0000u + static_cast<std::uint64_t>(kind);
    if (kind == MethodKind::rcal_fixed) {
      std::uint64_t bits;
      std::memcpy(&bits, &lambda, sizeof(bits));
      s ^= bits;
    }
    if (kind == MethodKind::brcal_fixed) {
      std::uint64_t bits;
      std::memcpy(&bits, &omega, sizeof(bits));
      s ^= bits * 3;
    }
    return s;
  }
};

inline MethodSpec make_method(MethodKind kind, double parameter = 0.0) {
  MethodSpec m;
  m.kind = kind;
  switch (kind) {
    case MethodKind::logit: m.label = "logit"; break;
    case MethodKind::cbps: m.label = "cbps"; break;
    case MethodKind::rcal_cv: m.label = "rcal-cv"; break;
    case MethodKind::brcal_pcic: m.label = "brcal-pcic"; break;
    case MethodKind::rcal_fixed: {
      m.lambda = parameter;
      char buf[48];
      std::snprintf(buf, sizeof buf, "rcal-%g", parameter);
      m.label = buf;
      break;
    }
    case MethodKind::brcal_fixed: {
      m.omega = parameter;
      char buf[48];
      std::snprintf(buf, sizeof buf, "brcal-%g", parameter);
      m.label = buf;
      break;
    }
  }
  return m;
}

enum class AdjustmentSet { confounders, predictors };

struct StudyConfig {
  Scenario scenario = Scenario::a;
  std::size_t n = 500;
  int replications = 500;
  AdjustmentSet adjustment = AdjustmentSet::confounders;
  std::vector<MethodSpec> methods;
  Priors priors;
  std::vector<double> omega_grid = default_omega_grid();
  McmcOptions mcmc = desk_scale_mcmc();
  SolverOptions solver;
  double interval_level = 0.95;
  double tau0 = 0.152;  // override with the oracle value when desired
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0 = resolve from environment / hardware
  std::vector<double> cv_lambda_grid = default_cv_lambda_grid();
  int cv_folds = 5;

  static McmcOptions desk_scale_mcmc() {
    McmcOptions m;
    m.draws = 1000;
    m.burn_in = 1000;
    return m;
  }

  // 10 log-spaced penalties in [0.005, 0.5].
  static std::vector<double> default_cv_lambda_grid() {
    std::vector<double> grid(10);
    const double lo = std::log(0.005), hi = std::log(0.5);
    for (std::size_t k = 0; k < grid.size(); ++k)
      grid[k] = std::exp(lo + (hi - lo) * static_cast<double>(k) / 9.0);
    return grid;
  }
};

struct RawEstimate {
  int replication = 0;
  bool ok = false;
  double tau_hat = 0.0;
  Interval interval;
  std::string error;
};

struct StudyResult {
  std::vector<MetricsRow> rows;                   // one per configured method
  std::vector<std::vector<RawEstimate>> raw;      // [method][replication]
  double tau0 = 0.0;
};

namespace detail {

inline constexpr std::uint64_t kSaltData = 0x01;
inline constexpr std::uint64_t kSaltCvFolds = 0x02;

// 5-fold cross-validation over the penalty grid: fit on the training folds,
// score with the unpenalized calibration loss on the held-out fold, pick the
// smallest total. Standardization parameters come from the full data; the
// held-out loss reuses them. Ties go to the smaller penalty.
inline double cv_select_lambda(const Dataset& ds, const Matrix& g,
                               const std::vector<double>& grid, int folds,
                               const SolverOptions& solver, Rng& rng) {
  const std::size_t n = ds.n();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i-- > 1;) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform01() * (i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  std::vector<int> fold_of(n);
  for (std::size_t i = 0; i < n; ++i)
    fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));

  std::vector<double> sorted(grid);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());  // warm starts, large to small

  // Accumulate validation loss per lambda across folds.
  std::vector<double> cv_loss(sorted.size(), 0.0);
  std::vector<bool> cv_ok(sorted.size(), true);
  for (int f = 0; f < folds; ++f) {
    Dataset train, val;
    Matrix g_train, g_val;
    std::size_t n_train = 0, n_val = 0;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? n_val : n_train) += 1;
    train.y.reserve(n_train);
    val.y.reserve(n_val);
    train.x = Matrix(n_train, ds.p());
    val.x = Matrix(n_val, ds.p());
    g_train = Matrix(n_train, g.cols());
    g_val = Matrix(n_val, g.cols());
    std::size_t it = 0, iv = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool in_val = fold_of[i] == f;
      Dataset& dst = in_val ? val : train;
      Matrix& gdst = in_val ? g_val : g_train;
      const std::size_t row = in_val ? iv++ : it++;
      dst.y.push_back(ds.y[i]);
      dst.a.push_back(ds.a[i]);
      for (std::size_t j = 0; j < ds.p(); ++j) dst.x(row, j) = ds.x(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) gdst(row, j) = g(i, j);
    }
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      try {
        const PropensityFit fit = fit_rcal(train, g_train, sorted[k], solver);
        cv_loss[k] += loss_calibration(fit.alpha, val, g_val).total;
      } catch (const std::exception&) {
        cv_ok[k] = false;
      }
    }
  }
  double best_lambda = sorted.front();
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (!cv_ok[k]) continue;
    // <= with descending grid implements ties-to-smaller-lambda
    if (cv_loss[k] <= best_loss) {
      best_loss = cv_loss[k];
      best_lambda = sorted[k];
    }
  }
  if (!std::isfinite(best_loss))
    throw std::runtime_error("rcal-cv: every penalty failed in cross-validation");
  return best_lambda;
}

}  // namespace detail

inline StudyResult run_study(const StudyConfig& config) {
  if (config.replications < 1) throw std::invalid_argument("run_study: replications < 1");
  if (config.n < 20) throw std::invalid_argument("run_study: n < 20");
  if (config.methods.empty()) throw std::invalid_argument("run_study: no methods configured");

  const std::size_t k_adjust = config.adjustment == AdjustmentSet::confounders ? 4 : 7;
  const std::size_t n_methods = config.methods.size();

  StudyResult result;
  result.tau0 = config.tau0;
  result.raw.assign(n_methods, std::vector<RawEstimate>(config.replications));

  parallel_for(config.replications, config.threads, [&](std::size_t rep) {
    Rng data_rng(substream_seed(config.master_seed, rep, detail::kSaltData));
    const Matrix x = gen_covariates(config.n, data_rng);
    Dataset ds;
    ds.x = x;
    ds.a = gen_treatment(x, config.scenario, data_rng);
    ds.y = gen_outcome(x, ds.a, data_rng);

    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      const MethodSpec& method = config.methods[mi];
      RawEstimate& slot = result.raw[mi][rep];
      slot.replication = static_cast<int>(rep);
      try {
        const std::vector<BasisTerm> spec = raw_terms(k_adjust);
        const BalanceBasis basis = build_balance_basis(ds.x, spec, true);
        const Matrix g = basis_matrix(basis, ds.x);

        auto frequentist = [&](const PropensityFit& fit) {
          const PointEffect point = ipw_estimate(fit.e, ds);
          slot.tau_hat = point.tau;
          slot.interval = sandwich_ci(fit.e, ds, config.interval_level, point);
        };
        auto bayesian = [&](const PosteriorDraws& draws) {
          const Vector tau = draws.tau();
          double mean = 0.0;
          for (double t : tau) mean += t;
          slot.tau_hat = mean / tau.size();
          const auto [lo, hi] = credible_interval(tau, config.interval_level);
          slot.interval = {lo, hi, config.interval_level, IntervalKind::credible};
        };

        switch (method.kind) {
          case MethodKind::logit:
            frequentist(fit_logistic_mle(ds, g, config.solver));
            break;
          case MethodKind::cbps:
            frequentist(fit_cbps_exact(ds, g, config.solver));
            break;
          case MethodKind::rcal_fixed:
            frequentist(fit_rcal(ds, g, method.lambda, config.solver));
            break;
          case MethodKind::rcal_cv: {
            Rng cv_rng(substream_seed(config.master_seed, rep, detail::kSaltCvFolds));
            const double lambda = detail::cv_select_lambda(ds, g, config.cv_lambda_grid,
                                                           config.cv_folds, config.solver,
                                                           cv_rng);
            frequentist(fit_rcal(ds, g, lambda, config.solver));
            break;
          }
          case MethodKind::brcal_pcic: {
            McmcOptions opts = config.mcmc;
            opts.seed = substream_seed(config.master_seed, rep, method.salt());
            bayesian(select_omega(ds, g, config.priors, config.omega_grid, opts).draws);
            break;
          }
          case MethodKind::brcal_fixed: {
            McmcOptions opts = config.mcmc;
            opts.seed = substream_seed(config.master_seed, rep, method.salt());
            opts.store_scores = false;
            bayesian(run_two_stage(ds, g, method.omega, config.priors, opts));
            break;
          }
        }
        slot.ok = true;
      } catch (const std::exception& ex) {
        slot.ok = false;
        slot.error = ex.what();
      }
    }
  });

  // Reference for bias/RMSE ratios: the PCIC-selected generalized-Bayes row.
  std::optional<MetricsReference> reference;
  std::optional<std::size_t> ref_index;
  for (std::size_t mi = 0; mi < n_methods; ++mi)
    if (config.methods[mi].kind == MethodKind::brcal_pcic) {
      ref_index = mi;
      break;
    }

  auto summarize = [&](std::size_t mi, std::optional<MetricsReference> ref) {
    Vector taus;
    std::vector<Interval> ivs;
    std::size_t failures = 0;
    for (const RawEstimate& est : result.raw[mi]) {
      if (!est.ok) {
        ++failures;
        continue;
      }
      taus.push_back(est.tau_hat);
      ivs.push_back(est.interval);
    }
    if (taus.empty())
      throw std::runtime_error("run_study: method " + config.methods[mi].label +
                               " failed in every replication");
    MetricsRow row = metrics(taus, ivs, config.tau0, ref);
    row.scenario = to_string(config.scenario);
    row.method = config.methods[mi].label;
    row.n = config.n;
    row.failures = failures;
    return row;
  };

  if (ref_index) {
    const MetricsRow ref_row = summarize(*ref_index, std::nullopt);
    reference = MetricsReference{ref_row.bias, ref_row.rmse};
  }
  result.rows.reserve(n_methods);
  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    const bool is_ref = ref_index && *ref_index == mi;
    result.rows.push_back(summarize(mi, is_ref ? std::nullopt : reference));
  }
  return result;
}

}  // namespace cbipw
