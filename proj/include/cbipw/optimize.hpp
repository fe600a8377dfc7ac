#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbipw/basis.hpp"
#include "cbipw/dataset.hpp"
#include "cbipw/linalg.hpp"
#include "cbipw/losses.hpp"
#include "cbipw/propensity.hpp"

namespace cbipw {

// Point estimators of the propensity coefficients:
//
//   fit_rcal          argmin (1/n) l_A(alpha) + lambda ||alpha_{-intercept}||_1
//                     (proximal gradient with backtracking)
//   fit_cbps_exact    solve balance(alpha) = 0 exactly (damped Newton;
//                     equivalently the unpenalized minimum of l_A)
//   fit_logistic_mle  Bernoulli maximum likelihood of A on g(X) (Newton)
//
// All three start from alpha = 0 and are deterministic. At any accepted
// fit_rcal solution the normalized balance obeys max_j |b_j| <= lambda + tol,
// which is the dual form of the covariate-balance bound.

struct SolverOptions {
  int max_iter = 10000;
  double tol_grad = 1e-8;       // max-norm of the optimality residual
  double step_init = 1.0;       // initial proximal-gradient step
  double backtrack = 0.5;       // step shrink factor
  double step_grow = 1.25;      // step growth after an accepted iterate
  double divergence_bound = 100.0;  // ||alpha||_inf beyond this means separation
  std::uint64_t seed = 0;       // unused by the fitters; uniform interface
};

struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, Vector iterate, double viol)
      : std::runtime_error(what), last_iterate(std::move(iterate)), violation(viol) {}
  Vector last_iterate;
  double violation;
};

struct KktReport {
  Vector residuals;         // per-coordinate optimality residual
  std::vector<std::size_t> active;  // indices with alpha_j != 0 (penalized only)
  double max_violation = 0.0;
  double tol = 0.0;
  bool satisfied = false;
};

namespace detail {

struct CalibEval {
  double loss = 0.0;  // unnormalized l_A
  Vector grad;        // unnormalized gradient (= -raw balance)
};

// One pass over the data for loss and gradient together.
inline CalibEval calib_eval(std::span<const double> alpha, const Dataset& ds, const Matrix& g,
                            std::span<const double> weights = {}) {
  check_dims(ds, g, alpha);
  const std::size_t cols = g.cols();
  CalibEval ev;
  ev.grad.assign(cols, 0.0);
  double comp = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double eta = clamp_eta(dot(alpha, g.row(i)));
    double term, c;
    if (ds.a[i] != 0) {
      const double ee = std::exp(-eta);
      term = ee - eta;
      c = -(1.0 + ee);
    } else {
      const double ee = std::exp(eta);
      term = eta + ee;
      c = 1.0 + ee;
    }
    const double w = weights.empty() ? 1.0 : weights[i];
    term *= w;
    c *= w;
    const double t = ev.loss + term;
    if (std::abs(ev.loss) >= std::abs(term))
      comp += (ev.loss - t) + term;
    else
      comp += (term - t) + ev.loss;
    ev.loss = t;
    const auto row = g.row(i);
    for (std::size_t j = 0; j < cols; ++j) ev.grad[j] += c * row[j];
  }
  ev.loss += comp;
  return ev;
}

// Hessian of l_A (or the Bernoulli negative log likelihood when mle_weights
// is set): sum_i w_i g_i g_i'.
inline Matrix weighted_gram(const Matrix& g, std::span<const double> w) {
  const std::size_t cols = g.cols();
  Matrix h(cols, cols);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const auto row = g.row(i);
    for (std::size_t a = 0; a < cols; ++a) {
      const double wa = w[i] * row[a];
      for (std::size_t b = a; b < cols; ++b) h(a, b) += wa * row[b];
    }
  }
  for (std::size_t a = 0; a < cols; ++a)
    for (std::size_t b = 0; b < a; ++b) h(a, b) = h(b, a);
  return h;
}

// Optimality residual of (1/n) l_A + lambda ||.||_1 from the normalized
// balance b (recall grad of (1/n) l_A is -b).
inline Vector kkt_residuals(std::span<const double> alpha, std::span<const double> b,
                            double lambda) {
  Vector r(alpha.size());
  r[0] = std::abs(b[0]);
  for (std::size_t j = 1; j < alpha.size(); ++j) {
    if (alpha[j] > 0.0)
      r[j] = std::abs(b[j] - lambda);
    else if (alpha[j] < 0.0)
      r[j] = std::abs(b[j] + lambda);
    else
      r[j] = std::max(0.0, std::abs(b[j]) - lambda);
  }
  return r;
}

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace detail

inline KktReport check_kkt(const PropensityFit& fit, const Dataset& ds, const Matrix& g,
                           double lambda, double tol) {
  const BalanceReport bal = balance_vector(fit.alpha, ds, g);
  KktReport rep;
  rep.residuals = detail::kkt_residuals(fit.alpha, bal.normalized, lambda);
  for (std::size_t j = 1; j < fit.alpha.size(); ++j)
    if (fit.alpha[j] != 0.0) rep.active.push_back(j);
  rep.max_violation = max_abs(rep.residuals);
  rep.tol = tol;
  rep.satisfied = rep.max_violation <= tol;
  return rep;
}

inline KktReport check_kkt(const PropensityFit& fit, const Dataset& ds, const BalanceBasis& basis,
                           double lambda, double tol) {
  return check_kkt(fit, ds, basis_matrix(basis, ds.x), lambda, tol);
}

// Proximal-gradient solve of the penalized calibration objective. The
// optional per-observation weights back the loss-likelihood bootstrap.
inline PropensityFit fit_rcal(const Dataset& ds, const Matrix& g, double lambda,
                              const SolverOptions& opts = {},
                              std::span<const double> weights = {}) {
  if (lambda < 0.0) throw std::invalid_argument("fit_rcal: negative lambda");
  validate_dataset(ds);
  const std::size_t cols = g.cols();
  const double n = static_cast<double>(ds.n());

  Vector alpha(cols, 0.0);
  detail::CalibEval ev = detail::calib_eval(alpha, ds, g, weights);
  double f = ev.loss / n;
  double step = opts.step_init;
  double violation = 0.0;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Vector grad(cols);
    for (std::size_t j = 0; j < cols; ++j) grad[j] = ev.grad[j] / n;

    Vector b(cols);
    for (std::size_t j = 0; j < cols; ++j) b[j] = -grad[j];
    violation = max_abs(detail::kkt_residuals(alpha, b, lambda));
    if (violation <= opts.tol_grad) {
      PropensityFit fit{std::move(alpha), lambda, FitMethod::rcal, {}};
      fit.e = fitted_propensities(fit.alpha, g);
      return fit;
    }

    for (;;) {
      Vector z(cols);
      z[0] = alpha[0] - step * grad[0];
      for (std::size_t j = 1; j < cols; ++j)
        z[j] = detail::soft_threshold(alpha[j] - step * grad[j], step * lambda);
      detail::CalibEval ev_z = detail::calib_eval(z, ds, g, weights);
      const double f_z = ev_z.loss / n;
      double lin = 0.0, sq = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        const double d = z[j] - alpha[j];
        lin += grad[j] * d;
        sq += d * d;
      }
      if (f_z <= f + lin + sq / (2.0 * step) + 1e-15 * std::abs(f)) {
        alpha = std::move(z);
        ev = std::move(ev_z);
        f = f_z;
        step = std::min(step * opts.step_grow, 1e6);
        break;
      }
      step *= opts.backtrack;
      if (step < 1e-18)
        throw ConvergenceError("fit_rcal: backtracking step underflow", alpha, violation);
    }
  }
  throw ConvergenceError("fit_rcal: no convergence after " + std::to_string(opts.max_iter) +
                             " iterations (violation " + std::to_string(violation) + ")",
                         alpha, violation);
}

inline PropensityFit fit_rcal(const Dataset& ds, const BalanceBasis& basis, double lambda,
                              const SolverOptions& opts = {}) {
  return fit_rcal(ds, basis_matrix(basis, ds.x), lambda, opts);
}

// Damped Newton on balance(alpha) = 0. The Jacobian is the negated Hessian
// of l_A, which is positive definite away from separation, so each Newton
// direction descends the unpenalized calibration loss.
inline PropensityFit fit_cbps_exact(const Dataset& ds, const Matrix& g,
                                    const SolverOptions& opts = {}) {
  validate_dataset(ds);
  const std::size_t cols = g.cols();
  const double n = static_cast<double>(ds.n());
  Vector alpha(cols, 0.0);
  detail::CalibEval ev = detail::calib_eval(alpha, ds, g);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Vector b(cols);
    for (std::size_t j = 0; j < cols; ++j) b[j] = -ev.grad[j] / n;
    const double violation = max_abs(b);
    if (violation <= opts.tol_grad) {
      PropensityFit fit{std::move(alpha), 0.0, FitMethod::cbps, {}};
      fit.e = fitted_propensities(fit.alpha, g);
      return fit;
    }
    if (max_abs(alpha) > opts.divergence_bound)
      throw ConvergenceError("fit_cbps_exact: diverging coefficients (possible separation)",
                             alpha, violation);

    Vector w(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const double eta = clamp_eta(dot(alpha, g.row(i)));
      w[i] = (ds.a[i] != 0 ? std::exp(-eta) : std::exp(eta)) / n;
    }
    Matrix h = detail::weighted_gram(g, w);
    if (!cholesky_factor(h))
      throw ConvergenceError("fit_cbps_exact: singular Jacobian", alpha, violation);
    const Vector dir = cholesky_solve_factored(h, b);

    const double slope = dot(b, dir);  // descent rate of (1/n) l_A along dir
    double s = 1.0;
    for (;;) {
      Vector cand(cols);
      for (std::size_t j = 0; j < cols; ++j) cand[j] = alpha[j] + s * dir[j];
      detail::CalibEval ev_c = detail::calib_eval(cand, ds, g);
      if (ev_c.loss / n <= ev.loss / n - 1e-4 * s * slope) {
        alpha = std::move(cand);
        ev = std::move(ev_c);
        break;
      }
      s *= opts.backtrack;
      if (s < 1e-14)
        throw ConvergenceError("fit_cbps_exact: line search failed", alpha, violation);
    }
  }
  Vector b(cols);
  for (std::size_t j = 0; j < cols; ++j) b[j] = -ev.grad[j] / n;
  throw ConvergenceError("fit_cbps_exact: no convergence after " +
                             std::to_string(opts.max_iter) + " iterations",
                         alpha, max_abs(b));
}

inline PropensityFit fit_cbps_exact(const Dataset& ds, const BalanceBasis& basis,
                                    const SolverOptions& opts = {}) {
  return fit_cbps_exact(ds, basis_matrix(basis, ds.x), opts);
}

// Newton (equivalently IRLS) for the Bernoulli log likelihood of A on g(X).
inline PropensityFit fit_logistic_mle(const Dataset& ds, const Matrix& g,
                                      const SolverOptions& opts = {}) {
  validate_dataset(ds);
  const std::size_t cols = g.cols();
  const double n = static_cast<double>(ds.n());
  Vector alpha(cols, 0.0);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Vector grad(cols, 0.0);  // (1/n) d loglik / d alpha
    Vector w(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const double e = propensity(alpha, g.row(i));
      const double resid = (ds.a[i] - e) / n;
      w[i] = e * (1.0 - e) / n;
      const auto row = g.row(i);
      for (std::size_t j = 0; j < cols; ++j) grad[j] += resid * row[j];
    }
    if (max_abs(grad) <= opts.tol_grad) {
      PropensityFit fit{std::move(alpha), 0.0, FitMethod::logit, {}};
      fit.e = fitted_propensities(fit.alpha, g);
      return fit;
    }
    if (max_abs(alpha) > opts.divergence_bound)
      throw ConvergenceError("fit_logistic_mle: diverging coefficients (perfect separation?)",
                             alpha, max_abs(grad));

    Matrix h = detail::weighted_gram(g, w);
    if (!cholesky_factor(h))
      throw ConvergenceError("fit_logistic_mle: singular information matrix", alpha,
                             max_abs(grad));
    const Vector dir = cholesky_solve_factored(h, grad);
    for (std::size_t j = 0; j < cols; ++j) alpha[j] += dir[j];
  }
  throw ConvergenceError("fit_logistic_mle: no convergence after " +
                             std::to_string(opts.max_iter) + " iterations",
                         alpha, 0.0);
}

inline PropensityFit fit_logistic_mle(const Dataset& ds, const BalanceBasis& basis,
                                      const SolverOptions& opts = {}) {
  return fit_logistic_mle(ds, basis_matrix(basis, ds.x), opts);
}

}  // namespace cbipw
