#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbipw/basis.hpp"
#include "cbipw/dataset.hpp"
#include "cbipw/linalg.hpp"
#include "cbipw/losses.hpp"
#include "cbipw/optimize.hpp"
#include "cbipw/propensity.hpp"

namespace cbipw {

// Extension for one potentially missing covariate under MAR. Convention:
// the missing-prone covariate is column 0 of X; the missingness indicator r
// marks observed units (r = 1). Two models are fitted:
//
//   missingness    e^R(x2) = expit(gamma' g1(x)), g1 restricted to the
//                  always-observed covariates, via the one-sided loss
//                  l_R(gamma) = sum_i [ R_i e^{-gamma' g1} + (1-R_i) gamma' g1 ]
//
//   treatment      e^A as in the complete-data case but with basis rows
//                  masked to R_i g2(X_i), so missing units contribute a
//                  constant to the loss and nothing to its gradient.
//
// theta1 is then the doubly weighted Hajek ratio over units with R = A = 1.
// With r identically 1 every routine here reduces bit-for-bit to its
// complete-data counterpart.

struct MissingFit {
  Vector gamma;
  Vector alpha;
  Vector e_r;  // fitted observation probabilities
  Vector e_a;  // fitted propensities (0.5 on masked rows; unused there)
  double lambda_r = 0.0;
  double lambda_a = 0.0;
};

namespace detail {

inline const std::vector<int>& require_indicator(const Dataset& ds) {
  if (!ds.r) throw std::invalid_argument("missing: dataset has no missingness indicator");
  return *ds.r;
}

inline void check_g1(const BalanceBasis& basis) {
  for (std::size_t j = 0; j < basis.terms.size(); ++j)
    if (basis.terms[j].col_a == 0 || basis.terms[j].col_b == 0)
      throw std::invalid_argument(
          "missing: g1 term " + std::to_string(j + 1) +
          " references the missing-prone covariate (column 1)");
}

}  // namespace detail

// Basis built from the rows with r = 1 only, so standardization parameters
// never see the placeholder values of missing cells.
inline BalanceBasis build_basis_on_observed(const Dataset& ds, std::span<const BasisTerm> spec,
                                            bool standardize = true) {
  const auto& r = detail::require_indicator(ds);
  std::size_t n_obs = 0;
  for (int ri : r) n_obs += static_cast<std::size_t>(ri);
  if (n_obs == 0) throw std::invalid_argument("missing: no observed rows");
  Matrix sub(n_obs, ds.p());
  std::size_t k = 0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (r[i] == 0) continue;
    for (std::size_t j = 0; j < ds.p(); ++j) sub(k, j) = ds.x(i, j);
    ++k;
  }
  BalanceBasis basis = build_balance_basis(sub, spec, standardize);
  basis.input_cols = ds.p();
  return basis;
}

// R_i g2(X_i): zero rows where the unit is missing, so the masked loss can
// be fed to the ordinary calibration machinery unchanged.
inline Matrix masked_basis_matrix(const BalanceBasis& basis_g2, const Dataset& ds) {
  const auto& r = detail::require_indicator(ds);
  Matrix g(ds.n(), basis_g2.columns());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (r[i] == 0) continue;
    const Vector gi = evaluate_basis(basis_g2, ds.x.row(i));
    for (std::size_t j = 0; j < gi.size(); ++j) g(i, j) = gi[j];
  }
  return g;
}

inline LossValue loss_missing(std::span<const double> gamma, const Dataset& ds,
                              const Matrix& g1) {
  const auto& r = detail::require_indicator(ds);
  if (g1.rows() != ds.n()) throw std::invalid_argument("loss_missing: basis rows != n");
  if (gamma.size() != g1.cols())
    throw std::invalid_argument("loss_missing: coefficient length != basis columns");
  LossValue out;
  out.per_obs.resize(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double eta = clamp_eta(dot(gamma, g1.row(i)));
    out.per_obs[i] = r[i] != 0 ? std::exp(-eta) : eta;
  }
  out.total = compensated_sum(out.per_obs);
  return out;
}

inline LossValue loss_missing(std::span<const double> gamma, const Dataset& ds,
                              const BalanceBasis& basis_g1) {
  detail::check_g1(basis_g1);
  return loss_missing(gamma, ds, basis_matrix(basis_g1, ds.x));
}

inline Vector grad_loss_missing(std::span<const double> gamma, const Dataset& ds,
                                const Matrix& g1) {
  const auto& r = detail::require_indicator(ds);
  Vector grad(g1.cols(), 0.0);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double eta = clamp_eta(dot(gamma, g1.row(i)));
    const double c = r[i] != 0 ? -std::exp(-eta) : 1.0;
    const auto row = g1.row(i);
    for (std::size_t j = 0; j < g1.cols(); ++j) grad[j] += c * row[j];
  }
  return grad;
}

// Masked treatment loss l_A(alpha) with g replaced by R_i g2(X_i).
inline LossValue loss_treatment_missing(std::span<const double> alpha, const Dataset& ds,
                                        const BalanceBasis& basis_g2) {
  detail::require_indicator(ds);
  return loss_calibration(alpha, ds, masked_basis_matrix(basis_g2, ds));
}

// Newton minimization of l_R; strictly convex on the observed design.
inline Vector fit_missingness_model(const Dataset& ds, const Matrix& g1,
                                    const SolverOptions& opts = {}) {
  const auto& r = detail::require_indicator(ds);
  const std::size_t cols = g1.cols();
  const double n = static_cast<double>(ds.n());
  Vector gamma(cols, 0.0);
  double loss = loss_missing(gamma, ds, g1).total;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Vector grad = grad_loss_missing(gamma, ds, g1);
    for (double& v : grad) v /= n;
    if (max_abs(grad) <= opts.tol_grad) return gamma;
    if (max_abs(gamma) > opts.divergence_bound)
      throw ConvergenceError("fit_missingness_model: diverging coefficients", gamma,
                             max_abs(grad));
    Vector w(ds.n(), 0.0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
      if (r[i] == 0) continue;
      w[i] = std::exp(-clamp_eta(dot(gamma, g1.row(i)))) / n;
    }
    Matrix h = detail::weighted_gram(g1, w);
    if (!cholesky_factor(h))
      throw ConvergenceError("fit_missingness_model: singular Hessian", gamma, max_abs(grad));
    Vector dir = cholesky_solve_factored(h, grad);
    for (double& v : dir) v = -v;

    double slope = 0.0;
    for (std::size_t j = 0; j < cols; ++j) slope -= grad[j] * dir[j];
    double s = 1.0;
    for (;;) {
      Vector cand(cols);
      for (std::size_t j = 0; j < cols; ++j) cand[j] = gamma[j] + s * dir[j];
      const double cand_loss = loss_missing(cand, ds, g1).total;
      if (cand_loss / n <= loss / n - 1e-4 * s * slope) {
        gamma = std::move(cand);
        loss = cand_loss;
        break;
      }
      s *= opts.backtrack;
      if (s < 1e-14)
        throw ConvergenceError("fit_missingness_model: line search failed", gamma,
                               max_abs(grad));
    }
  }
  throw ConvergenceError("fit_missingness_model: no convergence", gamma, 0.0);
}

// Fits both models. lambda_a > 0 applies the usual L1 penalty to the masked
// treatment fit; zero solves the exact-balance equations on observed rows.
inline MissingFit fit_missing(const Dataset& ds, const BalanceBasis& basis_g1,
                              const BalanceBasis& basis_g2, const SolverOptions& opts = {},
                              double lambda_a = 0.0) {
  detail::check_g1(basis_g1);
  validate_dataset(ds);
  const Matrix g1 = basis_matrix(basis_g1, ds.x);
  const Matrix g2_masked = masked_basis_matrix(basis_g2, ds);

  MissingFit fit;
  fit.gamma = fit_missingness_model(ds, g1, opts);
  fit.alpha = lambda_a > 0.0 ? fit_rcal(ds, g2_masked, lambda_a, opts).alpha
                             : fit_cbps_exact(ds, g2_masked, opts).alpha;
  fit.lambda_a = lambda_a;
  fit.e_r = fitted_propensities(fit.gamma, g1);
  fit.e_a = fitted_propensities(fit.alpha, g2_masked);
  return fit;
}

struct MissingEffect {
  double theta1 = 0.0;
  double theta0 = 0.0;  // symmetric analogue of the displayed theta1
  double tau = 0.0;
};

inline MissingEffect ipw_missing(std::span<const double> e_r, std::span<const double> e_a,
                                 const Dataset& ds) {
  const auto& r = detail::require_indicator(ds);
  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (r[i] == 0) continue;
    const double w_obs = 1.0 / e_r[i];
    if (ds.a[i] != 0) {
      const double w = w_obs / e_a[i];
      num1 += w * ds.y[i];
      den1 += w;
    } else {
      const double w = w_obs / (1.0 - e_a[i]);
      num0 += w * ds.y[i];
      den0 += w;
    }
  }
  if (den1 == 0.0) throw std::invalid_argument("ipw_missing: no observed treated units");
  if (den0 == 0.0) throw std::invalid_argument("ipw_missing: no observed control units");
  MissingEffect out;
  out.theta1 = num1 / den1;
  out.theta0 = num0 / den0;
  out.tau = out.theta1 - out.theta0;
  return out;
}

inline MissingEffect ipw_missing(const MissingFit& fit, const Dataset& ds) {
  return ipw_missing(fit.e_r, fit.e_a, ds);
}

}  // namespace cbipw
