#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "cbipw/basis.hpp"
#include "cbipw/dataset.hpp"
#include "cbipw/linalg.hpp"
#include "cbipw/propensity.hpp"

namespace cbipw {

// The three losses behind the estimators, kept additive over observations:
//
//   calibration loss  l_A(alpha) = sum_i [ A e^{-eta} + (1-A) eta + (1-A) e^{eta} - A eta ]
//   outcome losses    l_{Yk}(theta) = sum_i w_ki (Y_i - theta)^2,  w_1i = A_i/e_i,
//                     w_0i = (1-A_i)/(1-e_i)
//
// with eta_i = alpha' g(X_i) after clamping. The gradient of l_A is the
// negative balance vector, so the balance report and the gradient share one
// code path and the identity grad = -raw holds exactly.

struct LossValue {
  double total = 0.0;
  Vector per_obs;
};

struct BalanceReport {
  Vector raw;         // sum_i (A_i/e_i - (1-A_i)/(1-e_i)) g_j(X_i)
  Vector normalized;  // raw / n
};

namespace detail {

inline void check_dims(const Dataset& ds, const Matrix& g, std::span<const double> alpha) {
  if (g.rows() != ds.n()) throw std::invalid_argument("losses: basis matrix rows != n");
  if (alpha.size() != g.cols())
    throw std::invalid_argument("losses: coefficient length != basis columns");
}

}  // namespace detail

inline LossValue loss_calibration(std::span<const double> alpha, const Dataset& ds,
                                  const Matrix& g, std::span<const double> weights = {}) {
  detail::check_dims(ds, g, alpha);
  LossValue out;
  out.per_obs.resize(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double eta = clamp_eta(dot(alpha, g.row(i)));
    const double term = ds.a[i] != 0 ? std::exp(-eta) - eta : eta + std::exp(eta);
    out.per_obs[i] = weights.empty() ? term : weights[i] * term;
  }
  out.total = compensated_sum(out.per_obs);
  return out;
}

inline LossValue loss_calibration(std::span<const double> alpha, const Dataset& ds,
                                  const BalanceBasis& basis) {
  return loss_calibration(alpha, ds, basis_matrix(basis, ds.x));
}

inline BalanceReport balance_vector(std::span<const double> alpha, const Dataset& ds,
                                    const Matrix& g, std::span<const double> weights = {}) {
  detail::check_dims(ds, g, alpha);
  const std::size_t cols = g.cols();
  BalanceReport rep;
  rep.raw.assign(cols, 0.0);
  Vector comp(cols, 0.0);  // Neumaier compensation per column
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double eta = clamp_eta(dot(alpha, g.row(i)));
    // A/e - (1-A)/(1-e) with e = expit(eta): 1+e^{-eta} for treated rows,
    // -(1+e^{eta}) for controls.
    double c = ds.a[i] != 0 ? 1.0 + std::exp(-eta) : -(1.0 + std::exp(eta));
    if (!weights.empty()) c *= weights[i];
    const auto row = g.row(i);
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = c * row[j];
      const double t = rep.raw[j] + v;
      if (std::abs(rep.raw[j]) >= std::abs(v))
        comp[j] += (rep.raw[j] - t) + v;
      else
        comp[j] += (v - t) + rep.raw[j];
      rep.raw[j] = t;
    }
  }
  rep.normalized.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    rep.raw[j] += comp[j];
    rep.normalized[j] = rep.raw[j] / static_cast<double>(ds.n());
  }
  return rep;
}

inline BalanceReport balance_vector(std::span<const double> alpha, const Dataset& ds,
                                    const BalanceBasis& basis) {
  return balance_vector(alpha, ds, basis_matrix(basis, ds.x));
}

// d l_A / d alpha = -(balance raw), exactly.
inline Vector grad_calibration(std::span<const double> alpha, const Dataset& ds, const Matrix& g,
                               std::span<const double> weights = {}) {
  BalanceReport rep = balance_vector(alpha, ds, g, weights);
  for (double& v : rep.raw) v = -v;
  return std::move(rep.raw);
}

inline Vector grad_calibration(std::span<const double> alpha, const Dataset& ds,
                               const BalanceBasis& basis) {
  return grad_calibration(alpha, ds, basis_matrix(basis, ds.x));
}

// Squared-error outcome loss for arm k in {0,1} at fitted propensities e.
inline LossValue loss_outcome_at(int k, double theta, std::span<const double> e,
                                 const Dataset& ds) {
  if (k != 0 && k != 1) throw std::invalid_argument("loss_outcome: arm must be 0 or 1");
  LossValue out;
  out.per_obs.assign(ds.n(), 0.0);
  bool any = false;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (ds.a[i] != k) continue;
    any = true;
    const double w = k == 1 ? 1.0 / e[i] : 1.0 / (1.0 - e[i]);
    const double d = ds.y[i] - theta;
    out.per_obs[i] = w * d * d;
  }
  if (!any) throw std::invalid_argument("loss_outcome: empty arm " + std::to_string(k));
  out.total = compensated_sum(out.per_obs);
  return out;
}

inline LossValue loss_outcome(int k, double theta, std::span<const double> alpha,
                              const Dataset& ds, const Matrix& g) {
  detail::check_dims(ds, g, alpha);
  return loss_outcome_at(k, theta, fitted_propensities(alpha, g), ds);
}

inline LossValue loss_outcome(int k, double theta, std::span<const double> alpha,
                              const Dataset& ds, const BalanceBasis& basis) {
  return loss_outcome(k, theta, alpha, ds, basis_matrix(basis, ds.x));
}

// lambda * sum_{j >= 1} |alpha_j|; the intercept (index 0) is never penalized.
inline double penalty_l1(std::span<const double> alpha, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("penalty_l1: negative lambda");
  double s = 0.0;
  for (std::size_t j = 1; j < alpha.size(); ++j) s += std::abs(alpha[j]);
  return lambda * s;
}

// ||alpha||_1 over penalized coordinates only.
inline double penalized_l1_norm(std::span<const double> alpha) {
  double s = 0.0;
  for (std::size_t j = 1; j < alpha.size(); ++j) s += std::abs(alpha[j]);
  return s;
}

}  // namespace cbipw
