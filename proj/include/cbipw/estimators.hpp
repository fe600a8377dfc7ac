#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbipw/dataset.hpp"
#include "cbipw/linalg.hpp"

namespace cbipw {

// Hajek (ratio-form) IPW estimation of the arm means and their difference,
// plus interval construction and the standardized-mean-difference balance
// diagnostic.

struct PointEffect {
  double theta1 = 0.0;
  double theta0 = 0.0;
  double tau = 0.0;
};

enum class IntervalKind { frequentist, credible };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  IntervalKind kind = IntervalKind::frequentist;
};

struct EffectEstimate {
  PointEffect point;
  Interval interval;
  std::string method;
};

inline PointEffect ipw_estimate(std::span<const double> e, const Dataset& ds) {
  if (e.size() != ds.n()) throw std::invalid_argument("ipw_estimate: propensity length != n");
  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (!(e[i] > 0.0 && e[i] < 1.0))
      throw std::invalid_argument("ipw_estimate: propensity outside (0,1) at row " +
                                  std::to_string(i + 1));
    if (ds.a[i] != 0) {
      const double w = 1.0 / e[i];
      num1 += w * ds.y[i];
      den1 += w;
    } else {
      const double w = 1.0 / (1.0 - e[i]);
      num0 += w * ds.y[i];
      den0 += w;
    }
  }
  if (den1 == 0.0 || den0 == 0.0) throw std::invalid_argument("ipw_estimate: empty arm");
  PointEffect out;
  out.theta1 = num1 / den1;
  out.theta0 = num0 / den0;
  out.tau = out.theta1 - out.theta0;
  return out;
}

// Empirical percentile interval with linear interpolation between order
// statistics (quantile type 7).
inline std::pair<double, double> credible_interval(std::span<const double> draws, double level) {
  if (draws.size() < 2) throw std::invalid_argument("credible_interval: need >= 2 draws");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("credible_interval: level outside (0,1)");
  Vector sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double q) {
    const double h = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
  };
  const double a = (1.0 - level) / 2.0;
  return {quantile(a), quantile(1.0 - a)};
}

namespace detail {

// Inverse standard normal CDF (Acklam's rational approximation, ~1e-9
// absolute accuracy; ample for interval quantiles).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > phigh) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

// Delta-method interval for the Hajek estimator treating the weights as
// known. The variance contribution of the estimated propensity coefficients
// is deliberately not stacked in; this is the usual plug-in approximation
// for comparator methods and is noted as such wherever coverage is reported.
inline Interval sandwich_ci(std::span<const double> e, const Dataset& ds, double level,
                            const PointEffect& point) {
  double s1 = 0.0, s0 = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i)
    if (ds.a[i] != 0)
      s1 += 1.0 / e[i];
    else
      s0 += 1.0 / (1.0 - e[i]);
  double var = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (ds.a[i] != 0) {
      const double u = (ds.y[i] - point.theta1) / (e[i] * s1);
      var += u * u;
    } else {
      const double u = (ds.y[i] - point.theta0) / ((1.0 - e[i]) * s0);
      var += u * u;
    }
  }
  if (var <= 0.0) throw std::domain_error("sandwich_ci: zero variance");
  const double z = detail::normal_quantile(0.5 + level / 2.0);
  const double half = z * std::sqrt(var);
  return {point.tau - half, point.tau + half, level, IntervalKind::frequentist};
}

inline Interval sandwich_ci(const std::vector<double>& e, const Dataset& ds, double level) {
  return sandwich_ci(std::span<const double>(e), ds, level, ipw_estimate(e, ds));
}

// Standardized mean differences of the given columns between arms. Weighted
// means use the supplied per-unit weights (unit weights when absent); the
// pooled SD always comes from the unweighted data so that before/after rows
// share a denominator. Variances use the population convention.
inline Vector smd_columns(const Matrix& cols, const std::vector<int>& a,
                          std::span<const double> weights = {}) {
  const std::size_t n = cols.rows();
  if (a.size() != n) throw std::invalid_argument("smd: treatment length != rows");
  Vector out(cols.cols());
  for (std::size_t j = 0; j < cols.cols(); ++j) {
    double w1 = 0.0, w0 = 0.0, m1 = 0.0, m0 = 0.0;
    double u1 = 0.0, u0 = 0.0, q1 = 0.0, q0 = 0.0;  // unweighted m and sum sq
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = cols(i, j);
      const double w = weights.empty() ? 1.0 : weights[i];
      if (a[i] != 0) {
        w1 += w;
        m1 += w * v;
        u1 += v;
        q1 += v * v;
        ++n1;
      } else {
        w0 += w;
        m0 += w * v;
        u0 += v;
        q0 += v * v;
        ++n0;
      }
    }
    if (n1 == 0 || n0 == 0) throw std::invalid_argument("smd: empty arm");
    if (w1 <= 0.0 || w0 <= 0.0) throw std::invalid_argument("smd: nonpositive weight total");
    const double var1 = q1 / n1 - (u1 / n1) * (u1 / n1);
    const double var0 = q0 / n0 - (u0 / n0) * (u0 / n0);
    const double pooled = std::sqrt(std::max(0.0, (var1 + var0) / 2.0));
    if (pooled == 0.0)
      throw std::domain_error("smd: zero pooled SD for column " + std::to_string(j + 1));
    out[j] = (m1 / w1 - m0 / w0) / pooled;
  }
  return out;
}

// SMD of selected covariate columns of a dataset.
inline Vector smd(const Dataset& ds, const std::vector<std::size_t>& columns,
                  std::span<const double> weights = {}) {
  Matrix sub(ds.n(), columns.size());
  for (std::size_t i = 0; i < ds.n(); ++i)
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j] >= ds.p()) throw std::invalid_argument("smd: column index out of range");
      sub(i, j) = ds.x(i, columns[j]);
    }
  return smd_columns(sub, ds.a, weights);
}

// Canonical IPW weights A/e + (1-A)/(1-e) for "after weighting" diagnostics.
inline Vector ipw_weights(std::span<const double> e, const std::vector<int>& a) {
  Vector w(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    w[i] = a[i] != 0 ? 1.0 / e[i] : 1.0 / (1.0 - e[i]);
  return w;
}

}  // namespace cbipw
