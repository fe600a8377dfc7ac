#pragma once

// Shared test utilities: generic dataset generators and the independent
// oracles (finite differences, brute-force loss evaluation, KS statistic,
// batch-means standard errors) that the library code must agree with.
// Everything here is deliberately written from the mathematical definitions,
// not by calling the code under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cbipw/basis.hpp"
#include "cbipw/dataset.hpp"
#include "cbipw/linalg.hpp"
#include "cbipw/rng.hpp"

namespace testutil {

using cbipw::Dataset;
using cbipw::Matrix;
using cbipw::Rng;
using cbipw::Vector;

// Continuous covariates, logistic treatment with random coefficients, and a
// continuous outcome: a generic non-degenerate estimation problem.
inline Dataset random_dataset(Rng& rng, std::size_t n, std::size_t p, double coef_scale = 0.7) {
  Dataset ds;
  ds.x = Matrix(n, p);
  Vector beta(p + 1);
  for (auto& b : beta) b = coef_scale * rng.normal();
  ds.a.resize(n);
  ds.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double eta = beta[0];
    for (std::size_t j = 0; j < p; ++j) {
      ds.x(i, j) = rng.normal();
      eta += beta[j + 1] * ds.x(i, j);
    }
    ds.a[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1 : 0;
    ds.y[i] = 0.5 * ds.a[i] + ds.x(i, 0) + rng.normal();
  }
  // guarantee both arms occupied
  ds.a[0] = 1;
  ds.a[n - 1] = 0;
  return ds;
}

// Central finite differences of a scalar function.
inline Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                         const Vector& at, double h = 1e-6) {
  Vector grad(at.size());
  for (std::size_t j = 0; j < at.size(); ++j) {
    Vector hi = at, lo = at;
    hi[j] += h;
    lo[j] -= h;
    grad[j] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return grad;
}

// Literal transcription of the calibration loss definition, term by term.
inline double brute_force_calibration_loss(const Vector& alpha, const Dataset& ds,
                                           const Matrix& g) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    double eta = 0.0;
    for (std::size_t j = 0; j < g.cols(); ++j) eta += alpha[j] * g(i, j);
    const double a = ds.a[i];
    total += a * std::exp(-eta) + (1.0 - a) * eta + (1.0 - a) * std::exp(eta) - a * eta;
  }
  return total;
}

inline double brute_force_outcome_loss(int k, double theta, const Vector& e, const Dataset& ds) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double a = ds.a[i];
    const double ind = k == 1 ? a : 1.0 - a;
    const double denom = k == 1 ? e[i] : 1.0 - e[i];
    total += ind / denom * (ds.y[i] - theta) * (ds.y[i] - theta);
  }
  return total;
}

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Kolmogorov-Smirnov statistic against a Normal(mean, sd) law.
inline double ks_statistic_normal(Vector draws, double mean, double sd) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double f = std_normal_cdf((draws[i] - mean) / sd);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

struct ChainSummary {
  double mean = 0.0;
  double sd = 0.0;
  double se_mean = 0.0;  // batch-means standard error
  double se_sd = 0.0;
};

// Batch-means Monte Carlo error for a (possibly autocorrelated) chain.
inline ChainSummary summarize_chain(std::span<const double> chain, std::size_t batches = 50) {
  ChainSummary s;
  const std::size_t n = chain.size();
  for (double v : chain) s.mean += v;
  s.mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : chain) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(n));

  const std::size_t len = n / batches;
  double bvar = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    double bm = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) bm += chain[i];
    bm /= static_cast<double>(len);
    bvar += (bm - s.mean) * (bm - s.mean);
  }
  bvar /= static_cast<double>(batches - 1);
  s.se_mean = std::sqrt(bvar / static_cast<double>(batches));
  // effective sample size implied by the batch means, reused for the SD error
  const double var_chain = s.sd * s.sd;
  const double ess = var_chain > 0.0 ? var_chain / (bvar / static_cast<double>(batches)) : n;
  s.se_sd = s.sd / std::sqrt(2.0 * std::max(1.0, ess));
  return s;
}

// Dense 2-D quadrature oracle for the stage-1 posterior on a basis with one
// intercept and one penalized coefficient. lambda is integrated out
// analytically against its Gamma(a, b) prior:
//
//   p(a0, a1) ∝ exp(-omega l_A(a0, a1)) / (b + |a1|)^(a+1).
//
// Locates the mass with a coarse scan, then integrates on a fine grid and
// returns moments plus the binned marginal of the penalized coefficient.
struct QuadratureResult {
  double mean0 = 0.0, sd0 = 0.0;
  double mean1 = 0.0, sd1 = 0.0;
  Vector bin_edges;   // for the a1 marginal
  Vector bin_mass;    // normalized
};

inline QuadratureResult quadrature_alpha_posterior(const Dataset& ds, const Matrix& g,
                                                   double omega, double shape, double rate,
                                                   std::size_t fine = 801,
                                                   std::size_t tv_bins = 40) {
  const auto logpost = [&](double a0, double a1) {
    double loss = 0.0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const double eta = a0 * g(i, 0) + a1 * g(i, 1);
      loss += ds.a[i] ? std::exp(-eta) - eta : eta + std::exp(eta);
    }
    return -omega * loss - (shape + 1.0) * std::log(rate + std::abs(a1));
  };

  // coarse scan for the high-probability box
  const std::size_t coarse = 241;
  double best = -1e300;
  for (std::size_t i = 0; i < coarse; ++i)
    for (std::size_t j = 0; j < coarse; ++j) {
      const double a0 = -8.0 + 16.0 * i / (coarse - 1.0);
      const double a1 = -8.0 + 16.0 * j / (coarse - 1.0);
      best = std::max(best, logpost(a0, a1));
    }
  double lo0 = 8.0, hi0 = -8.0, lo1 = 8.0, hi1 = -8.0;
  for (std::size_t i = 0; i < coarse; ++i)
    for (std::size_t j = 0; j < coarse; ++j) {
      const double a0 = -8.0 + 16.0 * i / (coarse - 1.0);
      const double a1 = -8.0 + 16.0 * j / (coarse - 1.0);
      if (logpost(a0, a1) > best - 30.0) {
        lo0 = std::min(lo0, a0);
        hi0 = std::max(hi0, a0);
        lo1 = std::min(lo1, a1);
        hi1 = std::max(hi1, a1);
      }
    }
  lo0 -= 0.25; hi0 += 0.25; lo1 -= 0.25; hi1 += 0.25;

  std::vector<double> grid0(fine), grid1(fine);
  for (std::size_t i = 0; i < fine; ++i) {
    grid0[i] = lo0 + (hi0 - lo0) * i / (fine - 1.0);
    grid1[i] = lo1 + (hi1 - lo1) * i / (fine - 1.0);
  }
  Vector marg1(fine, 0.0);
  double total = 0.0, m0 = 0.0, m1 = 0.0, q0 = 0.0, q1 = 0.0;
  for (std::size_t j = 0; j < fine; ++j) {
    double col = 0.0, col_m0 = 0.0, col_q0 = 0.0;
    for (std::size_t i = 0; i < fine; ++i) {
      const double w = std::exp(logpost(grid0[i], grid1[j]) - best);
      col += w;
      col_m0 += w * grid0[i];
      col_q0 += w * grid0[i] * grid0[i];
    }
    marg1[j] = col;
    total += col;
    m0 += col_m0;
    q0 += col_q0;
    m1 += col * grid1[j];
    q1 += col * grid1[j] * grid1[j];
  }
  QuadratureResult out;
  out.mean0 = m0 / total;
  out.sd0 = std::sqrt(q0 / total - out.mean0 * out.mean0);
  out.mean1 = m1 / total;
  out.sd1 = std::sqrt(q1 / total - out.mean1 * out.mean1);

  out.bin_edges.resize(tv_bins + 1);
  out.bin_mass.assign(tv_bins, 0.0);
  for (std::size_t k = 0; k <= tv_bins; ++k)
    out.bin_edges[k] = lo1 + (hi1 - lo1) * k / static_cast<double>(tv_bins);
  for (std::size_t j = 0; j < fine; ++j) {
    std::size_t k = static_cast<std::size_t>((grid1[j] - lo1) / (hi1 - lo1) * tv_bins);
    k = std::min(k, tv_bins - 1);
    out.bin_mass[k] += marg1[j] / total;
  }
  return out;
}

// Total-variation distance between draws (binned on edges) and a reference
// binned mass; draws outside the edges land in the end bins.
inline double tv_distance(std::span<const double> draws, const Vector& edges,
                          const Vector& mass) {
  Vector hist(mass.size(), 0.0);
  for (double v : draws) {
    std::size_t k;
    if (v <= edges.front())
      k = 0;
    else if (v >= edges.back())
      k = mass.size() - 1;
    else
      k = static_cast<std::size_t>((v - edges.front()) / (edges.back() - edges.front()) *
                                   static_cast<double>(mass.size()));
    hist[std::min(k, mass.size() - 1)] += 1.0 / static_cast<double>(draws.size());
  }
  double tv = 0.0;
  for (std::size_t k = 0; k < mass.size(); ++k) tv += std::abs(hist[k] - mass[k]);
  return 0.5 * tv;
}

}  // namespace testutil
