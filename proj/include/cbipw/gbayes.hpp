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
#include "cbipw/optimize.hpp"
#include "cbipw/propensity.hpp"
#include "cbipw/rng.hpp"

namespace cbipw {

// Generalized-posterior sampling in two stages.
//
// Stage 1 targets the joint density of (alpha, lambda),
//
//   p(alpha, lambda | A, X)  ∝  p(alpha | lambda) p(lambda) exp{-omega l_A(alpha)},
//
// with a Gamma(shape, rate) prior on lambda and, on the penalized
// coordinates of alpha, a double-exponential prior with location 0 and scale
// 1/lambda. The intercept coordinate carries a flat prior. lambda is
// conjugate given alpha (Gamma(shape + L, rate + ||alpha||_1)), so stage 1
// alternates an exact Gibbs draw of lambda with an adaptive random-walk
// Metropolis block update of alpha. Proposal adaptation (empirical
// covariance plus Robbins-Monro scaling toward 0.234 acceptance) runs only
// during burn-in; the proposal is frozen afterwards so the post-burn-in
// chain has the correct stationary law.
//
// Stage 2 is exact: given alpha, each arm mean theta_k is conditionally
// Normal with
//
//   s_ki        = 2 A_i^k (1-A_i)^{1-k} / (e_i^k (1-e_i)^{1-k}),
//   tau_tilde_k = tau_k + omega sum_i s_ki,
//   mu_tilde_k  = (tau_k mu_k + omega sum_i s_ki Y_i) / tau_tilde_k,
//
// and theta_k is drawn from N(mu_tilde_k, precision tau_tilde_k).
//
// A loss-likelihood-bootstrap backend is provided as an approximate
// alternative: each draw minimizes the Dirichlet-reweighted calibration loss
// with an L1 penalty at the current Gibbs draw of lambda.

struct GammaPrior {
  double shape = 0.01;
  double rate = 0.1;
};

struct NormalPrior {
  double mean = 0.0;
  double precision = 1e-4;  // SD 100
};

struct Priors {
  GammaPrior lambda;
  NormalPrior theta1;
  NormalPrior theta0;
};

enum class SamplerBackend { adaptive_metropolis, loss_likelihood_bootstrap };

struct McmcOptions {
  int draws = 2000;
  int burn_in = 2000;
  int thinning = 1;
  std::uint64_t seed = 1;
  SamplerBackend backend = SamplerBackend::adaptive_metropolis;
  double proposal_scale = 0.5;   // initial RW scale, adapted during burn-in
  double target_accept = 0.234;
  bool store_scores = true;
  SolverOptions bootstrap_solver;  // inner solver for the bootstrap backend
};

struct AlphaLambdaDraws {
  Matrix alpha;   // R x (L+1)
  Vector lambda;  // R
  double acceptance_rate = 0.0;
  std::vector<std::string> warnings;
};

struct PosteriorDraws {
  double omega = 1.0;
  Matrix alpha;
  Vector lambda;
  Vector theta1;
  Vector theta0;
  Matrix scores;  // n x R per-observation scores (empty unless stored)
  double acceptance_rate = 0.0;
  std::uint64_t clamp_events = 0;
  std::vector<std::string> warnings;

  std::size_t draw_count() const { return lambda.size(); }

  Vector tau() const {
    Vector t(theta1.size());
    for (std::size_t r = 0; r < t.size(); ++r) t[r] = theta1[r] - theta0[r];
    return t;
  }
};

// log p(alpha, lambda | data) up to an additive constant:
//   -omega l_A(alpha) + L log(lambda/2) - lambda ||alpha||_1
//   + (shape-1) log lambda - rate lambda.
// The lambda-dependent normalizer of the double-exponential prior is kept;
// dropping it would change the joint law in (alpha, lambda).
inline double log_unnorm_posterior_alpha(std::span<const double> alpha, double lambda,
                                         double omega, const Dataset& ds, const Matrix& g,
                                         const Priors& priors) {
  if (!(lambda > 0.0)) throw std::invalid_argument("log_unnorm_posterior_alpha: lambda <= 0");
  if (omega < 0.0) throw std::invalid_argument("log_unnorm_posterior_alpha: negative omega");
  const double loss = loss_calibration(alpha, ds, g).total;
  const double pen = penalized_l1_norm(alpha);
  const double l = static_cast<double>(alpha.size() - 1);
  return -omega * loss + l * std::log(lambda / 2.0) - lambda * pen +
         (priors.lambda.shape - 1.0) * std::log(lambda) - priors.lambda.rate * lambda;
}

inline double log_unnorm_posterior_alpha(std::span<const double> alpha, double lambda,
                                         double omega, const Dataset& ds,
                                         const BalanceBasis& basis, const Priors& priors) {
  return log_unnorm_posterior_alpha(alpha, lambda, omega, ds, basis_matrix(basis, ds.x), priors);
}

// Full conditional of lambda given alpha: Gamma(shape + L, rate + ||alpha||_1).
inline GammaPrior lambda_full_conditional(std::span<const double> alpha, const Priors& priors) {
  return {priors.lambda.shape + static_cast<double>(alpha.size() - 1),
          priors.lambda.rate + penalized_l1_norm(alpha)};
}

inline double gibbs_lambda(std::span<const double> alpha, const Priors& priors, Rng& rng) {
  const GammaPrior fc = lambda_full_conditional(alpha, priors);
  return rng.gamma(fc.shape, fc.rate);
}

namespace detail {

// Welford running mean/covariance of the alpha chain, used for proposal
// adaptation during burn-in.
class RunningCov {
public:
  explicit RunningCov(std::size_t dim) : mean_(dim, 0.0), m2_(dim, dim) {}

  void add(std::span<const double> x) {
    ++count_;
    Vector delta(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) delta[j] = x[j] - mean_[j];
    for (std::size_t j = 0; j < x.size(); ++j) mean_[j] += delta[j] / count_;
    for (std::size_t a = 0; a < x.size(); ++a)
      for (std::size_t b = 0; b < x.size(); ++b)
        m2_(a, b) += delta[a] * (x[b] - mean_[b]);
  }

  std::size_t count() const { return count_; }

  Matrix covariance() const {
    Matrix c = m2_;
    const double denom = count_ > 1 ? static_cast<double>(count_ - 1) : 1.0;
    for (double& v : c.data()) v /= denom;
    return c;
  }

private:
  std::size_t count_ = 0;
  Vector mean_;
  Matrix m2_;
};

}  // namespace detail

inline AlphaLambdaDraws sample_alpha_lambda(const Dataset& ds, const Matrix& g, double omega,
                                            const Priors& priors, const McmcOptions& opts) {
  validate_dataset(ds);
  if (!(omega > 0.0)) throw std::invalid_argument("sample_alpha_lambda: omega must be positive");
  if (opts.draws < 1 || opts.burn_in < 0 || opts.thinning < 1)
    throw std::invalid_argument("sample_alpha_lambda: bad draw counts");
  const std::size_t d = g.cols();
  Rng rng(opts.seed);

  Vector alpha(d, 0.0);
  double lambda = priors.lambda.shape / priors.lambda.rate;
  double loss = loss_calibration(alpha, ds, g).total;
  double pen = penalized_l1_norm(alpha);

  double scale = opts.proposal_scale;
  Matrix chol_id(d, d);
  for (std::size_t j = 0; j < d; ++j) chol_id(j, j) = 1.0;
  Matrix prop_chol = chol_id;
  detail::RunningCov cov(d);

  AlphaLambdaDraws out;
  out.alpha = Matrix(opts.draws, d);
  out.lambda.resize(opts.draws);

  const long total = static_cast<long>(opts.burn_in) +
                     static_cast<long>(opts.draws) * opts.thinning;
  long kept = 0, accepted_post = 0, attempts_post = 0;
  Vector proposal(d), z(d);

  for (long iter = 0; iter < total; ++iter) {
    lambda = gibbs_lambda(alpha, priors, rng);

    for (std::size_t j = 0; j < d; ++j) z[j] = rng.normal();
    for (std::size_t a = 0; a < d; ++a) {
      double step = 0.0;
      for (std::size_t b = 0; b <= a; ++b) step += prop_chol(a, b) * z[b];
      proposal[a] = alpha[a] + scale * step;
    }
    const LossValue prop_loss = loss_calibration(proposal, ds, g);
    const double prop_pen = penalized_l1_norm(proposal);
    const double log_ratio =
        (-omega * prop_loss.total - lambda * prop_pen) - (-omega * loss - lambda * pen);
    const bool accept = log_ratio >= 0.0 || std::log(rng.uniform01()) < log_ratio;
    if (accept) {
      alpha = proposal;
      loss = prop_loss.total;
      pen = prop_pen;
    }

    const bool in_burn = iter < opts.burn_in;
    if (in_burn && scale > 0.0) {
      // Robbins-Monro on log scale, empirical covariance refreshed in blocks.
      const double gamma = 1.0 / std::pow(static_cast<double>(iter + 1), 0.6);
      scale *= std::exp(gamma * ((accept ? 1.0 : 0.0) - opts.target_accept));
      cov.add(alpha);
      if (cov.count() >= 10 * d && (iter + 1) % 50 == 0) {
        Matrix c = cov.covariance();
        for (std::size_t j = 0; j < d; ++j) c(j, j) += 1e-8;
        if (cholesky_factor(c)) prop_chol = c;
      }
    }
    if (!in_burn) {
      ++attempts_post;
      if (accept) ++accepted_post;
      if ((iter - opts.burn_in + 1) % opts.thinning == 0 && kept < opts.draws) {
        for (std::size_t j = 0; j < d; ++j) out.alpha(kept, j) = alpha[j];
        out.lambda[kept] = lambda;
        ++kept;
      }
    }
  }

  out.acceptance_rate = attempts_post > 0
                            ? static_cast<double>(accepted_post) / attempts_post
                            : 0.0;
  if (attempts_post > 0 &&
      (out.acceptance_rate < 0.05 || out.acceptance_rate > 0.7))
    out.warnings.push_back("acceptance rate " + std::to_string(out.acceptance_rate) +
                           " outside [0.05, 0.7]");
  return out;
}

// Loss-likelihood bootstrap: draw flat Dirichlet weights, refit the weighted
// penalized calibration loss. lambda is refreshed by its Gibbs step at the
// previous draw. omega does not enter; the backend approximates the
// unit-learning-rate posterior and is kept for comparison purposes.
inline AlphaLambdaDraws bootstrap_alpha(const Dataset& ds, const Matrix& g,
                                        double /*omega_ignored*/, const Priors& priors,
                                        const McmcOptions& opts) {
  validate_dataset(ds);
  if (opts.draws < 1) throw std::invalid_argument("bootstrap_alpha: draws < 1");
  const std::size_t d = g.cols();
  const double n = static_cast<double>(ds.n());
  Rng rng(opts.seed);

  AlphaLambdaDraws out;
  out.alpha = Matrix(opts.draws, d);
  out.lambda.resize(opts.draws);
  out.acceptance_rate = 1.0;

  Vector alpha_prev(d, 0.0);
  for (int r = 0; r < opts.draws; ++r) {
    const double lambda = gibbs_lambda(alpha_prev, priors, rng);
    const Vector w = rng.dirichlet_times_n(ds.n());
    // minimize sum_i w_i per_obs_i + lambda ||alpha||_1, i.e. the (1/n)-scaled
    // objective with penalty lambda/n.
    const PropensityFit fit = fit_rcal(ds, g, lambda / n, opts.bootstrap_solver, w);
    for (std::size_t j = 0; j < d; ++j) out.alpha(r, j) = fit.alpha[j];
    out.lambda[r] = lambda;
    alpha_prev = fit.alpha;
  }
  return out;
}

struct ThetaPosterior {
  double mean = 0.0;
  double precision = 0.0;
};

inline ThetaPosterior theta_posterior(int k, std::span<const double> e, double omega,
                                      const NormalPrior& prior, const Dataset& ds) {
  if (k != 0 && k != 1) throw std::invalid_argument("theta_posterior: arm must be 0 or 1");
  double s_sum = 0.0, sy_sum = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (ds.a[i] != k) continue;
    const double s = k == 1 ? 2.0 / e[i] : 2.0 / (1.0 - e[i]);
    s_sum += s;
    sy_sum += s * ds.y[i];
  }
  ThetaPosterior post;
  post.precision = prior.precision + omega * s_sum;
  post.mean = (prior.precision * prior.mean + omega * sy_sum) / post.precision;
  return post;
}

inline double sample_theta(int k, std::span<const double> alpha_draw, double omega,
                           const NormalPrior& prior, const Dataset& ds, const Matrix& g,
                           Rng& rng) {
  bool any = false;
  for (int ai : ds.a)
    if (ai == k) {
      any = true;
      break;
    }
  if (!any) throw std::invalid_argument("sample_theta: empty arm " + std::to_string(k));
  const Vector e = fitted_propensities(alpha_draw, g);
  const ThetaPosterior post = theta_posterior(k, e, omega, prior, ds);
  return rng.normal(post.mean, 1.0 / std::sqrt(post.precision));
}

inline PosteriorDraws run_two_stage(const Dataset& ds, const Matrix& g, double omega,
                                    const Priors& priors, const McmcOptions& opts) {
  validate_dataset(ds);
  const std::size_t n = ds.n();
  const std::uint64_t clamp_before = clamp_event_counter();

  AlphaLambdaDraws stage1 =
      opts.backend == SamplerBackend::adaptive_metropolis
          ? sample_alpha_lambda(ds, g, omega, priors, opts)
          : bootstrap_alpha(ds, g, omega, priors, opts);

  PosteriorDraws out;
  out.omega = omega;
  out.alpha = std::move(stage1.alpha);
  out.lambda = std::move(stage1.lambda);
  out.acceptance_rate = stage1.acceptance_rate;
  out.warnings = std::move(stage1.warnings);
  const std::size_t R = out.lambda.size();
  out.theta1.resize(R);
  out.theta0.resize(R);
  if (opts.store_scores) out.scores = Matrix(n, R);

  Rng theta_rng(substream_seed(opts.seed, 1, 0x7ce5u));
  Vector e(n), eta(n);
  for (std::size_t r = 0; r < R; ++r) {
    const auto alpha_r = out.alpha.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      eta[i] = clamp_eta(dot(alpha_r, g.row(i)));
      e[i] = expit(eta[i]);
    }
    const ThetaPosterior p1 = theta_posterior(1, e, omega, priors.theta1, ds);
    const ThetaPosterior p0 = theta_posterior(0, e, omega, priors.theta0, ds);
    out.theta1[r] = theta_rng.normal(p1.mean, 1.0 / std::sqrt(p1.precision));
    out.theta0[r] = theta_rng.normal(p0.mean, 1.0 / std::sqrt(p0.precision));

    if (opts.store_scores) {
      for (std::size_t i = 0; i < n; ++i) {
        double per;
        if (ds.a[i] != 0) {
          const double d1 = ds.y[i] - out.theta1[r];
          per = std::exp(-eta[i]) - eta[i] + d1 * d1 / e[i];
        } else {
          const double d0 = ds.y[i] - out.theta0[r];
          per = eta[i] + std::exp(eta[i]) + d0 * d0 / (1.0 - e[i]);
        }
        out.scores(i, r) = -per;
      }
    }
  }
  out.clamp_events = clamp_event_counter() - clamp_before;
  return out;
}

inline PosteriorDraws run_two_stage(const Dataset& ds, const BalanceBasis& basis, double omega,
                                    const Priors& priors, const McmcOptions& opts) {
  return run_two_stage(ds, basis_matrix(basis, ds.x), omega, priors, opts);
}

}  // namespace cbipw
