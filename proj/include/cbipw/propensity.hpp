#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "cbipw/basis.hpp"
#include "cbipw/linalg.hpp"

namespace cbipw {

// Linear predictors are clamped to [-36, 36] before expit so fitted
// propensities stay strictly inside (0,1) in double precision and the
// exponentials in the calibration loss cannot overflow. Clamp events are
// counted per thread; samplers snapshot the counter around their work.

inline constexpr double kEtaClamp = 36.0;

inline std::uint64_t& clamp_event_counter() {
  thread_local std::uint64_t count = 0;
  return count;
}

inline double clamp_eta(double eta) {
  if (eta > kEtaClamp) {
    ++clamp_event_counter();
    return kEtaClamp;
  }
  if (eta < -kEtaClamp) {
    ++clamp_event_counter();
    return -kEtaClamp;
  }
  return eta;
}

inline double expit(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

// e(x; alpha) = expit(clamp(alpha' g(x))), strictly inside (0,1).
inline double propensity(std::span<const double> alpha, std::span<const double> g_row) {
  return expit(clamp_eta(dot(alpha, g_row)));
}

enum class FitMethod { logit, cbps, rcal, posterior_draw };

inline std::string to_string(FitMethod m) {
  switch (m) {
    case FitMethod::logit: return "logit";
    case FitMethod::cbps: return "cbps";
    case FitMethod::rcal: return "rcal";
    case FitMethod::posterior_draw: return "posterior-draw";
  }
  return "?";
}

// A fitted propensity model: coefficients (intercept first), the tuning
// value used, and per-unit fitted propensities on the training data.
struct PropensityFit {
  Vector alpha;
  double lambda = 0.0;
  FitMethod method = FitMethod::logit;
  Vector e;
};

// Fitted propensities for every row of a precomputed basis matrix.
inline Vector fitted_propensities(std::span<const double> alpha, const Matrix& g) {
  Vector e(g.rows());
  for (std::size_t i = 0; i < g.rows(); ++i) e[i] = propensity(alpha, g.row(i));
  return e;
}

}  // namespace cbipw
