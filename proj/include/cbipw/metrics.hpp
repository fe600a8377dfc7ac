#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbipw/estimators.hpp"

namespace cbipw {

// Per (scenario, method, n) summary of a replication study: bias and RMSE of
// the point estimates, coverage and average length of the intervals, and
// bias/RMSE ratios against a reference method when one is supplied.
struct MetricsRow {
  std::string scenario;
  std::string method;
  std::size_t n = 0;
  std::size_t replications = 0;
  std::size_t failures = 0;
  double bias = 0.0;
  double rmse = 0.0;
  double cp = 0.0;
  double avl = 0.0;
  std::optional<double> br;
  std::optional<double> rr;
};

struct MetricsReference {
  double bias = 0.0;
  double rmse = 0.0;
};

inline MetricsRow metrics(std::span<const double> tau_hats, std::span<const Interval> intervals,
                          double tau0, std::optional<MetricsReference> reference = std::nullopt) {
  const std::size_t k = tau_hats.size();
  if (k == 0) throw std::invalid_argument("metrics: no replications");
  if (intervals.size() != k) throw std::invalid_argument("metrics: interval count mismatch");
  MetricsRow row;
  row.replications = k;
  double sum = 0.0, sumsq = 0.0, covered = 0.0, length = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sum += tau_hats[i];
    const double d = tau_hats[i] - tau0;
    sumsq += d * d;
    if (intervals[i].lo <= tau0 && tau0 <= intervals[i].hi) covered += 1.0;
    length += intervals[i].hi - intervals[i].lo;
  }
  row.bias = sum / k - tau0;
  row.rmse = std::sqrt(sumsq / k);
  row.cp = covered / k;
  row.avl = length / k;
  if (reference) {
    row.br = std::abs(row.bias) / std::abs(reference->bias);
    row.rr = row.rmse / reference->rmse;
  }
  return row;
}

}  // namespace cbipw
