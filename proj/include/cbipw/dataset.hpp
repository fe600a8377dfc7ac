#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbipw/linalg.hpp"

namespace cbipw {

// Observed data: outcome y, binary treatment a, covariate matrix x, and an
// optional missingness indicator r (1 = observed). When r is present, NaN is
// tolerated in the first covariate column for units with r == 0; everywhere
// else the data must be finite.
struct Dataset {
  Vector y;
  std::vector<int> a;
  Matrix x;
  std::optional<std::vector<int>> r;

  std::size_t n() const { return y.size(); }
  std::size_t p() const { return x.cols(); }

  std::size_t treated_count() const {
    std::size_t c = 0;
    for (int ai : a) c += static_cast<std::size_t>(ai);
    return c;
  }
};

inline void validate_dataset(const Dataset& ds, bool for_estimation = true) {
  const std::size_t n = ds.n();
  if (n < 2) throw std::invalid_argument("dataset: need at least 2 observations");
  if (ds.a.size() != n || ds.x.rows() != n)
    throw std::invalid_argument("dataset: Y, A, X lengths disagree");
  if (ds.r && ds.r->size() != n)
    throw std::invalid_argument("dataset: missingness indicator length disagrees");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(ds.y[i]))
      throw std::invalid_argument("dataset: non-finite outcome at row " + std::to_string(i + 1));
    if (ds.a[i] != 0 && ds.a[i] != 1)
      throw std::invalid_argument("dataset: treatment not in {0,1} at row " + std::to_string(i + 1));
    if (ds.r && ((*ds.r)[i] != 0 && (*ds.r)[i] != 1))
      throw std::invalid_argument("dataset: missingness indicator not in {0,1} at row " +
                                  std::to_string(i + 1));
    for (std::size_t j = 0; j < ds.p(); ++j) {
      if (std::isfinite(ds.x(i, j))) continue;
      const bool allowed = ds.r && j == 0 && (*ds.r)[i] == 0;
      if (!allowed)
        throw std::invalid_argument("dataset: non-finite covariate at row " +
                                    std::to_string(i + 1) + ", column " + std::to_string(j + 1));
    }
  }
  if (for_estimation) {
    const std::size_t n1 = ds.treated_count();
    if (n1 == 0 || n1 == n)
      throw std::invalid_argument("dataset: both treatment arms must be non-empty");
  }
}

}  // namespace cbipw
