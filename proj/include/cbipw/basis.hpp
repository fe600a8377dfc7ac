#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbipw/dataset.hpp"
#include "cbipw/linalg.hpp"

namespace cbipw {

// Balance basis g(.): the map from a covariate row to the columns whose
// weighted means are balanced between arms. Column 0 is always an intercept;
// it is never standardized and never penalized. Derived columns (squares,
// pairwise interactions) are computed from raw covariate values first and
// standardized afterwards. Standardization uses means/SDs recorded from the
// build-time matrix with the population convention (divide by n).

enum class TermKind { raw, square, interaction };

struct BasisTerm {
  TermKind kind = TermKind::raw;
  std::size_t col_a = 0;  // 0-based covariate index
  std::size_t col_b = 0;  // second index for interactions
};

inline BasisTerm raw_term(std::size_t col) { return {TermKind::raw, col, col}; }
inline BasisTerm square_term(std::size_t col) { return {TermKind::square, col, col}; }
inline BasisTerm interaction_term(std::size_t a, std::size_t b) {
  return {TermKind::interaction, a, b};
}

// First k covariates as raw terms, the usual first-order-moment basis.
inline std::vector<BasisTerm> raw_terms(std::size_t k) {
  std::vector<BasisTerm> spec;
  spec.reserve(k);
  for (std::size_t j = 0; j < k; ++j) spec.push_back(raw_term(j));
  return spec;
}

inline std::vector<BasisTerm> raw_and_square_terms(std::size_t k) {
  std::vector<BasisTerm> spec;
  spec.reserve(2 * k);
  for (std::size_t j = 0; j < k; ++j) spec.push_back(raw_term(j));
  for (std::size_t j = 0; j < k; ++j) spec.push_back(square_term(j));
  return spec;
}

struct BalanceBasis {
  std::vector<BasisTerm> terms;  // penalized columns; the intercept is implicit
  Vector means;                  // per term, zero when not standardized
  Vector sds;                    // per term, one when not standardized
  bool standardized = false;
  std::size_t input_cols = 0;

  // Number of penalized (non-intercept) columns.
  std::size_t penalized() const { return terms.size(); }
  // Total columns including the intercept, i.e. the length of g(x).
  std::size_t columns() const { return terms.size() + 1; }
};

namespace detail {

inline double raw_term_value(const BasisTerm& t, std::span<const double> x) {
  switch (t.kind) {
    case TermKind::raw: return x[t.col_a];
    case TermKind::square: return x[t.col_a] * x[t.col_a];
    case TermKind::interaction: return x[t.col_a] * x[t.col_b];
  }
  return 0.0;
}

}  // namespace detail

inline BalanceBasis build_balance_basis(const Matrix& x, std::span<const BasisTerm> spec,
                                        bool standardize = true) {
  const std::size_t n = x.rows();
  if (n == 0) throw std::invalid_argument("balance basis: empty covariate matrix");
  BalanceBasis basis;
  basis.terms.assign(spec.begin(), spec.end());
  basis.standardized = standardize;
  basis.input_cols = x.cols();
  basis.means.assign(spec.size(), 0.0);
  basis.sds.assign(spec.size(), 1.0);

  for (std::size_t j = 0; j < spec.size(); ++j) {
    const BasisTerm& t = spec[j];
    if (t.col_a >= x.cols() || t.col_b >= x.cols())
      throw std::invalid_argument("balance basis: term " + std::to_string(j + 1) +
                                  " references a covariate column outside the matrix");
    if (!standardize) continue;

    double sum = 0.0, lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = detail::raw_term_value(t, x.row(i));
      sum += v;
      if (i == 0) lo = hi = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo == hi)
      throw std::invalid_argument("balance basis: constant column for term " +
                                  std::to_string(j + 1) + " (cannot standardize)");
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = detail::raw_term_value(t, x.row(i)) - mean;
      ss += d * d;
    }
    basis.means[j] = mean;
    basis.sds[j] = std::sqrt(ss / static_cast<double>(n));
  }
  return basis;
}

// g(x) for one covariate row: intercept first, then standardized terms.
inline Vector evaluate_basis(const BalanceBasis& basis, std::span<const double> x) {
  if (x.size() != basis.input_cols)
    throw std::invalid_argument("evaluate_basis: row length " + std::to_string(x.size()) +
                                " does not match basis expectation " +
                                std::to_string(basis.input_cols));
  Vector g(basis.columns());
  g[0] = 1.0;
  for (std::size_t j = 0; j < basis.terms.size(); ++j)
    g[j + 1] = (detail::raw_term_value(basis.terms[j], x) - basis.means[j]) / basis.sds[j];
  return g;
}

// n x (L+1) matrix of basis rows; the workhorse input for losses and fitters.
inline Matrix basis_matrix(const BalanceBasis& basis, const Matrix& x) {
  Matrix g(x.rows(), basis.columns());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const Vector gi = evaluate_basis(basis, x.row(i));
    for (std::size_t j = 0; j < gi.size(); ++j) g(i, j) = gi[j];
  }
  return g;
}

}  // namespace cbipw
