#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbipw/gbayes.hpp"
#include "cbipw/losses.hpp"

namespace cbipw {

// Posterior covariance information criterion over stored per-draw,
// per-observation scores, and learning-rate selection by its minimum.
//
// The score of observation i under parameters (theta1, theta0, alpha) is the
// negative sum of the calibration and outcome loss contributions:
//
//   s_i = -[ per_i(l_A) + per_i(l_Y1) + per_i(l_Y0) ].
//
// With the future-observation loss nu taken equal to s,
//
//   PCIC = (1/n) sum_i mean_r s_ir
//          - (1/n) sum_i [ mean_r(s_ir^2) - (mean_r s_ir)^2 ],
//
// i.e. mean posterior score minus the mean per-observation posterior
// variance of the score. Averages over draws divide by R (population
// convention), so duplicating the draw set leaves PCIC unchanged, and R = 1
// makes the variance term exactly zero. Prior terms and the L1 penalty are
// not part of the score.
//
// Because s is a negative loss, pcic() lives on the utility scale, and the
// implied prediction risk of a learning rate is its negative: mean loss plus
// the posterior variance penalty. The selection table stores that risk
// orientation, so the selected row attains the minimum of the tabulated
// column with ties resolved toward the smaller learning rate. (Minimizing
// the utility-scaled value instead would always return the smallest grid
// value, since it is increasing in the learning rate.)

inline Vector per_obs_score(double theta1, double theta0, std::span<const double> alpha,
                            const Dataset& ds, const Matrix& g) {
  detail::check_dims(ds, g, alpha);
  Vector s(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double eta = clamp_eta(dot(alpha, g.row(i)));
    double per;
    if (ds.a[i] != 0) {
      const double d1 = ds.y[i] - theta1;
      per = std::exp(-eta) - eta + d1 * d1 / expit(eta);
    } else {
      const double d0 = ds.y[i] - theta0;
      per = eta + std::exp(eta) + d0 * d0 / (1.0 - expit(eta));
    }
    s[i] = -per;
  }
  return s;
}

inline Vector per_obs_score(double theta1, double theta0, std::span<const double> alpha,
                            const Dataset& ds, const BalanceBasis& basis) {
  return per_obs_score(theta1, theta0, alpha, ds, basis_matrix(basis, ds.x));
}

inline double pcic(const Matrix& scores) {
  const std::size_t n = scores.rows();
  const std::size_t draws = scores.cols();
  if (n == 0 || draws == 0) throw std::invalid_argument("pcic: empty score matrix");
  double mean_total = 0.0;
  double var_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0, m2 = 0.0;
    const auto row = scores.row(i);
    for (double v : row) {
      m += v;
      m2 += v * v;
    }
    m /= static_cast<double>(draws);
    m2 /= static_cast<double>(draws);
    mean_total += m;
    var_total += m2 - m * m;
  }
  return (mean_total - var_total) / static_cast<double>(n);
}

struct PcicRow {
  double omega = 0.0;
  double pcic = 0.0;  // risk scale: -pcic(scores); smaller is better
  bool selected = false;
};

struct PcicTable {
  std::vector<PcicRow> rows;

  const PcicRow& selected_row() const {
    for (const auto& r : rows)
      if (r.selected) return r;
    throw std::logic_error("pcic table: no selected row");
  }
};

struct OmegaSelection {
  double omega = 0.0;
  PcicTable table;
  PosteriorDraws draws;
  std::vector<std::string> warnings;
};

inline const std::vector<double>& default_omega_grid() {
  static const std::vector<double> grid{0.2, 0.5, 1.0, 1.5};
  return grid;
}

// Runs the two-stage sampler once per grid value, scores each run with PCIC
// and returns the risk-minimizing learning rate together with its draws. The
// grid is deduplicated and sorted; exact ties go to the smaller omega. A
// grid value whose sampler fails is skipped with a warning; if every value
// fails the error propagates.
inline OmegaSelection select_omega(const Dataset& ds, const Matrix& g, const Priors& priors,
                                   std::vector<double> grid, const McmcOptions& opts) {
  if (grid.empty()) throw std::invalid_argument("select_omega: empty grid");
  for (double w : grid)
    if (!(w > 0.0)) throw std::invalid_argument("select_omega: omega values must be positive");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  OmegaSelection sel;
  std::vector<PosteriorDraws> all;
  all.reserve(grid.size());
  McmcOptions run_opts = opts;
  run_opts.store_scores = true;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    run_opts.seed = substream_seed(opts.seed, k, 0x03c1u);
    try {
      PosteriorDraws d = run_two_stage(ds, g, grid[k], priors, run_opts);
      sel.table.rows.push_back({grid[k], -pcic(d.scores), false});
      all.push_back(std::move(d));
    } catch (const std::exception& ex) {
      sel.warnings.push_back("omega " + std::to_string(grid[k]) + " failed: " + ex.what());
    }
  }
  if (sel.table.rows.empty())
    throw std::runtime_error("select_omega: sampler failed for every grid value");

  std::size_t best = 0;  // minimum risk; ascending scan keeps ties on the smaller omega
  for (std::size_t k = 1; k < sel.table.rows.size(); ++k)
    if (sel.table.rows[k].pcic < sel.table.rows[best].pcic) best = k;
  sel.table.rows[best].selected = true;
  sel.omega = sel.table.rows[best].omega;
  sel.draws = std::move(all[best]);
  return sel;
}

inline OmegaSelection select_omega(const Dataset& ds, const BalanceBasis& basis,
                                   const Priors& priors, std::vector<double> grid,
                                   const McmcOptions& opts) {
  return select_omega(ds, basis_matrix(basis, ds.x), priors, std::move(grid), opts);
}

}  // namespace cbipw
