#pragma once

#include <functional>
#include <vector>

#include "rtl/features.hpp"

namespace rtl {

struct CvResult {
  double mean = 0;
  std::vector<double> fold_scores;
};

// Contiguous temporal folds: block i is validation once, all remaining
// columns train. Fold sizes differ by at most one, earlier folds larger.
inline CvResult kfold_cv(
    const DesignMatrix& dm, int folds,
    const std::function<double(const DesignMatrix&, const DesignMatrix&)>&
        fit_and_score) {
  if (folds < 2) throw ConfigError("kfold_cv: folds must be >= 2");
  const Index n = dm.n();
  if (n < folds)
    throw DataError("kfold_cv: need at least " + std::to_string(folds) +
                    " columns, have " + std::to_string(n));
  CvResult res;
  Index base = n / folds, extra = n % folds, start = 0;
  for (int f = 0; f < folds; ++f) {
    Index len = base + (f < extra ? 1 : 0);
    DesignMatrix val = take_columns(dm, start, len);
    std::vector<DesignMatrix> rest;
    if (start > 0) rest.push_back(take_columns(dm, 0, start));
    if (start + len < n)
      rest.push_back(take_columns(dm, start + len, n - start - len));
    DesignMatrix train = concat_designs(rest);
    res.fold_scores.push_back(fit_and_score(train, val));
    start += len;
  }
  double s = 0;
  for (double v : res.fold_scores) s += v;
  res.mean = s / static_cast<double>(folds);
  return res;
}

struct LcurvePoint {
  double value = 0;
  double residual = 0;
  double penalty = 0;
  double curvature = 0;  // zero at the grid ends
};

struct LcurveResult {
  double selected = 0;
  Index selected_index = 0;
  bool collinear_fallback = false;
  std::vector<LcurvePoint> points;
};

// Picks the grid point of maximum discrete Menger curvature of the
// (log residual, log penalty) curve over consecutive triples. Only interior
// points are candidates; a numerically collinear curve falls back to the
// mid-grid point with the warning flag set.
inline LcurveResult lcurve_tune(
    const std::vector<double>& grid,
    const std::function<std::pair<double, double>(double)>& evaluate) {
  if (grid.size() < 3) throw ConfigError("lcurve_tune: grid needs >= 3 points");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0))
      throw ConfigError("lcurve_tune: grid values must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw ConfigError("lcurve_tune: grid must be strictly increasing");
  }
  LcurveResult res;
  std::vector<double> lx, ly;
  for (double g : grid) {
    auto [r, p] = evaluate(g);
    LcurvePoint pt;
    pt.value = g;
    pt.residual = r;
    pt.penalty = p;
    res.points.push_back(pt);
    lx.push_back(std::log(std::max(r, 1e-300)));
    ly.push_back(std::log(std::max(p, 1e-300)));
  }
  const std::size_t m = grid.size();
  double best = 0;
  Index best_i = -1;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    double ax = lx[i] - lx[i - 1], ay = ly[i] - ly[i - 1];
    double bx = lx[i + 1] - lx[i], by = ly[i + 1] - ly[i];
    double cx = lx[i + 1] - lx[i - 1], cy = ly[i + 1] - ly[i - 1];
    double cross = ax * by - ay * bx;
    double den = std::sqrt((ax * ax + ay * ay) * (bx * bx + by * by) *
                           (cx * cx + cy * cy));
    double kappa = den > 0 ? 2.0 * std::abs(cross) / den : 0.0;
    res.points[i].curvature = kappa;
    if (kappa > best) {
      best = kappa;
      best_i = static_cast<Index>(i);
    }
  }
  if (best_i < 0 || best < 1e-12) {
    res.collinear_fallback = true;
    res.selected_index = static_cast<Index>(m / 2);
  } else {
    res.selected_index = best_i;
  }
  res.selected = grid[static_cast<std::size_t>(res.selected_index)];
  return res;
}

}  // namespace rtl
