#pragma once

#include "rtl/core.hpp"

namespace rtl {

struct MetricsReport {
  double mae = 0;   // kWh
  double rmse = 0;  // kWh
  double mape = 0;  // percent; NaN when undefined
  Index n = 0;
  Index mape_excluded = 0;  // |actual| <= epsilon guard
  bool mape_defined = true;
};

inline MetricsReport compute_metrics(const Vector& forecast,
                                     const Vector& actual,
                                     double epsilon_mape = 1e-6) {
  require_dims(forecast.size() == actual.size(),
               "compute_metrics: forecast length vs actual length disagree");
  const Index n = actual.size();
  if (n == 0) throw DataError("compute_metrics: empty vectors");
  MetricsReport rep;
  rep.n = n;
  Vector err = forecast - actual;
  rep.mae = err.cwiseAbs().mean();
  rep.rmse = std::sqrt(err.squaredNorm() / static_cast<double>(n));
  double pct = 0;
  Index used = 0;
  for (Index i = 0; i < n; ++i) {
    if (std::abs(actual(i)) > epsilon_mape) {
      pct += std::abs(err(i)) / std::abs(actual(i));
      ++used;
    }
  }
  rep.mape_excluded = n - used;
  if (used == 0) {
    rep.mape = kNaN;
    rep.mape_defined = false;
  } else {
    rep.mape = 100.0 * pct / static_cast<double>(used);
  }
  return rep;
}

}  // namespace rtl
