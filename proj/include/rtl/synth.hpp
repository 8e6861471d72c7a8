#pragma once

#include <Eigen/Eigenvalues>

#include "rtl/timeseries.hpp"

namespace rtl {

// Planted generator: a stable linear recurrence over a hidden daily state,
// modulating deterministic daily/weekly shapes, with coupled weather
// channels. Same spec (including seed) always reproduces the same series.
struct SynthSpec {
  int days = 120;
  int k_star = 3;       // hidden state order (at least 3 states used)
  double sigma = 0.05;  // multiplicative load noise, additive weather noise
  double daily_amp = 0.35;
  double weekly_amp = 0.18;
  double recur = 0.45;  // spectral radius of the planted recurrence
  double drive = 0.7;   // scale of the random daily input
  std::uint64_t seed = 0;
};

inline void validate(const SynthSpec& spec) {
  if (spec.days < 2) throw ConfigError("synth: days must be >= 2");
  if (spec.k_star < 1) throw ConfigError("synth: k_star must be >= 1");
  if (!(spec.sigma >= 0)) throw ConfigError("synth: sigma must be >= 0");
  if (!(spec.daily_amp >= 0) || !(spec.weekly_amp >= 0) ||
      !(spec.weekly_amp < 1))
    throw ConfigError("synth: seasonality amplitudes out of range");
  if (!(spec.recur > 0) || !(spec.recur < 1))
    throw ConfigError("synth: recur must be in (0,1)");
  if (!(spec.drive >= 0)) throw ConfigError("synth: drive must be >= 0");
}

struct SynthResult {
  TimeSeriesDataset dataset;
  // emitted generator parameters, enough to replay the series exactly when
  // sigma = 0: state recurrence, input map, and the realized daily inputs
  Matrix recurrence;  // q × q
  Matrix input_map;   // q × 2
  Matrix inputs;      // 2 × days, rows [annual driver; random drive]
};

// 2024-01-01T00:00:00Z, an exact day boundary.
constexpr std::int64_t kSynthStartEpoch = 1704067200;

inline SynthResult generate_synthetic(const SynthSpec& spec) {
  validate(spec);
  const int q = std::max(3, spec.k_star);
  Rng rng(spec.seed);
  Matrix A = rng.normal_matrix(q, q);
  double rho = Eigen::EigenSolver<Matrix>(A, false)
                   .eigenvalues()
                   .cwiseAbs()
                   .maxCoeff();
  A *= spec.recur / std::max(rho, 1e-12);
  Matrix T1s = rng.normal_matrix(q, 2) * 0.5;

  const Index hours = static_cast<Index>(spec.days) * 24;
  SynthResult out;
  out.recurrence = A;
  out.input_map = T1s;
  out.inputs.resize(2, spec.days);
  out.dataset.timestamps.resize(hours);
  out.dataset.load.resize(hours);
  out.dataset.temperature.resize(hours);
  out.dataset.humidity.resize(hours);
  out.dataset.meta.building_id = "synthetic";
  out.dataset.meta.interval_seconds = detail::kHour;

  const double two_pi = 2.0 * std::acos(-1.0);
  Vector z = Vector::Zero(q);
  for (int d = 0; d < spec.days; ++d) {
    double ann = std::sin(two_pi * (d % 365) / 365.0);
    Eigen::Vector2d u(ann, rng.normal() * spec.drive);
    out.inputs.col(d) = u;
    z = A * z + T1s * u;
    double wk = 1.0 - spec.weekly_amp * (d % 7 >= 5 ? 1.0 : 0.0);
    for (int h = 0; h < 24; ++h) {
      Index i = static_cast<Index>(d) * 24 + h;
      out.dataset.timestamps[i] = kSynthStartEpoch + i * detail::kHour;
      double base =
          1.0 + spec.daily_amp *
                    (std::exp(-0.5 * std::pow((h - 8.5) / 2.2, 2)) +
                     1.25 * std::exp(-0.5 * std::pow((h - 19.0) / 2.8, 2)));
      double g1 = std::sin(two_pi * h / 24.0);
      double g2 = std::exp(-0.5 * std::pow((h - 13.0) / 4.0, 2)) - 0.35;
      double mod = 1.0 + 0.20 * std::tanh(z(0)) * g1 +
                   0.18 * std::tanh(z(1)) * g2 + 0.16 * std::tanh(z(2));
      double load = 10.0 * base * wk * std::max(0.05, mod) *
                    (1.0 + spec.sigma * rng.normal());
      out.dataset.load(i) = std::max(0.0, load);
      double diurnal = 6.0 * std::sin(two_pi * (h - 14.0) / 24.0);
      out.dataset.temperature(i) = 18.0 + 8.0 * ann + diurnal + 1.5 * z(0) +
                                   0.5 * spec.sigma * rng.normal();
      double hum = 60.0 - 5.0 * ann - 0.7 * diurnal - 3.5 * z(2) -
                   1.0 * z(1) + 1.0 * spec.sigma * rng.normal();
      out.dataset.humidity(i) = std::min(100.0, std::max(5.0, hum));
    }
  }
  return out;
}

}  // namespace rtl
