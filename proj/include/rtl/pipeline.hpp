#pragma once

#include <string>
#include <vector>

#include "rtl/baselines.hpp"
#include "rtl/metrics.hpp"
#include "rtl/tuning.hpp"

namespace rtl {

// Recurrent model with a ridge regression head, the unsupervised forecasting
// companion to the joint fit.
struct RtlForecaster {
  RtlModel core;
  Vector weights;
  Normalization normalization;
  Z0Policy z0_policy = Z0Policy::zero;
  DesignOptions features;
  double mu = 1.0;
  double gamma = 0.05;
};

struct R2tlForecaster {
  R2tlModel model;
  DesignOptions features;
};

inline Index choose_k(Index d, double k_fraction) {
  if (!(k_fraction > 0.0) || k_fraction > 1.0)
    throw ConfigError("k_fraction must be in (0,1]");
  return std::max<Index>(
      1, static_cast<Index>(k_fraction * static_cast<double>(d)));
}

inline RtlForecaster fit_rtl_forecaster(const DesignMatrix& train,
                                        RtlConfig cfg,
                                        const DesignOptions& features,
                                        double mu = 1.0, double gamma = 0.05,
                                        Z0Policy policy = Z0Policy::zero) {
  RtlForecaster fc;
  fc.features = features;
  fc.mu = mu;
  fc.gamma = gamma;
  fc.z0_policy = policy;
  fc.normalization = fit_zscore(train.X, train.l);
  Matrix Xn = fc.normalization.apply(train.X);
  Vector ln = fc.normalization.apply_target(train.l);
  fc.core = fit_rtl(Xn, cfg);
  fc.weights = fit_rtl_ridge(fc.core, ln, mu, gamma);
  return fc;
}

inline Vector predict(const RtlForecaster& fc, const Matrix& X_raw) {
  require_dims(X_raw.rows() == fc.core.input_dim,
               "predict: test rows vs model input_dim disagree");
  Matrix Xn = fc.normalization.apply(X_raw);
  CoefficientSequence Z = infer_coefficients(fc.core, Xn, fc.z0_policy);
  return fc.normalization.denorm_target(
      Vector(Z.matrix.transpose() * fc.weights));
}

inline R2tlForecaster fit_r2tl_forecaster(const DesignMatrix& train,
                                          R2tlConfig cfg,
                                          const DesignOptions& features,
                                          Z0Policy policy = Z0Policy::zero) {
  R2tlForecaster fc;
  fc.features = features;
  Normalization norm = fit_zscore(train.X, train.l);
  Matrix Xn = norm.apply(train.X);
  Vector ln = norm.apply_target(train.l);
  fc.model = fit_r2tl(Xn, ln, cfg);
  fc.model.normalization = norm;
  fc.model.z0_policy = policy;
  return fc;
}

inline Vector predict(const R2tlForecaster& fc, const Matrix& X_raw) {
  return predict(fc.model, X_raw);
}

// One evaluation row of the metrics table.
struct EvalRow {
  std::string model_kind;
  int window_days = 0;
  MetricsReport metrics;
  Vector forecast;  // test-period forecasts, for the overlay
};

struct EvalOptions {
  std::vector<std::string> models = {"r2tl", "rtl", "tl_ridge", "ridge_raw",
                                     "persistence"};
  double k_fraction = 0.5;
  double lambda = 0.1;
  double mu = 1.0;
  double gamma = 0.05;
  double epsilon = 1e-3;
  int max_iters = 20;
  double rel_tol = 1e-4;
  double ridge_alpha = 0.05;
  double tl_mu_sparsity = 1.0;
  Z0Policy z0_policy = Z0Policy::zero;
};

// Contiguous half split, fits on the first half only, scores on the second.
inline std::vector<EvalRow> evaluate_models(const DesignMatrix& dm,
                                            const DesignOptions& features,
                                            const EvalOptions& opt) {
  auto [train, test] = split_half(dm);
  std::vector<EvalRow> rows;
  for (const std::string& kind : opt.models) {
    EvalRow row;
    row.model_kind = kind;
    row.window_days = features.window_days;
    if (kind == "r2tl") {
      R2tlConfig cfg;
      cfg.k = static_cast<int>(choose_k(train.d(), opt.k_fraction));
      cfg.lambda = opt.lambda;
      cfg.mu = opt.mu;
      cfg.gamma = opt.gamma;
      cfg.epsilon = opt.epsilon;
      cfg.max_iters = opt.max_iters;
      cfg.rel_tol = opt.rel_tol;
      row.forecast = predict(
          fit_r2tl_forecaster(train, cfg, features, opt.z0_policy), test.X);
    } else if (kind == "rtl") {
      RtlConfig cfg;
      cfg.k = static_cast<int>(choose_k(train.d(), opt.k_fraction));
      cfg.lambda = opt.lambda;
      cfg.epsilon = opt.epsilon;
      cfg.max_iters = opt.max_iters;
      cfg.rel_tol = opt.rel_tol;
      row.forecast = predict(fit_rtl_forecaster(train, cfg, features, opt.mu,
                                                opt.gamma, opt.z0_policy),
                             test.X);
    } else if (kind == "tl_ridge") {
      TlConfig cfg;
      cfg.lambda = opt.lambda;
      cfg.mu_sparsity = opt.tl_mu_sparsity;
      cfg.epsilon = opt.epsilon;
      row.forecast = predict(
          fit_tl_ridge(train, opt.k_fraction, cfg, opt.mu, opt.gamma),
          test.X);
    } else if (kind == "ridge_raw") {
      row.forecast = predict(fit_ridge_raw(train, opt.ridge_alpha), test.X);
    } else if (kind == "persistence") {
      row.forecast = persistence_forecast(test, features);
    } else {
      throw ConfigError("evaluate: unknown model kind '" + kind + "'");
    }
    row.metrics = compute_metrics(row.forecast, test.l);
    rows.push_back(std::move(row));
  }
  return rows;
}

struct TuneReport {
  LcurveResult lambda_curve;
  LcurveResult gamma_curve;
  double lambda = 0;
  double gamma = 0;
};

// Greedy protocol: lambda first with the supervision terms switched off
// (unsupervised recurrent fit, prediction residual cross-validated over
// contiguous folds vs the transform penalty), then gamma at the selected
// lambda with mu fixed at 1 (regression residual vs ||w||^2).
inline TuneReport tune_hyperparameters(const DesignMatrix& train,
                                       const DesignOptions& features,
                                       const std::vector<double>& lambda_grid,
                                       const std::vector<double>& gamma_grid,
                                       double k_fraction, int folds = 5) {
  TuneReport rep;
  const int k = static_cast<int>(choose_k(train.d(), k_fraction));
  auto lambda_eval = [&](double lam) {
    CvResult cv = kfold_cv(
        train, folds, [&](const DesignMatrix& tr, const DesignMatrix& va) {
          RtlConfig cfg;
          cfg.k = static_cast<int>(choose_k(tr.d(), k_fraction));
          cfg.lambda = lam;
          RtlForecaster fc = fit_rtl_forecaster(tr, cfg, features, 1.0, 1e-8);
          Vector pred = predict(fc, va.X);
          return (pred - va.l).squaredNorm() / static_cast<double>(va.n());
        });
    RtlConfig cfg;
    cfg.k = k;
    cfg.lambda = lam;
    Normalization norm = fit_zscore(train.X, train.l);
    RtlModel model = fit_rtl(norm.apply(train.X), cfg);
    const Matrix& T = model.transform.matrix;
    double penalty = T.squaredNorm() + detail::neg_half_logdet_tt(T);
    return std::make_pair(cv.mean, std::abs(penalty));
  };
  rep.lambda_curve = lcurve_tune(lambda_grid, lambda_eval);
  rep.lambda = rep.lambda_curve.selected;

  Normalization norm = fit_zscore(train.X, train.l);
  Matrix Xn = norm.apply(train.X);
  Vector ln = norm.apply_target(train.l);
  auto gamma_eval = [&](double gam) {
    R2tlConfig cfg;
    cfg.k = k;
    cfg.lambda = rep.lambda;
    cfg.mu = 1.0;
    cfg.gamma = gam;
    R2tlModel model = fit_r2tl(Xn, ln, cfg);
    double resid =
        (ln - model.coefficients.matrix.transpose() * model.weights)
            .squaredNorm();
    return std::make_pair(resid, model.weights.squaredNorm());
  };
  rep.gamma_curve = lcurve_tune(gamma_grid, gamma_eval);
  rep.gamma = rep.gamma_curve.selected;
  return rep;
}

}  // namespace rtl
