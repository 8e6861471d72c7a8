#pragma once

#include "rtl/features.hpp"
#include "rtl/supervised.hpp"

namespace rtl {

// Yesterday-equals-tomorrow: the forecast is the total load of the last
// window day. Operates on raw (unnormalized) design columns.
inline Vector persistence_forecast(const DesignMatrix& dm,
                                   const DesignOptions& opt) {
  require_dims(dm.d() == feature_dim(opt),
               "persistence_forecast: design dimension vs options disagree");
  const Index w = opt.window_days;
  Vector out(dm.n());
  if (opt.granularity == FeatureGranularity::hourly) {
    for (Index t = 0; t < dm.n(); ++t)
      out(t) = dm.X.col(t).segment(24 * (w - 1), 24).sum();
  } else {
    for (Index t = 0; t < dm.n(); ++t) out(t) = dm.X(w - 1, t);
  }
  return out;
}

// Ridge regression straight on the window features.
struct RidgeRawModel {
  Vector w;
  Normalization normalization;
  double alpha = 0.05;
};

inline RidgeRawModel fit_ridge_raw(const DesignMatrix& train,
                                   double alpha = 0.05) {
  if (!(alpha > 0)) throw ConfigError("ridge_raw: alpha must be > 0");
  if (train.n() < 1) throw DataError("ridge_raw: empty training set");
  RidgeRawModel model;
  model.alpha = alpha;
  model.normalization = fit_zscore(train.X, train.l);
  Matrix Xn = model.normalization.apply(train.X);
  Vector ln = model.normalization.apply_target(train.l);
  const Index d = Xn.rows(), n = Xn.cols();
  if (d <= n) {
    Matrix A = alpha * Matrix::Identity(d, d);
    A.noalias() += Xn * Xn.transpose();
    model.w = Eigen::LLT<Matrix>(A).solve(Matrix(Xn * ln));
  } else {
    // dual form: w = X (X^T X + alpha I)^{-1} l
    Matrix K = alpha * Matrix::Identity(n, n);
    K.noalias() += Xn.transpose() * Xn;
    model.w = Xn * Eigen::LLT<Matrix>(K).solve(ln);
  }
  return model;
}

inline Vector predict(const RidgeRawModel& model, const Matrix& X_raw) {
  Matrix Xn = model.normalization.apply(X_raw);
  return model.normalization.denorm_target(
      Vector(Xn.transpose() * model.w));
}

// Static transform learning for the coefficients, ridge regression on top.
struct TlRidgeModel {
  Transform transform;
  Vector w;
  Normalization normalization;
  double threshold = 0.5;  // coefficient soft-threshold, mu_sparsity / 2
};

inline TlRidgeModel fit_tl_ridge(const DesignMatrix& train, double k_fraction,
                                 TlConfig cfg = {}, double mu_ridge = 1.0,
                                 double gamma = 0.05) {
  if (!(k_fraction > 0.0) || k_fraction > 1.0)
    throw ConfigError("tl_ridge: k_fraction must be in (0,1]");
  TlRidgeModel model;
  model.normalization = fit_zscore(train.X, train.l);
  Matrix Xn = model.normalization.apply(train.X);
  Vector ln = model.normalization.apply_target(train.l);
  Index k = std::max<Index>(
      1, static_cast<Index>(k_fraction * static_cast<double>(Xn.rows())));
  TlFit fit = fit_transform_learning(Xn, k, cfg);
  model.transform = std::move(fit.transform);
  model.threshold = cfg.mu_sparsity / 2.0;
  model.w =
      update_regression_weights(fit.coefficients, ln, mu_ridge, gamma);
  return model;
}

inline Vector predict(const TlRidgeModel& model, const Matrix& X_raw) {
  Matrix Xn = model.normalization.apply(X_raw);
  CoefficientMatrix Z =
      soft_threshold_update(model.transform, Xn, model.threshold);
  return model.normalization.denorm_target(
      Vector(Z.matrix.transpose() * model.w));
}

}  // namespace rtl
