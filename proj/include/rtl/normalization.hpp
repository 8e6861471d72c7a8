#pragma once

#include "rtl/core.hpp"

namespace rtl {

// Column-wise feature standardization plus scalar target standardization.
// Default-constructed instances are the identity, so models fitted on
// pre-scaled data round-trip unchanged.
struct Normalization {
  Vector feature_mean;  // empty => identity on features
  Vector feature_std;
  double target_mean = 0.0;
  double target_std = 1.0;

  bool identity_features() const { return feature_mean.size() == 0; }

  Matrix apply(const Matrix& X) const {
    if (identity_features()) return X;
    require_dims(X.rows() == feature_mean.size(),
                 "normalization: X rows vs stored feature statistics "
                 "disagree");
    return (X.colwise() - feature_mean).array().colwise() /
           feature_std.array();
  }

  Vector apply_target(const Vector& l) const {
    return (l.array() - target_mean) / target_std;
  }

  double denorm_target(double v) const { return v * target_std + target_mean; }

  Vector denorm_target(const Vector& v) const {
    return (v.array() * target_std + target_mean).matrix();
  }
};

// Per-feature z-score statistics; near-constant rows keep unit scale so the
// transform stays invertible.
inline Normalization fit_zscore(const Matrix& X, const Vector& l) {
  Normalization norm;
  norm.feature_mean = X.rowwise().mean();
  Matrix centered = X.colwise() - norm.feature_mean;
  norm.feature_std =
      (centered.array().square().rowwise().mean()).sqrt().matrix();
  for (Index i = 0; i < norm.feature_std.size(); ++i)
    if (norm.feature_std(i) < 1e-12) norm.feature_std(i) = 1.0;
  norm.target_mean = l.mean();
  norm.target_std =
      std::sqrt((l.array() - norm.target_mean).square().mean());
  if (norm.target_std < 1e-12) norm.target_std = 1.0;
  return norm;
}

}  // namespace rtl
