#pragma once

#include <utility>
#include <vector>

#include "rtl/normalization.hpp"
#include "rtl/recurrent.hpp"

namespace rtl {

struct R2tlConfig {
  int k = 0;
  double lambda = 0.1;
  double mu = 1.0;
  double gamma = 0.05;
  double epsilon = 1e-3;
  int max_iters = 20;
  double rel_tol = 1e-4;
};

inline void validate(const R2tlConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("k must be >= 1");
  if (!(cfg.lambda > 0)) throw ConfigError("lambda must be > 0");
  if (!(cfg.mu >= 0)) throw ConfigError("mu must be >= 0");
  if (!(cfg.gamma > 0)) throw ConfigError("gamma must be > 0");
  if (!(cfg.epsilon > 0)) throw ConfigError("epsilon must be > 0");
  if (cfg.max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!(cfg.rel_tol > 0)) throw ConfigError("rel_tol must be > 0");
}

struct R2tlModel {
  Transform transform;  // k × (d + k)
  Vector weights;       // w, length k
  Vector z0;
  Vector z_final;
  Index input_dim = 0;
  R2tlConfig config;
  Normalization normalization;
  Z0Policy z0_policy = Z0Policy::zero;
  std::vector<double> objective_trace;
  CoefficientSequence coefficients;
  int iterations = 0;
};

namespace detail {

// Solves (D^T D + mu W^T W) z = D^T rhs + mu W^T l, the normal equations of
// min_z ||rhs - D z||^2 + mu ||l - W z||^2, by block Thomas elimination. The
// coefficient matrix is block tridiagonal with constant interior diagonal
// blocks, so the Schur complements S_i converge geometrically; once
// consecutive S agree to machine precision the factor is reused for the
// remaining interior blocks. mu = 0 delegates to the exact forward recursion
// so the reduction to the unsupervised solve is bitwise.
inline Matrix solve_supervised_system(const Matrix& T, const Matrix& X,
                                      const Vector& z0, const Vector& w,
                                      const Vector& l, double mu) {
  if (mu == 0.0) return rtl_solve(T, X, z0);
  const Index d = X.rows(), n = X.cols(), k = T.rows();
  const Matrix T2 = T.rightCols(k);
  const Matrix T2t = T2.transpose();

  Matrix r = T.leftCols(d) * X;
  r.col(0) += T2 * z0;
  Matrix b = r;
  if (n > 1) b.leftCols(n - 1) -= T2t * r.rightCols(n - 1);
  b += mu * w * l.transpose();

  Matrix A_in = Matrix::Identity(k, k) + T2t * T2 + mu * w * w.transpose();
  Matrix A_last = Matrix::Identity(k, k) + mu * w * w.transpose();

  std::vector<Eigen::LLT<Matrix>> fac;
  std::vector<int> idx(n);
  fac.reserve(std::min<Index>(n, 64) + 1);
  Matrix S_prev;
  int frozen = -1;
  for (Index i = 0; i < n; ++i) {
    const bool last = (i == n - 1);
    if (!last && frozen >= 0) {
      idx[i] = frozen;
      continue;
    }
    Matrix S;
    if (i == 0) {
      S = last ? A_last : A_in;
    } else {
      Matrix Q = fac[idx[i - 1]].matrixL().solve(T2t);  // L^{-1} T2^T
      S = (last ? A_last : A_in) - Q.transpose() * Q;
    }
    fac.emplace_back(S);
    if (fac.back().info() != Eigen::Success)
      throw NumericalError(
          "supervised coefficient solve: Schur complement lost positive "
          "definiteness (non-finite input?)");
    idx[i] = static_cast<int>(fac.size()) - 1;
    if (!last) {
      if (i > 0 &&
          (S - S_prev).cwiseAbs().maxCoeff() <=
              1e-14 * S.cwiseAbs().maxCoeff())
        frozen = idx[i];
      S_prev = std::move(S);
    }
  }

  Matrix Y(k, n);
  Y.col(0) = fac[idx[0]].solve(b.col(0));
  for (Index i = 1; i < n; ++i)
    Y.col(i) = fac[idx[i]].solve(Matrix(b.col(i) + T2 * Y.col(i - 1)));
  Matrix Z(k, n);
  Z.col(n - 1) = Y.col(n - 1);
  for (Index i = n - 2; i >= 0; --i)
    Z.col(i) = Y.col(i) + fac[idx[i]].solve(Matrix(T2t * Z.col(i + 1)));
  return Z;
}

inline Vector ridge_weights(const Matrix& Z, const Vector& l, double mu,
                            double gamma) {
  const Index k = Z.rows();
  Matrix A = gamma * Matrix::Identity(k, k);
  A.noalias() += mu * (Z * Z.transpose());
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success)
    throw NumericalError("regression weight update: normal matrix not "
                         "positive definite");
  return llt.solve(Matrix(mu * (Z * l)));
}

// Trace objective of the joint fit: the shifted transform objective plus the
// supervised terms. Written as f_aug plus the extras so the mu = 0 value is
// bitwise the unsupervised one.
inline double r2tl_objective_aug(const Matrix& T, const Matrix& X,
                                 const Matrix& Z, const Vector& z0,
                                 const Vector& w, const Vector& l, double mu,
                                 double gamma, double lambda, double shift) {
  Matrix M = stack_inputs(X, shifted(Z, z0));
  double base = f_aug(T, M, Z, lambda, shift);
  double e2 = (l - Z.transpose() * w).squaredNorm();
  return base + (mu * e2 + gamma * w.squaredNorm());
}

}  // namespace detail

// Sum_i ||T [x_i; z_{i-1}] - z_i||^2 + mu (l_i - w^T z_i)^2, plus
// gamma ||w||^2 and the transform penalty.
inline double r2tl_objective(const Transform& T, const Matrix& X,
                             const CoefficientMatrix& Z, const Vector& z0,
                             const Vector& w, const Vector& l,
                             const R2tlConfig& cfg) {
  const Index d = X.rows(), n = X.cols(), k = Z.k();
  require_dims(T.m() == d + k,
               "r2tl_objective: transform columns vs input dimension + k "
               "disagree");
  require_dims(T.k() == k, "r2tl_objective: T rows vs Z rows disagree");
  require_dims(Z.n() == n, "r2tl_objective: Z columns vs X columns disagree");
  require_dims(w.size() == k, "r2tl_objective: w length vs k disagree");
  require_dims(l.size() == n, "r2tl_objective: l length vs X columns disagree");
  require_dims(z0.size() == k, "r2tl_objective: z0 length vs k disagree");
  double nh = detail::neg_half_logdet_tt(T.matrix);
  if (!std::isfinite(nh)) return kInf;
  Matrix M = detail::stack_inputs(X, detail::shifted(Z.matrix, z0));
  return (T.matrix * M - Z.matrix).squaredNorm() +
         cfg.mu * (l - Z.matrix.transpose() * w).squaredNorm() +
         cfg.gamma * w.squaredNorm() +
         cfg.lambda * (T.matrix.squaredNorm() + nh);
}

// argmin over the stacked z of ||rhs - Dz||^2 + mu ||l - Wz||^2.
inline CoefficientSequence solve_coefficients_supervised(
    const Transform& T, const Matrix& X, const Vector& z0, const Vector& w,
    const Vector& l, double mu) {
  const Index d = X.rows(), n = X.cols(), k = T.k();
  require_dims(T.m() == d + k,
               "solve_coefficients_supervised: transform columns vs input "
               "dimension + k disagree");
  require_dims(z0.size() == k,
               "solve_coefficients_supervised: z0 length vs k disagree");
  require_dims(w.size() == k,
               "solve_coefficients_supervised: w length vs k disagree");
  require_dims(l.size() == n,
               "solve_coefficients_supervised: l length vs X columns disagree");
  if (!(mu >= 0)) throw ConfigError("mu must be >= 0");
  require_finite(T.matrix, "T");
  require_finite(X, "X");
  return {detail::solve_supervised_system(T.matrix, X, z0, w, l, mu)};
}

// w = (mu Z Z^T + gamma I)^{-1} mu Z l.
inline Vector update_regression_weights(const CoefficientMatrix& Z,
                                        const Vector& l, double mu,
                                        double gamma) {
  require_dims(Z.n() == l.size(),
               "update_regression_weights: Z columns vs l length disagree");
  if (Z.n() < 1) throw DataError("update_regression_weights: empty input");
  if (!(mu >= 0)) throw ConfigError("mu must be >= 0");
  if (!(gamma > 0)) throw ConfigError("gamma must be > 0");
  return detail::ridge_weights(Z.matrix, l, mu, gamma);
}

// Ridge companion for the unsupervised recurrent model: fits regression
// weights on the final training coefficients.
inline Vector fit_rtl_ridge(const RtlModel& model, const Vector& targets,
                            double mu = 1.0, double gamma = 0.05) {
  return update_regression_weights(model.coefficients, targets, mu, gamma);
}

// Joint alternating fit. Initialization extends the recurrent fit with
// weights from the initial coefficients; each cycle updates the transform on
// the stacked inputs, re-solves the coefficients against the supervised
// system, and refreshes the weights, recording the shifted objective after
// the weight step.
inline R2tlModel fit_r2tl(const Matrix& X, const Vector& l,
                          const R2tlConfig& cfg) {
  validate(cfg);
  const Index d = X.rows(), n = X.cols();
  const Index k = cfg.k;
  if (n < 2)
    throw DataError("fit_r2tl: need at least 2 columns (no temporal "
                    "structure)");
  require_dims(l.size() == n, "fit_r2tl: l length vs X columns disagree");
  require_finite(X, "X");
  if (!l.allFinite()) throw DataError("targets contain non-finite entries");

  const double shift = cfg.lambda * (1.0 + cfg.epsilon);
  Matrix T(k, d + k);
  T.leftCols(d) = detail::svd_init_transform(X, k);
  T.rightCols(k).setZero();
  Vector z0 = Vector::Zero(k);
  Matrix Z = T.leftCols(d) * X;
  Vector w = detail::ridge_weights(Z, l, cfg.mu, cfg.gamma);

  std::vector<double> trace;
  double prev = 0.0;
  bool has_prev = false;
  int iters = 0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    ++iters;
    Matrix M = detail::stack_inputs(X, detail::shifted(Z, z0));
    T = detail::transform_update(M, Z, cfg.lambda, cfg.epsilon, &T,
                                 detail::kFitPolishIters,
                                 detail::kFitPolishTol);
    Z = detail::solve_supervised_system(T, X, z0, w, l, cfg.mu);
    w = detail::ridge_weights(Z, l, cfg.mu, cfg.gamma);
    double obj = detail::r2tl_objective_aug(T, X, Z, z0, w, l, cfg.mu,
                                            cfg.gamma, cfg.lambda, shift);
    trace.push_back(obj);
    if (has_prev &&
        std::abs(prev - obj) < cfg.rel_tol * std::max(1.0, std::abs(prev)))
      break;
    prev = obj;
    has_prev = true;
  }

  R2tlModel model;
  model.transform = {std::move(T)};
  model.weights = std::move(w);
  model.z0 = std::move(z0);
  model.z_final = Z.col(n - 1);
  model.input_dim = d;
  model.config = cfg;
  model.objective_trace = std::move(trace);
  model.coefficients = {std::move(Z)};
  model.iterations = iters;
  return model;
}

// One-step-ahead forecasts: normalize the raw inputs with the stored
// statistics, infer coefficients through the unsupervised system (test
// targets are never an input), apply the regression head, denormalize.
inline Vector predict(const R2tlModel& model, const Matrix& X_test) {
  require_dims(X_test.rows() == model.input_dim,
               "predict: test rows vs model input_dim disagree");
  require_finite(X_test, "X_test");
  Matrix Xn = model.normalization.apply(X_test);
  const Vector& seed =
      model.z0_policy == Z0Policy::carry ? model.z_final : model.z0;
  Matrix Z = detail::rtl_solve(model.transform.matrix, Xn, seed);
  Vector raw = Z.transpose() * model.weights;
  return model.normalization.denorm_target(raw);
}

}  // namespace rtl
