#pragma once

#include <utility>
#include <vector>

#include "rtl/transform.hpp"

namespace rtl {

struct RtlConfig {
  int k = 0;  // representation size; must be set by the caller
  double lambda = 0.1;
  double epsilon = 1e-3;
  int max_iters = 20;
  double rel_tol = 1e-4;
};

inline void validate(const RtlConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("k must be >= 1");
  if (!(cfg.lambda > 0)) throw ConfigError("lambda must be > 0");
  if (!(cfg.epsilon > 0)) throw ConfigError("epsilon must be > 0");
  if (cfg.max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!(cfg.rel_tol > 0)) throw ConfigError("rel_tol must be > 0");
}

// The linear system D z = rhs encoding z_i - T2 z_{i-1} = T1 x_i. D is unit
// block lower-bidiagonal — identity blocks on the diagonal, -T2 on the first
// sub-diagonal — so it is stored implicitly as T2 plus the stacked
// right-hand side; dense() materializes it for small oracle checks.
struct RecurrentSystem {
  Matrix t2;   // k×k feedback block
  Matrix rhs;  // k×n, column i holds T1 x_i (column 0 adds T2 z0)
  Index k() const { return t2.rows(); }
  Index n() const { return rhs.cols(); }

  Matrix dense() const {
    const Index kk = k(), nn = n();
    Matrix D = Matrix::Identity(kk * nn, kk * nn);
    for (Index i = 1; i < nn; ++i)
      D.block(i * kk, (i - 1) * kk, kk, kk) = -t2;
    return D;
  }
  Vector dense_rhs() const {
    const Index kk = k(), nn = n();
    Vector b(kk * nn);
    for (Index i = 0; i < nn; ++i) b.segment(i * kk, kk) = rhs.col(i);
    return b;
  }
};

// Model learned by fit_rtl. z0 is the training seed (zero); z_final is the
// last training representation, available for carry-over inference on a
// contiguous test range.
struct RtlModel {
  Transform transform;  // k × (d + k)
  Vector z0;
  Vector z_final;
  Index input_dim = 0;
  RtlConfig config;
  std::vector<double> objective_trace;
  CoefficientSequence coefficients;  // final training coefficients
  int iterations = 0;
};

enum class Z0Policy { zero, carry };

inline RecurrentSystem build_recurrent_system(const Transform& T,
                                              const Matrix& X,
                                              const Vector& z0) {
  const Index d = X.rows(), n = X.cols(), k = T.k();
  require_dims(T.m() == d + k,
               "build_recurrent_system: transform columns vs input dimension "
               "+ k disagree");
  require_dims(z0.size() == k,
               "build_recurrent_system: z0 length vs k disagree");
  if (n < 1) throw DataError("build_recurrent_system: empty input");
  RecurrentSystem sys;
  sys.t2 = T.t2(d);
  sys.rhs = T.t1(d) * X;
  sys.rhs.col(0) += sys.t2 * z0;
  return sys;
}

// Exact solve of D z = rhs by block forward substitution: the diagonal blocks
// are identity, so z_i = rhs_i + T2 z_{i-1} directly.
inline CoefficientSequence solve_coefficients(const RecurrentSystem& sys) {
  require_finite(sys.t2, "recurrent system T2");
  require_finite(sys.rhs, "recurrent system rhs");
  const Index k = sys.k(), n = sys.n();
  Matrix Z(k, n);
  Vector zp = Vector::Zero(k);
  for (Index i = 0; i < n; ++i) {
    Vector zi = sys.rhs.col(i) + sys.t2 * zp;
    Z.col(i) = zi;
    zp = std::move(zi);
  }
  return {std::move(Z)};
}

namespace detail {

// Forward recursion z_i = T1 x_i + T2 z_{i-1} without assembling the system.
inline Matrix rtl_solve(const Matrix& T, const Matrix& X, const Vector& z0) {
  const Index d = X.rows(), n = X.cols();
  const Index k = T.rows();
  Matrix B = T.leftCols(d) * X;
  const auto T2 = T.rightCols(k);
  Matrix Z(k, n);
  Vector zp = z0;
  for (Index i = 0; i < n; ++i) {
    Vector zi = B.col(i) + T2 * zp;
    Z.col(i) = zi;
    zp = std::move(zi);
  }
  return Z;
}

// Columns shifted one step right with z0 in front: column i is z_{i-1}.
inline Matrix shifted(const Matrix& Z, const Vector& z0) {
  Matrix S(Z.rows(), Z.cols());
  S.col(0) = z0;
  if (Z.cols() > 1) S.rightCols(Z.cols() - 1) = Z.leftCols(Z.cols() - 1);
  return S;
}

inline Matrix stack_inputs(const Matrix& X, const Matrix& Zshift) {
  Matrix M(X.rows() + Zshift.rows(), X.cols());
  M.topRows(X.rows()) = X;
  M.bottomRows(Zshift.rows()) = Zshift;
  return M;
}

}  // namespace detail

// Alternating fit of the recurrent transform model. Initialization follows
// the static fit (T1 from the SVD of X, T2 = 0, z0 = 0, Z = T1 X); each
// iteration updates T on the stacked inputs [X; Z shifted] and then re-solves
// the coefficients exactly, recording the shifted objective after the solve.
// freeze_t2 keeps T2 pinned at zero and updates T1 on X alone, which makes a
// single alternation coincide with plain transform learning.
inline RtlModel fit_rtl(const Matrix& X, const RtlConfig& cfg,
                        bool freeze_t2 = false) {
  validate(cfg);
  const Index d = X.rows(), n = X.cols();
  const Index k = cfg.k;
  if (n < 2)
    throw DataError("fit_rtl: need at least 2 columns (no temporal structure)");
  if (d < 1) throw DataError("fit_rtl: empty input dimension");
  require_finite(X, "X");

  const double shift = cfg.lambda * (1.0 + cfg.epsilon);
  Matrix T(k, d + k);
  T.leftCols(d) = detail::svd_init_transform(X, k);
  T.rightCols(k).setZero();
  Vector z0 = Vector::Zero(k);
  Matrix Z = T.leftCols(d) * X;

  std::vector<double> trace;
  double prev = 0.0;
  bool has_prev = false;
  int iters = 0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    ++iters;
    if (freeze_t2) {
      Matrix T1 = T.leftCols(d);
      T.leftCols(d) =
          detail::transform_update(X, Z, cfg.lambda, cfg.epsilon, &T1,
                                   detail::kFitPolishIters,
                                   detail::kFitPolishTol);
      T.rightCols(k).setZero();
    } else {
      Matrix M = detail::stack_inputs(X, detail::shifted(Z, z0));
      T = detail::transform_update(M, Z, cfg.lambda, cfg.epsilon, &T,
                                   detail::kFitPolishIters,
                                   detail::kFitPolishTol);
    }
    Z = detail::rtl_solve(T, X, z0);
    Matrix M = detail::stack_inputs(X, detail::shifted(Z, z0));
    double obj = detail::f_aug(T, M, Z, cfg.lambda, shift);
    trace.push_back(obj);
    if (has_prev &&
        std::abs(prev - obj) < cfg.rel_tol * std::max(1.0, std::abs(prev)))
      break;
    prev = obj;
    has_prev = true;
  }

  RtlModel model;
  model.transform = {std::move(T)};
  model.z0 = std::move(z0);
  model.z_final = Z.col(n - 1);
  model.input_dim = d;
  model.config = cfg;
  model.objective_trace = std::move(trace);
  model.coefficients = {std::move(Z)};
  model.iterations = iters;
  return model;
}

// Test-time inference: the transform is held fixed and the recurrent system
// is solved over the test columns. The recursion seed defaults to zero,
// matching training; carry starts from the final training representation
// (for a test range contiguous with training).
inline CoefficientSequence infer_coefficients(const RtlModel& model,
                                              const Matrix& X_test,
                                              Z0Policy policy = Z0Policy::zero) {
  require_dims(X_test.rows() == model.input_dim,
               "infer_coefficients: test rows vs model input_dim disagree");
  require_finite(X_test, "X_test");
  const Vector& seed = policy == Z0Policy::carry ? model.z_final : model.z0;
  return {detail::rtl_solve(model.transform.matrix, X_test, seed)};
}

}  // namespace rtl
