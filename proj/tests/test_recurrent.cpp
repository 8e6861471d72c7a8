#include <catch2/catch_amalgamated.hpp>

#include "rtl/rtl.hpp"

using namespace rtl;
using Catch::Matchers::ContainsSubstring;

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

Vector vectorize(const Matrix& Z) {
  Vector v(Z.size());
  for (Index i = 0; i < Z.cols(); ++i)
    v.segment(i * Z.rows(), Z.rows()) = Z.col(i);
  return v;
}

// transform with feedback block scaled to a given spectral radius
Matrix planted_transform(Rng& rng, Index k, Index d, double radius) {
  Matrix T(k, d + k);
  T.leftCols(d) = rng.normal_matrix(k, d) * 0.4;
  Matrix A = rng.normal_matrix(k, k);
  double rho = Eigen::EigenSolver<Matrix>(A, false)
                   .eigenvalues()
                   .cwiseAbs()
                   .maxCoeff();
  T.rightCols(k) = A * (radius / std::max(rho, 1e-12));
  return T;
}

// first-order autocorrelated columns: x_t = phi x_{t-1} + noise
Matrix ar1_matrix(Rng& rng, Index d, Index n, double phi) {
  Matrix X(d, n);
  Vector prev = rng.normal_vector(d);
  for (Index t = 0; t < n; ++t) {
    prev = phi * prev + rng.normal_vector(d);
    X.col(t) = prev;
  }
  return X;
}

bool trace_descends(const std::vector<double>& trace, double rel_slack) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i] > trace[i - 1] + rel_slack * std::abs(trace[i - 1]))
      return false;
  return true;
}

}  // namespace

TEST_CASE("system without feedback is the identity system",
          "[recurrent][system]") {
  Rng rng(1);
  const Index d = 3, k = 2, n = 5;
  Matrix Tm(k, d + k);
  Tm.leftCols(d) = rng.normal_matrix(k, d);
  Tm.rightCols(k).setZero();
  Matrix X = rng.normal_matrix(d, n);
  RecurrentSystem sys = build_recurrent_system({Tm}, X, Vector::Zero(k));
  CHECK(max_abs_diff(sys.dense(), Matrix::Identity(k * n, k * n)) == 0.0);
  CoefficientSequence Z = solve_coefficients(sys);
  CHECK(max_abs_diff(Z.matrix, sys.rhs) == 0.0);
  CHECK(max_abs_diff(Z.matrix, Tm.leftCols(d) * X) < 1e-14);
}

TEST_CASE("single-column system resolves one step", "[recurrent][system]") {
  Rng rng(2);
  const Index d = 4, k = 3;
  Matrix Tm = planted_transform(rng, k, d, 0.6);
  Matrix X = rng.normal_matrix(d, 1);
  Vector z0 = rng.normal_vector(k);
  RecurrentSystem sys = build_recurrent_system({Tm}, X, z0);
  CoefficientSequence Z = solve_coefficients(sys);
  Vector want = Tm.leftCols(d) * X.col(0) + Tm.rightCols(k) * z0;
  CHECK((Z.matrix.col(0) - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("solved coefficients satisfy the assembled system",
          "[recurrent][system]") {
  Rng rng(3);
  const Index d = 3, k = 2, n = 4;
  Matrix Tm = planted_transform(rng, k, d, 0.7);
  Matrix X = rng.normal_matrix(d, n);
  Vector z0 = rng.normal_vector(k);
  RecurrentSystem sys = build_recurrent_system({Tm}, X, z0);
  CoefficientSequence Z = solve_coefficients(sys);
  Vector resid = sys.dense() * vectorize(Z.matrix) - sys.dense_rhs();
  CHECK(resid.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("block solve matches the dense solve", "[recurrent][system]") {
  for (int seed = 0; seed < 6; ++seed) {
    Rng rng(10 + seed);
    const Index d = 2 + seed % 3, k = 2 + seed % 2, n = 3 + seed;
    Matrix Tm = planted_transform(rng, k, d, 0.8);
    Matrix X = rng.normal_matrix(d, n);
    Vector z0 = rng.normal_vector(k);
    RecurrentSystem sys = build_recurrent_system({Tm}, X, z0);
    CoefficientSequence Z = solve_coefficients(sys);
    Vector dense = sys.dense().partialPivLu().solve(sys.dense_rhs());
    CHECK((vectorize(Z.matrix) - dense).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("planted coefficients are recovered exactly",
          "[recurrent][system]") {
  Rng rng(20);
  const Index d = 4, k = 3, n = 12;
  Matrix Tm = planted_transform(rng, k, d, 0.5);
  Matrix X = rng.normal_matrix(d, n);
  Vector z0 = rng.normal_vector(k);
  // forward recursion oracle
  Matrix Zstar(k, n);
  Vector zp = z0;
  for (Index i = 0; i < n; ++i) {
    zp = Tm.leftCols(d) * X.col(i) + Tm.rightCols(k) * zp;
    Zstar.col(i) = zp;
  }
  CoefficientSequence Z =
      solve_coefficients(build_recurrent_system({Tm}, X, z0));
  CHECK(max_abs_diff(Z.matrix, Zstar) < 1e-10);
}

TEST_CASE("feedback grows on autocorrelated data", "[recurrent][fit]") {
  Rng rng(30);
  const Index d = 6, n = 60;
  Matrix X_iid = rng.normal_matrix(d, n);
  Matrix X_ar = ar1_matrix(rng, d, n, 0.9);
  RtlConfig cfg;
  cfg.k = 3;
  cfg.max_iters = 10;
  RtlModel m_iid = fit_rtl(X_iid, cfg);
  RtlModel m_ar = fit_rtl(X_ar, cfg);
  auto ratio = [d](const RtlModel& m) {
    return m.transform.t2(d).norm() / m.transform.t1(d).norm();
  };
  INFO("feedback-to-feedforward ratio: iid " << ratio(m_iid) << ", ar(1) "
                                             << ratio(m_ar));
  CHECK(ratio(m_ar) > ratio(m_iid));
}

TEST_CASE("fit at least matches a planted generator", "[recurrent][fit]") {
  Rng rng(40);
  const Index d = 5, k = 3, n = 40;
  Matrix Tstar = planted_transform(rng, k, d, 0.6);
  Tstar.leftCols(d) =
      Tstar.leftCols(d) * (1.0 / Tstar.leftCols(d).norm()) * std::sqrt(3.0);
  Matrix X = rng.normal_matrix(d, n);
  RtlConfig cfg;
  cfg.k = static_cast<int>(k);
  cfg.max_iters = 20;
  RtlModel model = fit_rtl(X, cfg);
  // the planted parameters with their induced coefficients are feasible, so
  // the fitted objective must not be worse
  Vector z0 = Vector::Zero(k);
  Matrix Zstar = detail::rtl_solve(Tstar, X, z0);
  Matrix M = detail::stack_inputs(X, detail::shifted(Zstar, z0));
  double f_star = detail::f_aug(Tstar, M, Zstar, cfg.lambda,
                                cfg.lambda * (1.0 + cfg.epsilon));
  REQUIRE(!model.objective_trace.empty());
  CHECK(model.objective_trace.back() <= f_star + 1e-10 * std::abs(f_star));
}

TEST_CASE("fit converges within budget on load-like data",
          "[recurrent][fit]") {
  SynthSpec spec;
  spec.seed = 2;
  SynthResult res = generate_synthetic(spec);
  DesignOptions opt;
  opt.window_days = 7;
  DesignMatrix dm = build_design_matrix(res.dataset, opt);
  auto [train, test] = split_half(dm);
  Normalization norm = fit_zscore(train.X, train.l);
  RtlConfig cfg;
  cfg.k = static_cast<int>(choose_k(train.d(), 0.6));
  RtlModel model = fit_rtl(norm.apply(train.X), cfg);
  CHECK(model.iterations <= 20);
  REQUIRE(model.objective_trace.size() >= 2);
  const auto& tr = model.objective_trace;
  double last_delta = std::abs(tr[tr.size() - 2] - tr.back());
  CHECK(last_delta <
        cfg.rel_tol * std::max(1.0, std::abs(tr[tr.size() - 2])));
}

TEST_CASE("fit rejects a single column", "[recurrent][fit][errors]") {
  Rng rng(50);
  Matrix X = rng.normal_matrix(4, 1);
  RtlConfig cfg;
  cfg.k = 2;
  CHECK_THROWS_MATCHES(fit_rtl(X, cfg), DataError,
                       Catch::Matchers::MessageMatches(
                           ContainsSubstring("at least 2 columns")));
}

TEST_CASE("re-feeding the training inputs reproduces the coefficients",
          "[recurrent][infer]") {
  Rng rng(60);
  Matrix X = rng.normal_matrix(5, 30);
  RtlConfig cfg;
  cfg.k = 3;
  cfg.max_iters = 8;
  RtlModel model = fit_rtl(X, cfg);
  CoefficientSequence Z = infer_coefficients(model, X);
  CHECK(max_abs_diff(Z.matrix, model.coefficients.matrix) == 0.0);
}

TEST_CASE("inference on a single column is one recursion step",
          "[recurrent][infer]") {
  Rng rng(70);
  Matrix X = rng.normal_matrix(4, 25);
  RtlConfig cfg;
  cfg.k = 2;
  cfg.max_iters = 5;
  RtlModel model = fit_rtl(X, cfg);
  Matrix x_new = rng.normal_matrix(4, 1);

  CoefficientSequence z_zero = infer_coefficients(model, x_new);
  Vector want_zero = model.transform.t1(4) * x_new.col(0);
  CHECK((z_zero.matrix.col(0) - want_zero).cwiseAbs().maxCoeff() < 1e-14);

  CoefficientSequence z_carry =
      infer_coefficients(model, x_new, Z0Policy::carry);
  Vector want_carry = model.transform.t1(4) * x_new.col(0) +
                      model.transform.t2(4) * model.z_final;
  CHECK((z_carry.matrix.col(0) - want_carry).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("inference matches the dense system solve", "[recurrent][infer]") {
  Rng rng(80);
  Matrix X = rng.normal_matrix(4, 20);
  RtlConfig cfg;
  cfg.k = 3;
  cfg.max_iters = 6;
  RtlModel model = fit_rtl(X, cfg);
  Matrix X_test = rng.normal_matrix(4, 7);
  CoefficientSequence Z = infer_coefficients(model, X_test);
  RecurrentSystem sys =
      build_recurrent_system(model.transform, X_test, model.z0);
  Vector dense = sys.dense().partialPivLu().solve(sys.dense_rhs());
  CHECK((vectorize(Z.matrix) - dense).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fitted coefficients satisfy the recurrence",
          "[recurrent][property]") {
  for (int seed = 0; seed < 6; ++seed) {
    Rng rng(100 + seed);
    Matrix X = ar1_matrix(rng, 4 + seed % 3, 30, 0.7);
    RtlConfig cfg;
    cfg.k = 2 + seed % 2;
    cfg.max_iters = 6;
    RtlModel m = fit_rtl(X, cfg);
    const Index d = m.input_dim, n = m.coefficients.n();
    Vector zp = m.z0;
    for (Index i = 0; i < n; ++i) {
      Vector want = m.transform.t1(d) * X.col(i) + m.transform.t2(d) * zp;
      REQUIRE((m.coefficients.matrix.col(i) - want).cwiseAbs().maxCoeff() <
              1e-10);
      zp = m.coefficients.matrix.col(i);
    }
    CHECK((m.z_final - m.coefficients.matrix.col(n - 1))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("fit traces never increase", "[recurrent][fit][property]") {
  for (int seed = 0; seed < 8; ++seed) {
    Rng rng(200 + seed);
    Matrix X = (seed % 2 == 0) ? rng.normal_matrix(5, 25)
                               : ar1_matrix(rng, 5, 25, 0.8);
    RtlConfig cfg;
    cfg.k = 2 + seed % 3;
    cfg.max_iters = 12;
    cfg.rel_tol = 1e-300;
    RtlModel m = fit_rtl(X, cfg);
    CHECK(trace_descends(m.objective_trace, 1e-8));
  }
}

TEST_CASE("one frozen-feedback alternation is plain transform learning",
          "[recurrent][fit]") {
  Rng rng(210);
  Matrix X = rng.normal_matrix(6, 30);
  RtlConfig rcfg;
  rcfg.k = 3;
  rcfg.max_iters = 1;
  RtlModel frozen = fit_rtl(X, rcfg, /*freeze_t2=*/true);
  TlConfig tcfg;
  tcfg.max_iters = 1;
  TlFit tl = fit_transform_learning(X, 3, tcfg);
  CHECK(max_abs_diff(Matrix(frozen.transform.t1(6)), tl.transform.matrix) <
        1e-12);
  CHECK(max_abs_diff(frozen.coefficients.matrix, tl.coefficients.matrix) <
        1e-12);
  CHECK(Matrix(frozen.transform.t2(6)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("temporal order matters on autocorrelated data",
          "[recurrent][property]") {
  Rng rng(220);
  const Index d = 5, n = 50;
  Matrix X = ar1_matrix(rng, d, n, 0.9);
  // deterministic interleave permutation destroys temporal adjacency
  Matrix Xp(d, n);
  Index at = 0;
  for (Index i = 0; i < n; i += 2) Xp.col(at++) = X.col(i);
  for (Index i = 1; i < n; i += 2) Xp.col(at++) = X.col(i);
  RtlConfig cfg;
  cfg.k = 3;
  cfg.max_iters = 8;
  RtlModel m = fit_rtl(X, cfg);
  RtlModel mp = fit_rtl(Xp, cfg);
  // same multiset of columns, different sequence: the learned feedback and
  // the achieved objective must differ
  CHECK(std::abs(m.objective_trace.back() - mp.objective_trace.back()) >
        1e-6);
  CHECK(max_abs_diff(Matrix(m.transform.t2(d)), Matrix(mp.transform.t2(d))) >
        1e-6);
}
