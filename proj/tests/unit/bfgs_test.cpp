#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "pgp/bfgs.hpp"
#include "pgp/error.hpp"

namespace pgp {
namespace {

Objective quadratic(const Matrix& a) {
  return [a](const Vector& x, Vector* g) {
    if (g) *g = a * x;
    return 0.5 * x.dot(a * x);
  };
}

Matrix spd3() {
  Matrix b(3, 3);
  b << 2.0, 0.3, -0.5, 0.1, 1.5, 0.4, -0.2, 0.6, 3.0;
  return b * b.transpose() + 0.1 * Matrix::Identity(3, 3);
}

TEST(Bfgs, QuadraticConverges) {
  BfgsOptions opt;
  opt.grad_tol = 1e-12;
  opt.rel_tol = 0.0;
  opt.max_iterations = 30;
  const auto r = minimize_bfgs(quadratic(spd3()), (Vector(3) << 1.0, -2.0, 0.5).finished(), opt);
  EXPECT_LE(r.x.lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_LE(r.iterations, 30);
  EXPECT_TRUE(r.converged);
}

TEST(Bfgs, ZeroGradientLeavesPointAlone) {
  const Vector x0 = Vector::Zero(3);
  const auto r = minimize_bfgs(quadratic(spd3()), x0, BfgsOptions{});
  EXPECT_EQ(r.x, x0);
  EXPECT_EQ(r.iterations, 0);
  EXPECT_TRUE(r.converged);
}

TEST(Bfgs, HessianStaysPositiveDefinite) {
  auto rosen = [](const Vector& x, Vector* g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    if (g) {
      g->resize(2);
      (*g)[0] = -2.0 * a - 400.0 * x[0] * b;
      (*g)[1] = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
  };
  BfgsOptions opt;
  opt.max_iterations = 200;
  opt.grad_tol = 1e-8;
  opt.rel_tol = 0.0;
  int checks = 0;
  double last = std::numeric_limits<double>::infinity();
  const auto r = minimize_bfgs(rosen, (Vector(2) << -1.2, 1.0).finished(), opt,
                               [&](const BfgsResult& s) {
                                 Eigen::LLT<Matrix> llt(s.hessian);
                                 EXPECT_EQ(llt.info(), Eigen::Success);
                                 EXPECT_LE((s.hessian - s.hessian.transpose()).norm(), 1e-12);
                                 EXPECT_LE(s.value, last);
                                 last = s.value;
                                 ++checks;
                               });
  EXPECT_GT(checks, 5);
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x[1], 1.0, 1e-5);
}

TEST(Bfgs, NonFiniteTrialsStall) {
  const Vector x0 = (Vector(2) << 1.0, 1.0).finished();
  auto cliff = [x0](const Vector& x, Vector* g) {
    if ((x - x0).norm() > 0.0) throw NumericalFailure("off the cliff");
    if (g) *g = Vector::Ones(2);
    return 1.0;
  };
  BfgsOptions opt;
  opt.max_backtracks = 10;
  const auto r = minimize_bfgs(cliff, x0, opt);
  EXPECT_TRUE(r.stalled);
  EXPECT_EQ(r.x, x0);
  EXPECT_EQ(r.value, 1.0);
}

TEST(Bfgs, NonFiniteStartThrows) {
  auto bad = [](const Vector&, Vector* g) {
    if (g) *g = Vector::Zero(1);
    return std::numeric_limits<double>::quiet_NaN();
  };
  EXPECT_THROW(minimize_bfgs(bad, Vector::Zero(1), BfgsOptions{}), NumericalFailure);
}

TEST(Bfgs, RandomQuadraticsProperty) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> z(0.0, 1.0);
  BfgsOptions opt;
  opt.grad_tol = 1e-10;
  opt.rel_tol = 0.0;
  opt.max_iterations = 100;
  for (int t = 0; t < 20; ++t) {
    Matrix b(4, 4);
    for (int i = 0; i < 16; ++i) b.data()[i] = z(rng);
    const Matrix a = b * b.transpose() + 0.5 * Matrix::Identity(4, 4);
    Vector x0(4);
    for (int i = 0; i < 4; ++i) x0[i] = 3.0 * z(rng);
    const auto r = minimize_bfgs(quadratic(a), x0, opt);
    EXPECT_LE(r.x.norm(), 1e-6) << t;
  }
}

}  // namespace
}  // namespace pgp
