#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/LU>

#include "pgp/error.hpp"
#include "pgp/kernel.hpp"
#include "support.hpp"

namespace pgp {
namespace {

HyperParams hp1(double a0, double a1, double eta = 1e-4) {
  return HyperParams(eta, (Vector(2) << a0, a1).finished());
}

HyperParams random_hp(Index q, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.5);
  Vector a(q + 1);
  for (Index i = 0; i <= q; ++i) a[i] = u(rng);
  return HyperParams(u(rng) * 0.5, a);
}

TEST(Sek, IdenticalInputsGiveVerticalScale) {
  Vector x(3);
  x << 0.3, -1.0, 2.0;
  HyperParams hp(1e-4, (Vector(4) << 0.1, 0.7, 0.2, 5.0).finished());
  EXPECT_DOUBLE_EQ(sek_entry(x, x, hp), 0.1);
}

TEST(Sek, ZeroScaleErasesFeature) {
  EXPECT_DOUBLE_EQ(sek_entry(Vector::Zero(1), Vector::Ones(1), hp1(1.0, 0.0)), 1.0);
}

TEST(Sek, ScalarCase) {
  const double got = sek_entry(Vector::Zero(1), Vector::Ones(1), hp1(2.0, 0.5));
  EXPECT_NEAR(got, 2.0 / std::sqrt(std::exp(1.0)), 1e-14);
  EXPECT_NEAR(got, 1.21306, 1e-5);
}

TEST(Sek, DimensionMismatchThrows) {
  EXPECT_THROW(sek_entry(Vector::Zero(2), Vector::Zero(1), hp1(1.0, 1.0)), InvalidInput);
}

TEST(Sek, SymmetricExactly) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const Matrix x = testing::random_features(2, 3, rng);
    const HyperParams hp = random_hp(3, rng);
    const Vector a = x.row(0).transpose();
    const Vector b = x.row(1).transpose();
    EXPECT_EQ(sek_entry(a, b, hp), sek_entry(b, a, hp));
  }
}

TEST(Sek, MonotoneInRelevance) {
  Vector a(2);
  Vector b(2);
  a << 0.0, 1.0;
  b << 1.0, 1.0;
  double previous = 1.0;
  for (double alpha : {0.0, 0.1, 0.5, 1.0, 3.0}) {
    HyperParams hp(0.1, (Vector(3) << 1.0, alpha, 0.4).finished());
    const double k = sek_entry(a, b, hp);
    if (alpha > 0.0) EXPECT_LT(k, previous);
    previous = k;
  }
}

TEST(BuildCov, OneByOne) {
  FeatureMatrix f(Matrix::Constant(1, 2, 0.5));
  HyperParams hp(0.2, (Vector(3) << 0.7, 1.0, 1.0).finished());
  const CovFactor cf = build_cov(f, hp, 0.05);
  EXPECT_NEAR(cf.ktilde()(0, 0), 0.95, 1e-15);
  EXPECT_NEAR(cf.logdet(), std::log(0.95), 1e-14);
}

TEST(BuildCov, TwoIdenticalRows) {
  FeatureMatrix f(Matrix::Ones(2, 1));
  const CovFactor cf = build_cov(f, hp1(1.0, 3.0, 0.1), 0.0);
  EXPECT_NEAR(cf.ktilde()(0, 0), 1.1, 1e-15);
  EXPECT_NEAR(cf.ktilde()(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(cf.ktilde()(1, 1), 1.1, 1e-15);
  // det = 1.1^2 - 1
  EXPECT_NEAR(cf.logdet(), std::log(1.1 * 1.1 - 1.0), 1e-12);
}

TEST(BuildCov, FactorReconstructs) {
  std::mt19937_64 rng(3);
  FeatureMatrix f(testing::random_features(3, 2, rng));
  const CovFactor cf = build_cov(f, random_hp(2, rng));
  const Matrix l = cf.chol();
  EXPECT_LE((l * l.transpose() - cf.ktilde()).norm(), 1e-8 * cf.ktilde().norm());
  EXPECT_NEAR(cf.logdet(), 2.0 * l.diagonal().array().log().sum(), 1e-12);
}

TEST(BuildCov, PositiveDefiniteOnRandomInstances) {
  std::mt19937_64 rng(5);
  for (int m : {1, 2, 7, 40, 150, 512}) {
    FeatureMatrix f(testing::random_features(m, 3, rng));
    HyperParams hp = random_hp(3, rng);
    hp.eta = 1e-6;
    EXPECT_NO_THROW({
      const CovFactor cf = build_cov(f, hp);
      EXPECT_TRUE(std::isfinite(cf.logdet()));
    }) << "M=" << m;
  }
}

TEST(BuildCov, DuplicateRowsUseJitterLadder) {
  // Zero eta and identical rows: rank one, so the ladder must kick in.
  FeatureMatrix f(Matrix::Zero(4, 1));
  const CovFactor cf = CovFactor::factor(kernel_matrix(f, hp1(1.0, 1.0)), 0.0, 0.0);
  EXPECT_GT(cf.jitter(), 0.0);
  EXPECT_LE(cf.jitter(), 1e-4 * 1.0 + 1e-18);
}

TEST(CovGrad, EtaIsScaledIdentity) {
  std::mt19937_64 rng(8);
  FeatureMatrix f(testing::random_features(4, 2, rng));
  HyperParams hp = random_hp(2, rng);
  hp.eta = 0.5;
  EXPECT_LE((cov_grad(f, hp, 0) - 0.5 * Matrix::Identity(4, 4)).norm(), 1e-15);
}

TEST(CovGrad, AlphaZeroIsKernel) {
  std::mt19937_64 rng(9);
  FeatureMatrix f(testing::random_features(5, 2, rng));
  const HyperParams hp = random_hp(2, rng);
  EXPECT_LE((cov_grad(f, hp, 1) - kernel_matrix(f, hp)).norm(), 1e-14);
}

TEST(CovGrad, MatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> msize(2, 10);
  for (int t = 0; t < 20; ++t) {
    const int m = msize(rng);
    FeatureMatrix f(testing::random_features(m, 3, rng));
    const HyperParams hp = random_hp(3, rng);
    const Vector phi = hp.to_log();
    for (Index which = 0; which < phi.size(); ++which) {
      const Matrix g = cov_grad(f, hp, which);
      EXPECT_LE((g - g.transpose()).norm(), 0.0);
      const double h = 1e-6;
      Vector up = phi;
      Vector dn = phi;
      up[which] += h;
      dn[which] -= h;
      const Matrix fd = (build_cov(f, HyperParams::from_log(up)).ktilde() -
                         build_cov(f, HyperParams::from_log(dn)).ktilde()) /
                        (2.0 * h);
      for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < m; ++j) {
          EXPECT_LE(std::abs(g(i, j) - fd(i, j)), 1e-5 * std::max(1e-3, std::abs(fd(i, j))))
              << "instance " << t << " parameter " << which;
        }
      }
    }
  }
}

TEST(CovGrad, BadIndexThrows) {
  FeatureMatrix f(Matrix::Zero(2, 1));
  EXPECT_THROW(cov_grad(f, hp1(1.0, 1.0), 3), InvalidInput);
  EXPECT_THROW(cov_grad(f, hp1(1.0, 1.0), -1), InvalidInput);
}

TEST(Solve, InverseIdentity) {
  std::mt19937_64 rng(12);
  FeatureMatrix f(testing::random_features(6, 2, rng));
  HyperParams hp = random_hp(2, rng);
  const CovFactor cf = build_cov(f, hp);
  const Vector v = testing::random_features(6, 1, rng).col(0);
  EXPECT_LE((cf.solve(Vector(cf.ktilde() * v)) - v).norm(), 1e-8);
}

TEST(Solve, ScalarCase) {
  const CovFactor cf = CovFactor::factor(Matrix::Constant(1, 1, 1.5), 0.5, 0.0);
  EXPECT_NEAR(cf.solve(Vector(Vector::Constant(1, 4.0)))[0], 2.0, 1e-15);
}

TEST(Solve, CramerTwoByTwo) {
  FeatureMatrix f(Matrix::Ones(2, 1));
  const CovFactor cf = build_cov(f, hp1(1.0, 3.0, 0.1), 0.0);
  // [[a, b], [b, a]] x = [1, 0]  ->  x = [a, -b] / (a^2 - b^2)
  const double a = 1.1;
  const double b = 1.0;
  const Vector x = cf.solve(Vector(Vector::Unit(2, 0)));
  EXPECT_NEAR(x[0], a / (a * a - b * b), 1e-10);
  EXPECT_NEAR(x[1], -b / (a * a - b * b), 1e-10);
}

TEST(Solve, DiagOfInverse) {
  std::mt19937_64 rng(13);
  FeatureMatrix f(testing::random_features(7, 3, rng));
  const CovFactor cf = build_cov(f, random_hp(3, rng));
  const Matrix inv = cf.ktilde().inverse();
  EXPECT_LE((cf.diag_of_inverse() - inv.diagonal()).norm(), 1e-8 * inv.norm());
}

TEST(HyperParams, Validation) {
  EXPECT_THROW(HyperParams(0.0, Vector::Ones(2)).validate(), InvalidInput);
  EXPECT_THROW(HyperParams(1.0, (Vector(2) << 0.0, 1.0).finished()).validate(), InvalidInput);
  EXPECT_THROW(HyperParams(1.0, (Vector(2) << 1.0, -1.0).finished()).validate(), InvalidInput);
  EXPECT_NO_THROW(HyperParams(1.0, (Vector(2) << 1.0, 0.0).finished()).validate());
}

TEST(FeatureMatrix, RejectsNonFinite) {
  Matrix x = Matrix::Zero(2, 2);
  x(1, 1) = std::nan("");
  EXPECT_THROW(FeatureMatrix{x}, InvalidInput);
  EXPECT_THROW(FeatureMatrix{Matrix(0, 2)}, InvalidInput);
}

}  // namespace
}  // namespace pgp
