#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "pgp/hmc.hpp"
#include "support.hpp"

namespace pgp::hmc {
namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

Potential gaussian() {
  return [](const Vector& z, Vector* g) {
    if (g) *g = z;
    return 0.5 * z.squaredNorm();
  };
}

HmcConfig config(double eps, int steps, int samples = 10, int burn = 0, std::uint64_t seed = 1) {
  HmcConfig c;
  c.step_size = eps;
  c.leapfrog_steps = steps;
  c.num_samples = samples;
  c.burn_in = burn;
  c.seed = seed;
  return c;
}

TEST(Hamiltonian, ZeroMomentum) {
  const Vector q = (Vector(3) << 1.0, -2.0, 0.5).finished();
  const double h = hamiltonian(q, Vector::Zero(3), config(0.1, 1), gaussian());
  EXPECT_NEAR(h, 0.5 * q.squaredNorm() + 1.5 * kLog2Pi, 1e-14);
}

TEST(Hamiltonian, KineticIsQuadratic) {
  const Vector q = Vector::Zero(2);
  const Vector p = (Vector(2) << 0.3, -1.2).finished();
  const auto cfg = config(0.1, 1);
  const double base = hamiltonian(q, Vector::Zero(2), cfg, gaussian());
  const double k1 = hamiltonian(q, p, cfg, gaussian()) - base;
  const double k2 = hamiltonian(q, Vector(2.0 * p), cfg, gaussian()) - base;
  EXPECT_NEAR(k2, 4.0 * k1, 1e-14);
}

TEST(Hamiltonian, TwoDimensionalUnitMomentum) {
  // psi = 0 at the origin: H = 1/2 * 2 log 2 pi + 1/2 * 2
  EXPECT_NEAR(hamiltonian(Vector::Zero(2), Vector::Ones(2), config(0.1, 1), gaussian()),
              1.0 + kLog2Pi, 1e-14);
}

TEST(Hamiltonian, DiagonalMass) {
  auto cfg = config(0.1, 1);
  cfg.mass = (Vector(2) << 2.0, 0.5).finished();
  const Vector p = (Vector(2) << 1.0, 1.0).finished();
  const double want = 0.5 * (2.0 * kLog2Pi + std::log(1.0)) + 0.5 * (1.0 / 2.0 + 1.0 / 0.5);
  EXPECT_NEAR(hamiltonian(Vector::Zero(2), p, cfg, gaussian()), want, 1e-14);
}

TEST(Leapfrog, TinyStepIsIdentity) {
  const Vector q = (Vector(2) << 0.7, -0.1).finished();
  const Vector p = (Vector(2) << -0.4, 1.3).finished();
  const auto [q1, p1] = leapfrog(q, p, config(1e-12, 5), gaussian());
  EXPECT_LE((q1 - q).norm(), 1e-10);
  EXPECT_LE((p1 - p).norm(), 1e-10);
}

TEST(Leapfrog, HarmonicOscillatorClosedForm) {
  // One step on psi = q^2/2 is the linear map
  //   [q'; p'] = [[1 - e^2/2, e], [-e + e^3/4, 1 - e^2/2]] [q; p].
  const double e = 0.1;
  Eigen::Matrix2d step;
  step << 1.0 - e * e / 2.0, e, -e + e * e * e / 4.0, 1.0 - e * e / 2.0;
  for (int steps : {1, 7, 40}) {
    Eigen::Vector2d want(1.0, 0.0);
    for (int i = 0; i < steps; ++i) want = step * want;
    const auto [q, p] = leapfrog(Vector::Ones(1), Vector::Zero(1), config(e, steps), gaussian());
    EXPECT_NEAR(q[0], want[0], 1e-13) << steps;
    EXPECT_NEAR(p[0], want[1], 1e-13) << steps;
    if (steps == 1) {
      EXPECT_NEAR(q[0], 0.995, 1e-15);
      EXPECT_NEAR(p[0], -0.09975, 1e-15);
    }
    // Energy error stays O(e^2).
    const double h0 = 0.5;
    const double h1 = 0.5 * (q[0] * q[0] + p[0] * p[0]);
    EXPECT_LT(std::abs(h1 - h0), e * e);
  }
}

TEST(Leapfrog, ReversibleOnModelPosterior) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix c(5, 3);
  c << 1, 0, 2, 3, 4, 2, 0, 0, 1, 5, 6, 4, 1, 1, 0;
  PoissonGpModel model(RequestMatrix(c), FeatureMatrix(testing::random_features(5, 2, rng)),
                       default_priors(2));
  const auto pot = model.potential();
  const auto cfg = config(0.01, 20);
  for (int t = 0; t < 100; ++t) {
    Vector q(model.dimension());
    Vector p(model.dimension());
    for (Index i = 0; i < q.size(); ++i) {
      q[i] = 0.3 * z(rng);
      p[i] = z(rng);
    }
    const auto [q1, p1] = leapfrog(q, p, cfg, pot);
    const auto [q2, p2] = leapfrog(q1, Vector(-p1), cfg, pot);
    EXPECT_LE((q2 - q).lpNorm<Eigen::Infinity>(), 1e-8);
    EXPECT_LE((p2 + p).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(Leapfrog, NonFiniteGradientDiverges) {
  Potential bad = [](const Vector& z, Vector* g) {
    if (g) *g = Vector::Constant(z.size(), std::numeric_limits<double>::quiet_NaN());
    return 0.0;
  };
  EXPECT_THROW(leapfrog(Vector::Zero(2), Vector::Ones(2), config(0.1, 3), bad),
               IntegratorDivergence);
}

TEST(Leapfrog, EnergyConservedAtSmallStep) {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto cfg = config(0.001, 10);
  int good = 0;
  for (int t = 0; t < 500; ++t) {
    const Vector q = (Vector(2) << z(rng), z(rng)).finished();
    const Vector p = (Vector(2) << z(rng), z(rng)).finished();
    const auto [q1, p1] = leapfrog(q, p, cfg, gaussian());
    const double dh = hamiltonian(q1, p1, cfg, gaussian()) - hamiltonian(q, p, cfg, gaussian());
    if (std::abs(dh) < 1e-4) ++good;
  }
  EXPECT_GE(good, 495);
}

TEST(Leapfrog, ReversedProposalHasOppositeEnergyChange) {
  // Symmetric kinetic energy plus reversibility: the reverse move sees -dH,
  // so forward and backward acceptance probabilities satisfy detailed balance.
  std::mt19937_64 rng(33);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto cfg = config(0.4, 6);
  for (int t = 0; t < 100; ++t) {
    const Vector q = (Vector(2) << z(rng), z(rng)).finished();
    const Vector p = (Vector(2) << z(rng), z(rng)).finished();
    const auto [q1, p1] = leapfrog(q, p, cfg, gaussian());
    const auto [q2, p2] = leapfrog(q1, Vector(-p1), cfg, gaussian());
    const double fwd = hamiltonian(q1, p1, cfg, gaussian()) - hamiltonian(q, p, cfg, gaussian());
    const double bwd = hamiltonian(q2, p2, cfg, gaussian()) - hamiltonian(q1, -p1, cfg, gaussian());
    EXPECT_NEAR(fwd, -bwd, 1e-10);
  }
}

TEST(Sample, GaussianMoments) {
  const auto s = sample(gaussian(), 2, config(0.1, 20, 5000, 500, 7), Vector::Zero(2));
  ASSERT_EQ(s.draws(), 5000);
  const Vector mean = s.lambda_draws.colwise().mean().transpose();
  const Matrix centred = s.lambda_draws.rowwise() - mean.transpose();
  const Matrix cov = centred.transpose() * centred / (s.draws() - 1.0);
  EXPECT_LE(mean.lpNorm<Eigen::Infinity>(), 0.05);
  EXPECT_LE((cov - Matrix::Identity(2, 2)).lpNorm<Eigen::Infinity>(), 0.1);
}

TEST(Sample, HugeStepRejectsAlmostEverything) {
  const auto s = sample(gaussian(), 2, config(10.0, 20, 300, 0, 3), Vector::Zero(2));
  EXPECT_LT(s.accept_rate, 0.02);
}

TEST(Sample, DeterministicGivenSeed) {
  const auto a = sample(gaussian(), 3, config(0.3, 5, 200, 50, 99), Vector::Zero(3));
  const auto b = sample(gaussian(), 3, config(0.3, 5, 200, 50, 99), Vector::Zero(3));
  EXPECT_EQ(a.lambda_draws, b.lambda_draws);
  EXPECT_EQ(a.energy_trace, b.energy_trace);
  const auto c = sample(gaussian(), 3, config(0.3, 5, 200, 50, 100), Vector::Zero(3));
  EXPECT_NE(a.lambda_draws, c.lambda_draws);
}

TEST(Sample, BurnInIsDiscarded) {
  for (int burn : {0, 1, 37}) {
    const auto s = sample(gaussian(), 2, config(0.5, 3, 123, burn), Vector::Zero(2));
    EXPECT_EQ(s.draws(), 123);
    EXPECT_EQ(s.energy_trace.size(), 123);
    EXPECT_EQ(s.accepted.size(), 123u);
    EXPECT_GE(s.accept_rate, 0.0);
    EXPECT_LE(s.accept_rate, 1.0);
  }
}

TEST(Sample, MomentumSignDoesNotMatter) {
  auto cfg = config(1.2, 3, 1000, 0, 5);
  const auto a = sample(gaussian(), 2, cfg, Vector::Zero(2));
  cfg.negate_momentum = true;
  const auto b = sample(gaussian(), 2, cfg, Vector::Zero(2));
  const double p = 0.5 * (a.accept_rate + b.accept_rate);
  const double se = std::sqrt(2.0 * p * (1.0 - p) / 1000.0);
  EXPECT_LE(std::abs(a.accept_rate - b.accept_rate), 3.0 * se);
}

TEST(Sample, CollapsedAcceptanceThrows) {
  // Finite only at the starting point, so every trajectory diverges.
  Potential spike = [](const Vector& z, Vector* g) {
    if (z.norm() > 1e-9) {
      if (g) *g = Vector::Constant(z.size(), std::numeric_limits<double>::infinity());
      return std::numeric_limits<double>::infinity();
    }
    if (g) *g = Vector::Ones(z.size());
    return 0.0;
  };
  try {
    sample(spike, 2, config(1.0, 2, 500, 0), Vector::Zero(2));
    FAIL() << "expected SamplerFailure";
  } catch (const SamplerFailure& e) {
    EXPECT_NE(std::string(e.what()).find("acceptance collapsed"), std::string::npos);
  }
}

TEST(Sample, ModelPosteriorRunsAndKeepsShapes) {
  Matrix c(3, 4);
  c << 1, 0, 2, 1, 3, 4, 2, 5, 0, 0, 1, 0;
  PoissonGpModel model(RequestMatrix(c), FeatureMatrix((Matrix(3, 1) << 0, 0.5, 2).finished()),
                       default_priors(1));
  const auto s = sample(model, config(0.05, 10, 200, 100), model.default_init());
  EXPECT_EQ(s.lambda_draws.cols(), 3);
  EXPECT_EQ(s.phi_draws.cols(), 3);
  EXPECT_GT(s.accept_rate, 0.3);
  EXPECT_TRUE(s.lambda_draws.allFinite());
}

TEST(MeanRates, Examples) {
  PosteriorSamples s;
  s.lambda_draws = (Matrix(1, 2) << 0.0, std::log(2.0)).finished();
  Vector r = posterior_mean_rates(s);
  EXPECT_NEAR(r[0], 1.0, 1e-15);
  EXPECT_NEAR(r[1], 2.0, 1e-15);

  s.lambda_draws = (Matrix(2, 1) << 0.0, std::log(3.0)).finished();
  EXPECT_NEAR(posterior_mean_rates(s)[0], 2.0, 1e-15);

  s.lambda_draws = Matrix::Constant(4, 2, 0.3);
  r = posterior_mean_rates(s);
  EXPECT_DOUBLE_EQ(r[0], std::exp(0.3));
  EXPECT_DOUBLE_EQ(r[1], std::exp(0.3));
}

TEST(DrawsCsv, HeaderLayout) {
  PosteriorSamples s;
  s.lambda_draws = Matrix::Zero(2, 2);
  s.phi_draws = Matrix::Zero(2, 3);
  s.energy_trace = Vector::Zero(2);
  s.accepted = {true, false};
  const auto dir = testing::scratch_dir("draws");
  write_draws_csv(dir / "draws.csv", s);
  std::ifstream in(dir / "draws.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "draw,lambda_1,lambda_2,phi_0,phi_1,phi_2,accepted,H");
}

}  // namespace
}  // namespace pgp::hmc
