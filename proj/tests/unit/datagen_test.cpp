#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "pgp/datagen.hpp"
#include "pgp/error.hpp"
#include "support.hpp"

namespace pgp {
namespace {

double correlation(const Vector& a, const Vector& b) {
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Seeds, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
  EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
}

TEST(Cell, VanishingKernelGivesUnitRate) {
  CellGenConfig g;
  g.m_seen = 3;
  g.n_slots = 10000;
  g.true_hp = HyperParams(1e-12, (Vector(5) << 1e-12, 0.25, 0, 0.1, 0.5).finished());
  const auto ds = gen_cell_level(g);
  EXPECT_LE(ds.true_lambdas.cwiseAbs().maxCoeff(), 1e-4);
  const double mean = ds.requests.counts().mean();
  EXPECT_GE(mean, 0.97);
  EXPECT_LE(mean, 1.03);
}

TEST(Cell, ConstantKernelMakesContentsExchangeable) {
  Vector l1(200);
  Vector l2(200);
  for (int r = 0; r < 200; ++r) {
    CellGenConfig g;
    g.m_seen = 4;
    g.n_slots = 1;
    g.seed = 500 + r;
    g.true_hp = HyperParams(1e-4, (Vector(5) << 0.1, 0, 0, 0, 0).finished());
    const auto ds = gen_cell_level(g);
    l1[r] = ds.true_lambdas[0];
    l2[r] = ds.true_lambdas[3];
  }
  EXPECT_GT(correlation(l1, l2), 0.99);
}

TEST(Cell, LatentMomentsMatchPrior) {
  const HyperParams hp = reference_hyperparams();
  const double var = hp.alphas[0] + hp.eta;
  const int reps = 200;
  for (Index m : {0, 7, 110}) {
    Vector draws(reps);
    for (int r = 0; r < reps; ++r) {
      CellGenConfig g;
      g.n_slots = 1;
      g.seed = 9000 + r;
      draws[r] = gen_cell_level(g).true_lambdas[m];
    }
    const double mean = draws.mean();
    const double sample_var = (draws.array() - mean).square().sum() / (reps - 1);
    EXPECT_LE(std::abs(mean), 3.0 * std::sqrt(var / reps)) << m;
    EXPECT_LE(std::abs(sample_var - var), 3.0 * var * std::sqrt(2.0 / (reps - 1))) << m;
  }
}

TEST(Cell, ShapesAndSplit) {
  CellGenConfig g;
  g.m_seen = 100;
  g.n_slots = 20;
  const auto ds = gen_cell_level(g);
  EXPECT_EQ(ds.contents(), 125);
  EXPECT_EQ(ds.seen_count(), 100);
  EXPECT_EQ(ds.requests.slots(), 20);
  EXPECT_EQ(ds.catalog.seen_count(), 100);
  EXPECT_EQ(ds.features.dims(), 4);
  ASSERT_TRUE(ds.future.has_value());
  EXPECT_EQ(ds.future->contents(), 125);
  for (Index m = 0; m < ds.contents(); ++m) {
    for (Index q = 0; q < 3; ++q) {
      const double v = ds.features.values()(m, q);
      EXPECT_TRUE(v == 0.0 || v == 1.0);
    }
    EXPECT_NEAR(ds.true_popularities[m], std::exp(ds.true_lambdas[m]), 1e-12);
    EXPECT_GT(ds.catalog.sizes[m], 0.0);
    EXPECT_LT(ds.catalog.sizes[m], 100.0);
  }
}

TEST(Cell, UnseenFeaturesFollowTheSameSpec) {
  // Bernoulli(0.8) column, pooled over seeds: unseen and seen rates agree.
  double seen_ones = 0.0;
  double unseen_ones = 0.0;
  double seen_n = 0.0;
  double unseen_n = 0.0;
  for (int r = 0; r < 40; ++r) {
    CellGenConfig g;
    g.n_slots = 1;
    g.seed = 70 + r;
    const auto ds = gen_cell_level(g);
    seen_ones += ds.seen_features().values().col(1).sum();
    unseen_ones += ds.unseen_features().values().col(1).sum();
    seen_n += ds.seen_count();
    unseen_n += ds.unseen_count();
  }
  EXPECT_NEAR(seen_ones / seen_n, 0.8, 0.03);
  EXPECT_NEAR(unseen_ones / unseen_n, 0.8, 0.03);
}

TEST(Cell, ReproducibleAndNested) {
  CellGenConfig g;
  g.m_seen = 30;
  g.n_slots = 80;
  g.seed = 7;
  const auto a = gen_cell_level(g);
  const auto b = gen_cell_level(g);
  EXPECT_EQ(a.requests.counts(), b.requests.counts());
  EXPECT_EQ(a.features.values(), b.features.values());
  EXPECT_EQ(a.catalog.sizes, b.catalog.sizes);
  g.n_slots = 20;
  const auto c = gen_cell_level(g);
  EXPECT_EQ(c.requests.counts(), a.requests.counts().leftCols(20));
  EXPECT_EQ(c.true_lambdas, a.true_lambdas);
  EXPECT_EQ(c.future->counts(), a.future->counts());
}

TEST(Cell, MleRecoversRatesWithManySlots) {
  CellGenConfig g;
  g.m_seen = 3;
  g.unseen_fraction = 0.0;
  g.n_slots = 100000;
  g.n_future = 0;
  const auto ds = gen_cell_level(g);
  const Vector mle = mle_popularity(ds.requests);
  for (Index m = 0; m < 3; ++m) {
    EXPECT_NEAR(mle[m], ds.true_popularities[m], 0.01 * ds.true_popularities[m]);
  }
  EXPECT_FALSE(ds.future.has_value());
  EXPECT_EQ(ds.future_totals(), ds.true_popularities);
}

TEST(Cell, Validation) {
  CellGenConfig g;
  g.m_seen = 1;
  EXPECT_THROW(gen_cell_level(g), InvalidInput);
  g = CellGenConfig{};
  g.unseen_fraction = -0.1;
  EXPECT_THROW(gen_cell_level(g), InvalidInput);
}

TEST(User, SingleUserHasCellLevelMoments) {
  const int reps = 200;
  Vector draws(reps);
  UserGenConfig base;
  const double var = base.alpha0 + base.eta;
  for (int r = 0; r < reps; ++r) {
    UserGenConfig g;
    g.users = 1;
    g.m_seen = 4;
    g.n_slots = 1;
    g.seed = 4000 + r;
    draws[r] = gen_user_level(g).true_lambdas[2];
  }
  const double mean = draws.mean();
  const double sample_var = (draws.array() - mean).square().sum() / (reps - 1);
  EXPECT_LE(std::abs(mean), 3.0 * std::sqrt(var / reps));
  EXPECT_LE(std::abs(sample_var - var), 3.0 * var * std::sqrt(2.0 / (reps - 1)));
}

TEST(User, ConcentratedDirichletCorrelatesUsers) {
  UserGenConfig g;
  g.m_seen = 60;
  g.n_slots = 1;
  g.dirichlet_omega = 1e4;
  const auto ds = gen_user_level(g);
  ASSERT_EQ(ds.user_lambdas.cols(), 10);
  for (Index u = 1; u < 10; ++u) {
    EXPECT_GT(correlation(ds.user_lambdas.col(0), ds.user_lambdas.col(u)), 0.99);
  }
}

TEST(User, CountsAddUpAcrossUsers) {
  UserGenConfig g;
  g.m_seen = 3;
  g.unseen_fraction = 0.0;
  g.n_slots = 10000;
  g.n_future = 0;
  g.users = 4;
  g.alpha0 = 0.5;
  const auto ds = gen_user_level(g);
  for (Index m = 0; m < 3; ++m) {
    const double rate = ds.user_lambdas.row(m).array().exp().sum();
    EXPECT_NEAR(ds.true_popularities[m], rate, 1e-12 * rate);
    const double mean = ds.requests.counts().row(m).mean();
    EXPECT_LE(std::abs(mean - rate), 3.0 * std::sqrt(rate / 10000.0)) << m;
  }
}

TEST(User, SizesInOpenInterval) {
  UserGenConfig g;
  const auto ds = gen_user_level(g);
  EXPECT_EQ(ds.contents(), 250);
  EXPECT_GT(ds.catalog.sizes.minCoeff(), 0.0);
  EXPECT_LT(ds.catalog.sizes.maxCoeff(), 100.0);
}

TEST(Dirichlet, OneDimension) {
  EXPECT_EQ(dirichlet_draw(1, 0.3, std::uint64_t{5}), Vector::Ones(1));
}

TEST(Dirichlet, SymmetricMean) {
  std::mt19937_64 rng(81);
  Vector mean = Vector::Zero(3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vector p = dirichlet_draw(3, 1.0, rng);
    ASSERT_NEAR(p.sum(), 1.0, 1e-12);
    ASSERT_GE(p.minCoeff(), 0.0);
    mean += p;
  }
  mean /= n;
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(mean[i], 1.0 / 3.0, 0.01);
}

TEST(Dirichlet, SparseConcentration) {
  std::mt19937_64 rng(82);
  double max_sum = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vector p = dirichlet_draw(100, 0.01, rng);
    ASSERT_NEAR(p.sum(), 1.0, 1e-12);
    max_sum += p.maxCoeff();
  }
  // E[max entry] = 0.6285 for Dir(0.01 * 1_100), from 10^6 numpy draws; sd 0.19 per draw.
  EXPECT_NEAR(max_sum / 1000.0, 0.6285, 0.02);
}

TEST(Dump, RoundTripAndByteIdentical) {
  CellGenConfig g;
  g.m_seen = 8;
  g.n_slots = 3;
  g.n_future = 2;
  const auto ds = gen_cell_level(g);
  const auto a = testing::scratch_dir("dump_a");
  const auto b = testing::scratch_dir("dump_b");
  write_dataset(a, ds);
  write_dataset(b, gen_cell_level(g));
  for (const char* name : {"features.csv", "requests.csv", "truth.csv", "catalog.csv"}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  EXPECT_EQ(slurp(a / "features.csv").rfind("content_id,seen,x_1,x_2,x_3,x_4\n", 0), 0u);
  EXPECT_EQ(slurp(a / "requests.csv").rfind("content_id,slot,count\n", 0), 0u);
  EXPECT_EQ(slurp(a / "truth.csv").rfind("content_id,lambda,popularity\n", 0), 0u);
  EXPECT_EQ(slurp(a / "catalog.csv").rfind("content_id,size\n", 0), 0u);

  const auto back = read_dataset(a);
  EXPECT_EQ(back.features.values(), ds.features.values());
  EXPECT_EQ(back.requests.counts(), ds.requests.counts());
  EXPECT_EQ(back.true_lambdas, ds.true_lambdas);
  EXPECT_EQ(back.true_popularities, ds.true_popularities);
  EXPECT_EQ(back.catalog.sizes, ds.catalog.sizes);
  EXPECT_EQ(back.catalog.seen, ds.catalog.seen);
}

TEST(Dump, MissingDirectoryIsIoError) {
  EXPECT_THROW(read_dataset("/nonexistent/pgp/dataset"), IoError);
}

}  // namespace
}  // namespace pgp
