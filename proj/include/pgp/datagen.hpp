#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "pgp/cache.hpp"
#include "pgp/posterior.hpp"

namespace pgp {

/// splitmix64 step; gives each consumer of a master seed its own stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

struct FeatureSpec {
  enum class Kind { Bernoulli, Normal };
  Kind kind = Kind::Normal;
  double p = 0.5;  // Bernoulli only

  static FeatureSpec bernoulli(double p) { return {Kind::Bernoulli, p}; }
  static FeatureSpec normal() { return {Kind::Normal, 0.0}; }
};

/// Bernoulli(0.5), Bernoulli(0.8), Bernoulli(0.2), Normal(0, 1).
std::vector<FeatureSpec> default_feature_spec();
/// eta = 1e-4, alpha = (0.1, 0.25, 0, 0.1, 0.5).
HyperParams reference_hyperparams();

struct CellGenConfig {
  int m_seen = 100;
  double unseen_fraction = 0.25;
  int n_slots = 20;
  int n_future = 30;  // held-out slots drawn for every content, seen or not
  std::vector<FeatureSpec> feature_spec = default_feature_spec();
  HyperParams true_hp = reference_hyperparams();
  double size_low = 0.0;
  double size_high = 100.0;
  std::uint64_t seed = 1;

  int unseen_count() const;
  void validate() const;
};

struct UserGenConfig {
  int m_seen = 200;
  double unseen_fraction = 0.25;
  int n_slots = 40;
  int n_future = 30;
  int users = 10;
  int p_user_features = 100;
  double dirichlet_omega = 1.0;
  double alpha0 = 2.5;
  double beta = 1.0;
  double eta = 1e-4;
  /// alpha_1..alpha_Q shared by all users.
  Vector content_alphas = (Vector(4) << 0.25, 0.0, 0.1, 0.5).finished();
  std::vector<FeatureSpec> feature_spec = default_feature_spec();
  double size_low = 0.0;
  double size_high = 100.0;
  std::uint64_t seed = 1;

  int unseen_count() const;
  void validate() const;
};

/// Seen contents occupy rows [0, seen_count), unseen ones follow.
struct SyntheticDataset {
  FeatureMatrix features;
  RequestMatrix requests;               // seen contents only
  std::optional<RequestMatrix> future;  // all contents, held-out slots
  /// Cell level: lambda_m. User level: log of the summed user rates.
  Vector true_lambdas;
  Vector true_popularities;
  Matrix user_lambdas;  // user level only: lambda_{m,u}, contents x users
  ContentCatalog catalog;

  Index contents() const noexcept { return features.contents(); }
  Index seen_count() const noexcept { return requests.contents(); }
  Index unseen_count() const noexcept { return contents() - seen_count(); }
  FeatureMatrix seen_features() const;
  FeatureMatrix unseen_features() const;
  /// Per-content held-out totals used for CHR; falls back to the true
  /// popularities when no held-out requests were stored.
  Vector future_totals() const;
};

Matrix draw_features(const std::vector<FeatureSpec>& spec, Index rows, std::mt19937_64& rng);

/// Normalized Gamma(omega, 1) draws, computed in log space so tiny omega
/// does not underflow to an all-zero vector.
Vector dirichlet_draw(Index dim, double omega, std::mt19937_64& rng);
Vector dirichlet_draw(Index dim, double omega, std::uint64_t seed);

/// f ~ N(0, K) over all contents, lambda ~ N(f, eta), requests
/// d_{m,n} ~ Poisson(e^{lambda_m}) drawn slot by slot, so a dataset with
/// fewer slots is a prefix of one with more.
SyntheticDataset gen_cell_level(const CellGenConfig& cfg);

/// Users p_u ~ Dirichlet(omega 1_P); joint kernel
/// alpha0 exp(-beta |p_u - p_u'|^2 - sum_q alpha_q (x_qm - x_qm')^2) over
/// (content, user) pairs; counts are per-user Poisson draws summed per slot;
/// popularity r_m = sum_u e^{lambda_{m,u}}.
SyntheticDataset gen_user_level(const UserGenConfig& cfg);

/// features.csv, requests.csv, truth.csv, catalog.csv.
void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& ds);
SyntheticDataset read_dataset(const std::filesystem::path& dir);

}  // namespace pgp
