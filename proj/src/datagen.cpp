#include "pgp/datagen.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "pgp/csv.hpp"
#include "pgp/error.hpp"

namespace pgp {
namespace {

enum Stream : std::uint64_t {
  kFeatures = 1,
  kLatent = 2,
  kRequests = 3,
  kFuture = 4,
  kSizes = 5,
  kUsers = 6,
};

void validate_spec(const std::vector<FeatureSpec>& spec) {
  if (spec.empty()) throw InvalidInput("feature spec needs at least one dimension");
  for (const auto& f : spec) {
    if (f.kind == FeatureSpec::Kind::Bernoulli && !(f.p >= 0.0 && f.p <= 1.0)) {
      throw InvalidInput("Bernoulli feature probability must lie in [0, 1]");
    }
  }
}

void validate_common(int m_seen, double unseen_fraction, int n_slots, int n_future,
                     double size_low, double size_high) {
  if (m_seen < 2) throw InvalidInput("need at least two seen contents");
  if (!(unseen_fraction >= 0.0) || !std::isfinite(unseen_fraction)) {
    throw InvalidInput("unseen fraction must be >= 0");
  }
  if (n_slots < 1) throw InvalidInput("need at least one training slot");
  if (n_future < 0) throw InvalidInput("held-out slot count must be >= 0");
  if (!(size_low >= 0.0) || !(size_high > size_low)) {
    throw InvalidInput("size range must satisfy 0 <= low < high");
  }
}

Matrix lower_factor(const Matrix& k) { return CovFactor::factor(k, 0.0, 0.0).chol(); }

Vector draw_normals(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Index i = 0; i < n; ++i) z[i] = normal(rng);
  return z;
}

double poisson(double rate, std::mt19937_64& rng) {
  std::poisson_distribution<long long> dist(rate);
  return static_cast<double>(dist(rng));
}

Vector draw_sizes(Index n, double low, double high, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(low, high);
  Vector s(n);
  for (Index i = 0; i < n; ++i) {
    double v = uniform(rng);
    while (!(v > low)) v = uniform(rng);
    s[i] = v;
  }
  return s;
}

ContentCatalog make_catalog(Vector sizes, Index seen) {
  std::vector<bool> mask(static_cast<std::size_t>(sizes.size()), false);
  for (Index m = 0; m < seen; ++m) mask[static_cast<std::size_t>(m)] = true;
  return ContentCatalog(std::move(sizes), std::move(mask));
}

template <typename Rate>
Matrix draw_counts(Index contents, int slots, Rate rate, std::mt19937_64& rng) {
  Matrix counts(contents, slots);
  for (int n = 0; n < slots; ++n) {
    for (Index m = 0; m < contents; ++m) counts(m, n) = rate(m, rng);
  }
  return counts;
}

int unseen_from(int m_seen, double fraction) {
  return static_cast<int>(std::lround(fraction * m_seen));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<FeatureSpec> default_feature_spec() {
  return {FeatureSpec::bernoulli(0.5), FeatureSpec::bernoulli(0.8),
          FeatureSpec::bernoulli(0.2), FeatureSpec::normal()};
}

HyperParams reference_hyperparams() {
  return HyperParams(1e-4, (Vector(5) << 0.1, 0.25, 0.0, 0.1, 0.5).finished());
}

int CellGenConfig::unseen_count() const { return unseen_from(m_seen, unseen_fraction); }

void CellGenConfig::validate() const {
  validate_common(m_seen, unseen_fraction, n_slots, n_future, size_low, size_high);
  validate_spec(feature_spec);
  true_hp.validate();
  if (true_hp.feature_dims() != static_cast<Index>(feature_spec.size())) {
    throw InvalidInput("true hyperparameters and feature spec disagree on Q");
  }
}

int UserGenConfig::unseen_count() const { return unseen_from(m_seen, unseen_fraction); }

void UserGenConfig::validate() const {
  validate_common(m_seen, unseen_fraction, n_slots, n_future, size_low, size_high);
  validate_spec(feature_spec);
  if (users < 1) throw InvalidInput("need at least one user");
  if (p_user_features < 1) throw InvalidInput("need at least one user feature");
  if (!(dirichlet_omega > 0.0)) throw InvalidInput("Dirichlet omega must be > 0");
  if (!(alpha0 > 0.0) || !(eta > 0.0) || beta < 0.0) {
    throw InvalidInput("alpha0 and eta must be > 0, beta >= 0");
  }
  if (content_alphas.size() != static_cast<Index>(feature_spec.size())) {
    throw InvalidInput("content alphas and feature spec disagree on Q");
  }
  if ((content_alphas.array() < 0.0).any()) throw InvalidInput("content alphas must be >= 0");
}

FeatureMatrix SyntheticDataset::seen_features() const {
  return FeatureMatrix(features.values().topRows(seen_count()));
}

FeatureMatrix SyntheticDataset::unseen_features() const {
  return FeatureMatrix(features.values().bottomRows(unseen_count()));
}

Vector SyntheticDataset::future_totals() const {
  return future ? future->totals() : true_popularities;
}

Matrix draw_features(const std::vector<FeatureSpec>& spec, Index rows, std::mt19937_64& rng) {
  validate_spec(spec);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Matrix x(rows, static_cast<Index>(spec.size()));
  for (Index m = 0; m < rows; ++m) {
    for (std::size_t q = 0; q < spec.size(); ++q) {
      const auto col = static_cast<Index>(q);
      if (spec[q].kind == FeatureSpec::Kind::Bernoulli) {
        x(m, col) = uniform(rng) < spec[q].p ? 1.0 : 0.0;
      } else {
        x(m, col) = normal(rng);
      }
    }
  }
  return x;
}

Vector dirichlet_draw(Index dim, double omega, std::mt19937_64& rng) {
  if (dim < 1) throw InvalidInput("Dirichlet dimension must be >= 1");
  if (!(omega > 0.0)) throw InvalidInput("Dirichlet omega must be > 0");
  // Gamma(w) = Gamma(w + 1) * U^{1/w}, kept as a logarithm.
  std::gamma_distribution<double> gamma(omega + 1.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vector logg(dim);
  for (Index i = 0; i < dim; ++i) {
    double u = uniform(rng);
    while (!(u > 0.0)) u = uniform(rng);
    logg[i] = std::log(gamma(rng)) + std::log(u) / omega;
  }
  const double top = logg.maxCoeff();
  Vector p = (logg.array() - top).exp();
  return p / p.sum();
}

Vector dirichlet_draw(Index dim, double omega, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return dirichlet_draw(dim, omega, rng);
}

SyntheticDataset gen_cell_level(const CellGenConfig& cfg) {
  cfg.validate();
  const Index seen = cfg.m_seen;
  const Index total = seen + cfg.unseen_count();

  std::mt19937_64 feat_rng(derive_seed(cfg.seed, kFeatures));
  std::mt19937_64 latent_rng(derive_seed(cfg.seed, kLatent));
  std::mt19937_64 req_rng(derive_seed(cfg.seed, kRequests));
  std::mt19937_64 fut_rng(derive_seed(cfg.seed, kFuture));
  std::mt19937_64 size_rng(derive_seed(cfg.seed, kSizes));

  FeatureMatrix features(draw_features(cfg.feature_spec, total, feat_rng));
  const Matrix l = lower_factor(kernel_matrix(features, cfg.true_hp));
  const Vector f = l * draw_normals(total, latent_rng);
  const Vector lambda = f + std::sqrt(cfg.true_hp.eta) * draw_normals(total, latent_rng);
  const Vector rate = lambda.array().exp();

  SyntheticDataset ds;
  ds.features = std::move(features);
  ds.requests = RequestMatrix(draw_counts(
      seen, cfg.n_slots, [&](Index m, std::mt19937_64& g) { return poisson(rate[m], g); },
      req_rng));
  if (cfg.n_future > 0) {
    ds.future = RequestMatrix(draw_counts(
        total, cfg.n_future, [&](Index m, std::mt19937_64& g) { return poisson(rate[m], g); },
        fut_rng));
  }
  ds.true_lambdas = lambda;
  ds.true_popularities = rate;
  ds.catalog = make_catalog(draw_sizes(total, cfg.size_low, cfg.size_high, size_rng), seen);
  return ds;
}

SyntheticDataset gen_user_level(const UserGenConfig& cfg) {
  cfg.validate();
  const Index seen = cfg.m_seen;
  const Index total = seen + cfg.unseen_count();
  const Index users = cfg.users;

  std::mt19937_64 feat_rng(derive_seed(cfg.seed, kFeatures));
  std::mt19937_64 user_rng(derive_seed(cfg.seed, kUsers));
  std::mt19937_64 latent_rng(derive_seed(cfg.seed, kLatent));
  std::mt19937_64 req_rng(derive_seed(cfg.seed, kRequests));
  std::mt19937_64 fut_rng(derive_seed(cfg.seed, kFuture));
  std::mt19937_64 size_rng(derive_seed(cfg.seed, kSizes));

  FeatureMatrix features(draw_features(cfg.feature_spec, total, feat_rng));
  Matrix profiles(users, cfg.p_user_features);
  for (Index u = 0; u < users; ++u) {
    profiles.row(u) = dirichlet_draw(cfg.p_user_features, cfg.dirichlet_omega, user_rng);
  }

  // The joint kernel over (content, user) pairs factorizes as
  // K_user (x) K_content, so its Cholesky factor is L_user (x) L_content.
  Vector alphas(cfg.content_alphas.size() + 1);
  alphas << cfg.alpha0, cfg.content_alphas;
  const Matrix k_content = kernel_matrix(features, HyperParams(cfg.eta, alphas));
  Matrix k_user(users, users);
  for (Index u = 0; u < users; ++u) {
    for (Index v = 0; v < users; ++v) {
      k_user(u, v) = std::exp(-cfg.beta * (profiles.row(u) - profiles.row(v)).squaredNorm());
    }
  }
  const Matrix lc = lower_factor(k_content);
  const Matrix lu = lower_factor(k_user);
  Matrix z(total, users);
  for (Index u = 0; u < users; ++u) z.col(u) = draw_normals(total, latent_rng);
  const Matrix f = lc * z * lu.transpose();
  Matrix lambda(total, users);
  for (Index u = 0; u < users; ++u) {
    lambda.col(u) = f.col(u) + std::sqrt(cfg.eta) * draw_normals(total, latent_rng);
  }
  const Matrix rate = lambda.array().exp();

  auto summed = [&](Index m, std::mt19937_64& g) {
    double c = 0.0;
    for (Index u = 0; u < users; ++u) c += poisson(rate(m, u), g);
    return c;
  };

  SyntheticDataset ds;
  ds.features = std::move(features);
  ds.requests = RequestMatrix(draw_counts(seen, cfg.n_slots, summed, req_rng));
  if (cfg.n_future > 0) ds.future = RequestMatrix(draw_counts(total, cfg.n_future, summed, fut_rng));
  ds.true_popularities = rate.rowwise().sum();
  ds.true_lambdas = ds.true_popularities.array().log();
  ds.user_lambdas = lambda;
  ds.catalog = make_catalog(draw_sizes(total, cfg.size_low, cfg.size_high, size_rng), seen);
  return ds;
}

void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    return out;
  };
  const Index total = ds.contents();
  {
    auto out = open("features.csv");
    out << "content_id,seen";
    for (Index q = 0; q < ds.features.dims(); ++q) out << ",x_" << (q + 1);
    out << '\n';
    for (Index m = 0; m < total; ++m) {
      out << (m + 1) << ',' << (m < ds.seen_count() ? 1 : 0);
      for (Index q = 0; q < ds.features.dims(); ++q) {
        out << ',' << csv::format(ds.features.values()(m, q));
      }
      out << '\n';
    }
  }
  {
    auto out = open("requests.csv");
    out << "content_id,slot,count\n";
    for (Index m = 0; m < ds.seen_count(); ++m) {
      for (Index n = 0; n < ds.requests.slots(); ++n) {
        out << (m + 1) << ',' << (n + 1) << ',' << csv::format(ds.requests(m, n)) << '\n';
      }
    }
  }
  {
    auto out = open("truth.csv");
    out << "content_id,lambda,popularity\n";
    for (Index m = 0; m < total; ++m) {
      out << (m + 1) << ',' << csv::format(ds.true_lambdas[m]) << ','
          << csv::format(ds.true_popularities[m]) << '\n';
    }
  }
  {
    auto out = open("catalog.csv");
    out << "content_id,size\n";
    for (Index m = 0; m < total; ++m) {
      out << (m + 1) << ',' << csv::format(ds.catalog.sizes[m]) << '\n';
    }
  }
}

SyntheticDataset read_dataset(const std::filesystem::path& dir) {
  const csv::Table feat = csv::read_table(dir / "features.csv");
  const csv::Table req = csv::read_table(dir / "requests.csv");
  const csv::Table truth = csv::read_table(dir / "truth.csv");
  const csv::Table cat = csv::read_table(dir / "catalog.csv");

  const auto total = static_cast<Index>(feat.rows.size());
  if (total < 1) throw IoError(dir.string() + ": no contents");
  const std::size_t seen_col = feat.column("seen");
  const Index q_dims = static_cast<Index>(feat.header.size()) - 2;
  Matrix x(total, q_dims);
  Index seen = 0;
  for (Index m = 0; m < total; ++m) {
    const auto& row = feat.rows[static_cast<std::size_t>(m)];
    if (csv::parse_int(row[0]) != m + 1) throw IoError("features.csv: content ids must be 1..M");
    const bool s = csv::parse_int(row[seen_col]) != 0;
    if (s && seen != m) throw IoError("features.csv: seen contents must come first");
    if (s) ++seen;
    for (Index q = 0; q < q_dims; ++q) {
      x(m, q) = csv::parse_double(row[static_cast<std::size_t>(q) + 2]);
    }
  }

  const std::size_t id_c = req.column("content_id");
  const std::size_t slot_c = req.column("slot");
  const std::size_t count_c = req.column("count");
  long long slots = 0;
  for (const auto& row : req.rows) slots = std::max(slots, csv::parse_int(row[slot_c]));
  if (slots < 1) throw IoError("requests.csv: no slots");
  Matrix counts = Matrix::Zero(seen, slots);
  for (const auto& row : req.rows) {
    const long long id = csv::parse_int(row[id_c]);
    const long long n = csv::parse_int(row[slot_c]);
    if (id < 1 || id > seen || n < 1) throw IoError("requests.csv: id or slot out of range");
    counts(id - 1, n - 1) += csv::parse_double(row[count_c]);
  }

  if (static_cast<Index>(truth.rows.size()) != total ||
      static_cast<Index>(cat.rows.size()) != total) {
    throw IoError(dir.string() + ": truth/catalog row counts differ from features");
  }
  SyntheticDataset ds;
  ds.true_lambdas.resize(total);
  ds.true_popularities.resize(total);
  Vector sizes(total);
  const std::size_t lam_c = truth.column("lambda");
  const std::size_t pop_c = truth.column("popularity");
  const std::size_t size_c = cat.column("size");
  for (Index m = 0; m < total; ++m) {
    const auto mm = static_cast<std::size_t>(m);
    ds.true_lambdas[m] = csv::parse_double(truth.rows[mm][lam_c]);
    ds.true_popularities[m] = csv::parse_double(truth.rows[mm][pop_c]);
    sizes[m] = csv::parse_double(cat.rows[mm][size_c]);
  }
  ds.features = FeatureMatrix(std::move(x));
  try {
    ds.requests = RequestMatrix(std::move(counts));
    ds.catalog = make_catalog(std::move(sizes), seen);
  } catch (const InvalidInput& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace pgp
