#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pgp/cache.hpp"
#include "pgp/datagen.hpp"
#include "pgp/hmc.hpp"
#include "pgp/predict.hpp"
#include "pgp/vb.hpp"

namespace pgp::exp {

/// Flat `key = value` settings. '#' starts a comment. Later assignments and
/// command-line overrides replace earlier ones.
class Config {
 public:
  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text, const std::string& origin = "<config>");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::string> get_strings(const std::string& key,
                                       std::vector<std::string> fallback) const;

  /// ConfigError naming the first key outside `known`.
  void require_known(const std::set<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Worker count: `requested` (0 = hardware concurrency) capped by PGP_THREADS.
int worker_count(int requested = 0);

/// Runs job(i) for i in [0, n) on up to `threads` workers. The first
/// exception (lowest index) is rethrown after all workers stop.
void run_jobs(std::size_t n, int threads, const std::function<void(std::size_t)>& job);

enum class Method { VB, HMC, MLE, MleRand, Truth };

const char* method_name(Method m);
Method parse_method(const std::string& name);

struct InferenceSettings {
  hmc::HmcConfig hmc;
  int hmc_stride = 10;  // draw thinning for Type-2 conditioning
  vb::VbConfig vb;
  VbType2Variance vb_type2 = VbType2Variance::Marginalized;
  std::vector<GammaPrior> priors;  // empty = Gam(1, 0.1) on every parameter
};

/// Reads hmc.*, vb.* and prior keys.
InferenceSettings inference_settings(const Config& cfg);

struct FitOutput {
  Method method = Method::VB;
  Vector type1;  // predicted popularity of each seen content
  Vector type2;  // predicted popularity of each unseen content
  HyperParams theta;  // VB point estimate or HMC posterior mean
  std::optional<hmc::PosteriorSamples> samples;
  std::optional<vb::VariationalPosterior> variational;
};

/// Fits one method on the seen contents and predicts every content.
/// MLE predicts 0 for unseen contents; Truth passes `truth` through.
/// HMC throws SamplerFailure when no proposal was accepted at all.
FitOutput fit_method(Method method, const RequestMatrix& train, const FeatureMatrix& seen,
                     const std::optional<FeatureMatrix>& unseen,
                     const InferenceSettings& settings, std::uint64_t seed,
                     const Vector* truth = nullptr);

double rmse(const Vector& predicted, const Vector& truth);

struct RmseOptions {
  CellGenConfig generator;  // m_seen, unseen_fraction and truth; seed and n_slots ignored
  std::vector<int> n_grid{20, 80};
  int replications = 10;
  std::vector<Method> methods{Method::MLE, Method::VB, Method::HMC};
  InferenceSettings settings;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct RmseRow {
  Method method = Method::VB;
  int m = 0;
  int n = 0;
  int replication = 0;
  double rmse_type1 = 0.0;
  double rmse_type2 = 0.0;
};

struct ThetaRow {
  Method method = Method::VB;
  int m = 0;
  int n = 0;
  int replication = 0;
  HyperParams theta;
};

struct RmseResult {
  std::vector<RmseRow> rows;  // ordered by method, N, replication
  std::vector<ThetaRow> theta;
};

/// Replication r draws one dataset with max(n_grid) slots; each grid point
/// fits its first N slots, so the N values see nested data.
RmseResult run_rmse(const RmseOptions& options);

struct RmseSummary {
  Method method = Method::VB;
  int m = 0;
  int n = 0;
  int replications = 0;
  double mean_type1 = 0.0;
  double stderr_type1 = 0.0;
  double mean_type2 = 0.0;
  double stderr_type2 = 0.0;
};
std::vector<RmseSummary> summarize(const std::vector<RmseRow>& rows);

enum class Workload { Cell, User };

struct ChrOptions {
  Workload workload = Workload::User;
  CellGenConfig cell;
  UserGenConfig user;
  std::vector<double> capacity_grid{0.1, 0.2, 0.3, 0.4, 0.5};
  int replications = 10;
  std::vector<Method> policies{Method::VB, Method::HMC, Method::MLE, Method::MleRand};
  double seen_share = 0.8;
  InferenceSettings settings;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct ChrRow {
  Method policy = Method::VB;
  double capacity_fraction = 0.0;
  int replication = 0;
  double chr = 0.0;
};

/// Generates one workload per replication, fits every policy on its
/// training slots and scores each placement on the held-out slots.
std::vector<ChrRow> run_chr(const ChrOptions& options);
/// Same over fixed datasets (e.g. MovieLens windows); replication = position.
std::vector<ChrRow> run_chr(const std::vector<SyntheticDataset>& datasets,
                            const ChrOptions& options);

struct ChrSummary {
  Method policy = Method::VB;
  double capacity_fraction = 0.0;
  int replications = 0;
  double mean_chr = 0.0;
  double stderr_chr = 0.0;
};
std::vector<ChrSummary> summarize(const std::vector<ChrRow>& rows);

/// One row per (method, M, N, parameter), parameters in packed order.
struct TableRow {
  Method method = Method::VB;
  int m = 0;
  int n = 0;
  int replications = 0;
  std::string parameter;  // eta, alpha_0, ..., alpha_Q
  double mean_estimate = 0.0;
  double truth = 0.0;  // nan when unknown
};
std::vector<TableRow> make_table(const std::vector<ThetaRow>& rows,
                                 const std::optional<HyperParams>& truth);

// Long-format CSV files. Every writer has a matching reader.
void write_rmse_csv(const std::filesystem::path& path, const std::vector<RmseRow>& rows);
std::vector<RmseRow> read_rmse_csv(const std::filesystem::path& path);
void write_rmse_summary_csv(const std::filesystem::path& path,
                            const std::vector<RmseSummary>& rows);
void write_theta_csv(const std::filesystem::path& path, const std::vector<ThetaRow>& rows);
std::vector<ThetaRow> read_theta_csv(const std::filesystem::path& path);
void write_chr_csv(const std::filesystem::path& path, const std::vector<ChrRow>& rows);
std::vector<ChrRow> read_chr_csv(const std::filesystem::path& path);
void write_chr_summary_csv(const std::filesystem::path& path,
                           const std::vector<ChrSummary>& rows);
void write_table_csv(const std::filesystem::path& path, const std::vector<TableRow>& rows);

/// Whitespace-separated plot data plus a gnuplot script next to it.
void write_rmse_plots(const std::filesystem::path& dir, const std::vector<RmseSummary>& rows);
void write_chr_plots(const std::filesystem::path& dir, const std::vector<ChrSummary>& rows);

}  // namespace pgp::exp
