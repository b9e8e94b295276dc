#include "pgp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "pgp/csv.hpp"
#include "pgp/error.hpp"

namespace pgp::exp {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::pair<double, double> mean_stderr(const std::vector<double>& v) {
  if (v.empty()) return {kNaN, kNaN};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(v.size()))};
}

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

HyperParams packed_to_hyper(const Vector& packed) {
  return HyperParams(packed[0], packed.tail(packed.size() - 1));
}

}  // namespace

// ---------------------------------------------------------------- Config

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    cfg.set(key, trim(line.substr(eq + 1)));
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  try {
    return csv::parse_double(values_.at(key));
  } catch (const IoError&) {
    throw ConfigError(key + ": expected a number, got '" + values_.at(key) + "'");
  }
}

long long Config::get_int(const std::string& key, long long fallback) const {
  if (!has(key)) return fallback;
  try {
    return csv::parse_int(values_.at(key));
  } catch (const IoError&) {
    throw ConfigError(key + ": expected an integer, got '" + values_.at(key) + "'");
  }
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = values_.at(key);
  try {
    std::size_t used = 0;
    const unsigned long long s = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return s;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer seed, got '" + v + "'");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = values_.at(key);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        std::vector<double> fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(values_.at(key))) {
    try {
      out.push_back(csv::parse_double(item));
    } catch (const IoError&) {
      throw ConfigError(key + ": expected a list of numbers, got '" + values_.at(key) + "'");
    }
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key,
                                             std::vector<std::string> fallback) const {
  if (!has(key)) return fallback;
  auto out = split_list(values_.at(key));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

void Config::require_known(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (known.count(key) == 0) throw ConfigError("unknown config key '" + key + "'");
  }
}

// ---------------------------------------------------------------- workers

int worker_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(n, 1);
  if (const char* env = std::getenv("PGP_THREADS"); env != nullptr && *env != '\0') {
    long long cap = 0;
    try {
      cap = csv::parse_int(env);
    } catch (const IoError&) {
      throw ConfigError(std::string("PGP_THREADS must be a positive integer, got '") + env + "'");
    }
    if (cap < 1) throw ConfigError("PGP_THREADS must be >= 1");
    n = std::min<long long>(n, cap);
  }
  return n;
}

void run_jobs(std::size_t n, int threads, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(threads, 1));
  if (workers == 1 || n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------- methods

const char* method_name(Method m) {
  switch (m) {
    case Method::VB: return "vb";
    case Method::HMC: return "hmc";
    case Method::MLE: return "mle";
    case Method::MleRand: return "mle-rand";
    case Method::Truth: return "truth";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::VB, Method::HMC, Method::MLE, Method::MleRand, Method::Truth}) {
    if (name == method_name(m)) return m;
  }
  throw ConfigError("unknown method '" + name + "' (vb, hmc, mle, mle-rand, truth)");
}

InferenceSettings inference_settings(const Config& cfg) {
  InferenceSettings s;
  s.hmc.step_size = cfg.get_double("hmc.step_size", s.hmc.step_size);
  s.hmc.leapfrog_steps = static_cast<int>(cfg.get_int("hmc.leapfrog_steps", s.hmc.leapfrog_steps));
  s.hmc.num_samples = static_cast<int>(cfg.get_int("hmc.samples", s.hmc.num_samples));
  s.hmc.burn_in = static_cast<int>(cfg.get_int("hmc.burn_in", s.hmc.burn_in));
  s.hmc_stride = static_cast<int>(cfg.get_int("hmc.stride", s.hmc_stride));
  s.vb.outer_tol = cfg.get_double("vb.outer_tol", s.vb.outer_tol);
  s.vb.max_outer = static_cast<int>(cfg.get_int("vb.max_outer", s.vb.max_outer));
  s.vb.max_spca = static_cast<int>(cfg.get_int("vb.max_spca", s.vb.max_spca));
  s.vb.jitter = cfg.get_double("vb.jitter", s.vb.jitter);
  const std::string variant = cfg.get("vb.type2_variance", "marginalized");
  if (variant == "marginalized") {
    s.vb_type2 = VbType2Variance::Marginalized;
  } else if (variant == "printed") {
    s.vb_type2 = VbType2Variance::Printed;
  } else {
    throw ConfigError("vb.type2_variance must be 'marginalized' or 'printed'");
  }
  if (cfg.has("prior.shape") || cfg.has("prior.scale")) {
    s.priors.push_back({cfg.get_double("prior.shape", 1.0), cfg.get_double("prior.scale", 0.1)});
  }
  if (s.hmc_stride < 1) throw ConfigError("hmc.stride must be >= 1");
  try {
    s.vb.validate();
    for (const auto& p : s.priors) p.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return s;
}

FitOutput fit_method(Method method, const RequestMatrix& train, const FeatureMatrix& seen,
                     const std::optional<FeatureMatrix>& unseen,
                     const InferenceSettings& settings, std::uint64_t seed,
                     const Vector* truth) {
  if (train.contents() != seen.contents()) {
    throw InvalidInput("training requests and seen features disagree on M");
  }
  const Index n_unseen = unseen ? unseen->contents() : 0;
  FitOutput out;
  out.method = method;
  switch (method) {
    case Method::VB: {
      vb::VbConfig cfg = settings.vb;
      cfg.seed = seed;
      out.variational = vb::fit(train, seen, cfg);
      out.type1 = vb::vb_mean_rates(*out.variational);
      out.theta = out.variational->theta;
      out.type2 = unseen ? prediction_means(predict_unseen_vb(*out.variational, *unseen, seen,
                                                              settings.vb_type2, cfg.jitter))
                         : Vector();
      break;
    }
    case Method::HMC: {
      std::vector<GammaPrior> priors = default_priors(seen.dims());
      if (!settings.priors.empty()) std::fill(priors.begin(), priors.end(), settings.priors[0]);
      const PoissonGpModel model(train, seen, priors);
      hmc::HmcConfig cfg = settings.hmc;
      cfg.seed = seed;
      out.samples = hmc::sample(model, cfg, model.default_init());
      if (out.samples->accept_rate == 0.0) {
        std::ostringstream msg;
        msg << "acceptance collapsed: no retained proposal was accepted (step size "
            << cfg.step_size << ")";
        throw SamplerFailure(msg.str());
      }
      out.type1 = hmc::posterior_mean_rates(*out.samples);
      out.theta = packed_to_hyper(hmc::posterior_mean_theta(*out.samples));
      out.type2 = unseen ? prediction_means(predict_unseen_hmc(*out.samples, *unseen, seen,
                                                               settings.hmc_stride))
                         : Vector();
      break;
    }
    case Method::MLE:
      out.type1 = mle_popularity(train);
      out.type2 = Vector::Zero(n_unseen);
      break;
    case Method::Truth:
      if (truth == nullptr || truth->size() != seen.contents() + n_unseen) {
        throw InvalidInput("truth passthrough needs the true popularity of every content");
      }
      out.type1 = truth->head(seen.contents());
      out.type2 = truth->tail(n_unseen);
      break;
    case Method::MleRand:
      throw InvalidInput("mle-rand is a placement policy, not a predictor");
  }
  return out;
}

double rmse(const Vector& predicted, const Vector& truth) {
  if (predicted.size() != truth.size()) throw InvalidInput("rmse: length mismatch");
  if (predicted.size() == 0) return kNaN;
  return std::sqrt((predicted - truth).squaredNorm() / static_cast<double>(predicted.size()));
}

// ---------------------------------------------------------------- rmse

RmseResult run_rmse(const RmseOptions& options) {
  if (options.replications < 1) throw ConfigError("replications must be >= 1");
  if (options.n_grid.empty()) throw ConfigError("N grid is empty");
  for (int n : options.n_grid) {
    if (n < 1) throw ConfigError("N grid entries must be >= 1");
  }
  for (Method m : options.methods) {
    if (m == Method::MleRand) throw ConfigError("mle-rand has no RMSE; use it with chr");
  }
  const int n_max = *std::max_element(options.n_grid.begin(), options.n_grid.end());
  const std::size_t methods = options.methods.size();
  const std::size_t grid = options.n_grid.size();
  const auto reps = static_cast<std::size_t>(options.replications);
  const std::size_t jobs = methods * grid * reps;
  const std::uint64_t data_seeds = derive_seed(options.seed, 1);
  const std::uint64_t fit_seeds = derive_seed(options.seed, 2);

  std::vector<RmseRow> rows(jobs);
  std::vector<std::optional<ThetaRow>> theta(jobs);
  run_jobs(jobs, options.threads, [&](std::size_t job) {
    const std::size_t r = job % reps;
    const std::size_t gi = (job / reps) % grid;
    const std::size_t mi = job / (reps * grid);
    CellGenConfig gen = options.generator;
    gen.n_slots = n_max;
    gen.n_future = 0;
    gen.seed = derive_seed(data_seeds, r);
    const SyntheticDataset ds = gen_cell_level(gen);
    const int n = options.n_grid[gi];
    const RequestMatrix train = ds.requests.first_slots(n);
    std::optional<FeatureMatrix> unseen;
    if (ds.unseen_count() > 0) unseen = ds.unseen_features();
    const Method method = options.methods[mi];
    const FitOutput fit = fit_method(method, train, ds.seen_features(), unseen,
                                     options.settings, derive_seed(fit_seeds, job),
                                     &ds.true_popularities);
    RmseRow& row = rows[job];
    row.method = method;
    row.m = static_cast<int>(ds.seen_count());
    row.n = n;
    row.replication = static_cast<int>(r);
    row.rmse_type1 = rmse(fit.type1, ds.true_popularities.head(ds.seen_count()));
    row.rmse_type2 = rmse(fit.type2, ds.true_popularities.tail(ds.unseen_count()));
    if (method == Method::VB || method == Method::HMC) {
      theta[job] = ThetaRow{method, row.m, n, row.replication, fit.theta};
    }
  });
  RmseResult result;
  result.rows = std::move(rows);
  for (auto& t : theta) {
    if (t) result.theta.push_back(std::move(*t));
  }
  return result;
}

std::vector<RmseSummary> summarize(const std::vector<RmseRow>& rows) {
  std::vector<std::tuple<Method, int, int>> keys;
  std::map<std::tuple<Method, int, int>, std::pair<std::vector<double>, std::vector<double>>> acc;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.method, r.m, r.n);
    if (acc.count(key) == 0) keys.push_back(key);
    acc[key].first.push_back(r.rmse_type1);
    acc[key].second.push_back(r.rmse_type2);
  }
  std::vector<RmseSummary> out;
  for (const auto& key : keys) {
    const auto& [t1, t2] = acc.at(key);
    RmseSummary s;
    std::tie(s.method, s.m, s.n) = key;
    s.replications = static_cast<int>(t1.size());
    std::tie(s.mean_type1, s.stderr_type1) = mean_stderr(t1);
    std::tie(s.mean_type2, s.stderr_type2) = mean_stderr(t2);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------- chr

namespace {

std::vector<ChrRow> chr_over(std::size_t count,
                             const std::function<SyntheticDataset(std::size_t)>& dataset,
                             const ChrOptions& options) {
  if (options.capacity_grid.empty()) throw ConfigError("capacity grid is empty");
  for (double c : options.capacity_grid) {
    if (!(c >= 0.0 && c <= 1.0)) throw ConfigError("capacity fractions must lie in [0, 1]");
  }
  const std::size_t policies = options.policies.size();
  const std::size_t caps = options.capacity_grid.size();
  const std::size_t jobs = policies * count;
  const std::uint64_t fit_seeds = derive_seed(options.seed, 2);
  const std::uint64_t rand_seeds = derive_seed(options.seed, 3);

  std::vector<ChrRow> rows(jobs * caps);
  run_jobs(jobs, options.threads, [&](std::size_t job) {
    const std::size_t r = job % count;
    const std::size_t pi = job / count;
    const Method policy = options.policies[pi];
    const SyntheticDataset ds = dataset(r);
    const Vector future = ds.future_totals();
    const double total_size = ds.catalog.total_size();

    Vector popularity;
    if (policy != Method::MleRand) {
      std::optional<FeatureMatrix> unseen;
      if (ds.unseen_count() > 0) unseen = ds.unseen_features();
      const FitOutput fit = fit_method(policy, ds.requests, ds.seen_features(), unseen,
                                       options.settings, derive_seed(fit_seeds, job),
                                       &ds.true_popularities);
      popularity = concat(fit.type1, fit.type2);
    }
    for (std::size_t ci = 0; ci < caps; ++ci) {
      const double fraction = options.capacity_grid[ci];
      const double capacity = fraction * total_size;
      const CachePlan plan =
          policy == Method::MleRand
              ? mle_rand_place(ds.requests, ds.catalog, capacity,
                               derive_seed(rand_seeds, r * caps + ci), options.seen_share)
              : place(popularity, ds.catalog, capacity);
      ChrRow& row = rows[(pi * caps + ci) * count + r];
      row.policy = policy;
      row.capacity_fraction = fraction;
      row.replication = static_cast<int>(r);
      row.chr = evaluate_chr(plan, future);
    }
  });
  return rows;
}

}  // namespace

std::vector<ChrRow> run_chr(const ChrOptions& options) {
  if (options.replications < 1) throw ConfigError("replications must be >= 1");
  const std::uint64_t data_seeds = derive_seed(options.seed, 1);
  return chr_over(
      static_cast<std::size_t>(options.replications),
      [&](std::size_t r) {
        if (options.workload == Workload::User) {
          UserGenConfig gen = options.user;
          gen.seed = derive_seed(data_seeds, r);
          return gen_user_level(gen);
        }
        CellGenConfig gen = options.cell;
        gen.seed = derive_seed(data_seeds, r);
        return gen_cell_level(gen);
      },
      options);
}

std::vector<ChrRow> run_chr(const std::vector<SyntheticDataset>& datasets,
                            const ChrOptions& options) {
  if (datasets.empty()) throw ConfigError("no datasets to evaluate");
  return chr_over(datasets.size(), [&](std::size_t r) { return datasets[r]; }, options);
}

std::vector<ChrSummary> summarize(const std::vector<ChrRow>& rows) {
  std::vector<std::pair<Method, double>> keys;
  std::map<std::pair<Method, double>, std::vector<double>> acc;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.policy, r.capacity_fraction);
    if (acc.count(key) == 0) keys.push_back(key);
    acc[key].push_back(r.chr);
  }
  std::vector<ChrSummary> out;
  for (const auto& key : keys) {
    ChrSummary s;
    s.policy = key.first;
    s.capacity_fraction = key.second;
    s.replications = static_cast<int>(acc.at(key).size());
    std::tie(s.mean_chr, s.stderr_chr) = mean_stderr(acc.at(key));
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------- tables

std::vector<TableRow> make_table(const std::vector<ThetaRow>& rows,
                                 const std::optional<HyperParams>& truth) {
  std::vector<std::tuple<Method, int, int>> keys;
  std::map<std::tuple<Method, int, int>, std::vector<Vector>> acc;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.method, r.m, r.n);
    if (acc.count(key) == 0) keys.push_back(key);
    acc[key].push_back(r.theta.packed());
  }
  std::vector<TableRow> out;
  for (const auto& key : keys) {
    const auto& thetas = acc.at(key);
    const Index p = thetas.front().size();
    Vector mean = Vector::Zero(p);
    for (const auto& t : thetas) {
      if (t.size() != p) throw InvalidInput("theta rows of one group differ in length");
      mean += t;
    }
    mean /= static_cast<double>(thetas.size());
    const bool has_truth = truth && truth->packed_size() == p;
    const Vector truth_packed = has_truth ? truth->packed() : Vector();
    for (Index i = 0; i < p; ++i) {
      TableRow row;
      std::tie(row.method, row.m, row.n) = key;
      row.replications = static_cast<int>(thetas.size());
      row.parameter = i == 0 ? "eta" : "alpha_" + std::to_string(i - 1);
      row.mean_estimate = mean[i];
      row.truth = has_truth ? truth_packed[i] : kNaN;
      out.push_back(row);
    }
  }
  return out;
}

// ---------------------------------------------------------------- files

void write_rmse_csv(const std::filesystem::path& path, const std::vector<RmseRow>& rows) {
  auto out = open_out(path);
  out << "backend,M,N,replication,rmse_type1,rmse_type2\n";
  for (const auto& r : rows) {
    out << method_name(r.method) << ',' << r.m << ',' << r.n << ',' << r.replication << ','
        << csv::format(r.rmse_type1) << ',' << csv::format(r.rmse_type2) << '\n';
  }
  close_out(out, path);
}

std::vector<RmseRow> read_rmse_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path);
  const std::vector<std::string> want{"backend", "M", "N", "replication", "rmse_type1",
                                      "rmse_type2"};
  if (t.header != want) throw IoError(path.string() + ": unexpected rmse header");
  std::vector<RmseRow> rows;
  for (const auto& f : t.rows) {
    rows.push_back({parse_method(f[0]), static_cast<int>(csv::parse_int(f[1])),
                    static_cast<int>(csv::parse_int(f[2])),
                    static_cast<int>(csv::parse_int(f[3])), csv::parse_double(f[4]),
                    csv::parse_double(f[5])});
  }
  return rows;
}

void write_rmse_summary_csv(const std::filesystem::path& path,
                            const std::vector<RmseSummary>& rows) {
  auto out = open_out(path);
  out << "backend,M,N,replications,mean_rmse_type1,stderr_rmse_type1,mean_rmse_type2,"
         "stderr_rmse_type2\n";
  for (const auto& r : rows) {
    out << method_name(r.method) << ',' << r.m << ',' << r.n << ',' << r.replications << ','
        << csv::format(r.mean_type1) << ',' << csv::format(r.stderr_type1) << ','
        << csv::format(r.mean_type2) << ',' << csv::format(r.stderr_type2) << '\n';
  }
  close_out(out, path);
}

void write_theta_csv(const std::filesystem::path& path, const std::vector<ThetaRow>& rows) {
  auto out = open_out(path);
  const Index p = rows.empty() ? 0 : rows.front().theta.packed_size();
  out << "backend,M,N,replication,eta";
  for (Index i = 1; i < p; ++i) out << ",alpha_" << (i - 1);
  out << '\n';
  for (const auto& r : rows) {
    if (r.theta.packed_size() != p) throw InvalidInput("theta rows differ in length");
    out << method_name(r.method) << ',' << r.m << ',' << r.n << ',' << r.replication;
    const Vector packed = r.theta.packed();
    for (Index i = 0; i < p; ++i) out << ',' << csv::format(packed[i]);
    out << '\n';
  }
  close_out(out, path);
}

std::vector<ThetaRow> read_theta_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path);
  if (t.header.size() < 6 || t.header[0] != "backend" || t.header[4] != "eta") {
    throw IoError(path.string() + ": unexpected theta header");
  }
  const Index p = static_cast<Index>(t.header.size()) - 4;
  std::vector<ThetaRow> rows;
  for (const auto& f : t.rows) {
    Vector packed(p);
    for (Index i = 0; i < p; ++i) packed[i] = csv::parse_double(f[static_cast<std::size_t>(i) + 4]);
    rows.push_back({parse_method(f[0]), static_cast<int>(csv::parse_int(f[1])),
                    static_cast<int>(csv::parse_int(f[2])),
                    static_cast<int>(csv::parse_int(f[3])), packed_to_hyper(packed)});
  }
  return rows;
}

void write_chr_csv(const std::filesystem::path& path, const std::vector<ChrRow>& rows) {
  auto out = open_out(path);
  out << "policy,capacity_fraction,replication,chr\n";
  for (const auto& r : rows) {
    out << method_name(r.policy) << ',' << csv::format(r.capacity_fraction) << ','
        << r.replication << ',' << csv::format(r.chr) << '\n';
  }
  close_out(out, path);
}

std::vector<ChrRow> read_chr_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_table(path);
  const std::vector<std::string> want{"policy", "capacity_fraction", "replication", "chr"};
  if (t.header != want) throw IoError(path.string() + ": unexpected chr header");
  std::vector<ChrRow> rows;
  for (const auto& f : t.rows) {
    rows.push_back({parse_method(f[0]), csv::parse_double(f[1]),
                    static_cast<int>(csv::parse_int(f[2])), csv::parse_double(f[3])});
  }
  return rows;
}

void write_chr_summary_csv(const std::filesystem::path& path,
                           const std::vector<ChrSummary>& rows) {
  auto out = open_out(path);
  out << "policy,capacity_fraction,replications,mean_chr,stderr_chr\n";
  for (const auto& r : rows) {
    out << method_name(r.policy) << ',' << csv::format(r.capacity_fraction) << ','
        << r.replications << ',' << csv::format(r.mean_chr) << ',' << csv::format(r.stderr_chr)
        << '\n';
  }
  close_out(out, path);
}

void write_table_csv(const std::filesystem::path& path, const std::vector<TableRow>& rows) {
  auto out = open_out(path);
  out << "backend,M,N,replications,parameter,mean_estimate,truth\n";
  for (const auto& r : rows) {
    out << method_name(r.method) << ',' << r.m << ',' << r.n << ',' << r.replications << ','
        << r.parameter << ',' << csv::format(r.mean_estimate) << ',' << csv::format(r.truth)
        << '\n';
  }
  close_out(out, path);
}

void write_rmse_plots(const std::filesystem::path& dir, const std::vector<RmseSummary>& rows) {
  std::vector<Method> methods;
  std::vector<int> ns;
  std::map<std::pair<Method, int>, const RmseSummary*> by;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
    if (std::find(ns.begin(), ns.end(), r.n) == ns.end()) ns.push_back(r.n);
    by[{r.method, r.n}] = &r;
  }
  std::sort(ns.begin(), ns.end());
  for (int type : {1, 2}) {
    const auto dat = dir / ("rmse_type" + std::to_string(type) + ".dat");
    auto out = open_out(dat);
    out << "# N";
    for (Method m : methods) out << ' ' << method_name(m) << " " << method_name(m) << "_se";
    out << '\n';
    for (int n : ns) {
      out << n;
      for (Method m : methods) {
        const auto it = by.find({m, n});
        if (it == by.end()) {
          out << " nan nan";
        } else if (type == 1) {
          out << ' ' << csv::format(it->second->mean_type1) << ' '
              << csv::format(it->second->stderr_type1);
        } else {
          out << ' ' << csv::format(it->second->mean_type2) << ' '
              << csv::format(it->second->stderr_type2);
        }
      }
      out << '\n';
    }
    close_out(out, dat);
  }
  const auto gp = dir / "rmse.gp";
  auto out = open_out(gp);
  out << "set terminal pngcairo size 900,600\nset datafile missing 'nan'\n"
         "set xlabel 'N (training slots)'\nset ylabel 'RMSE'\nset key top right\n";
  for (int type : {1, 2}) {
    out << "set output 'rmse_type" << type << ".png'\nset title 'Type-" << type
        << " prediction RMSE'\nplot ";
    for (std::size_t i = 0; i < methods.size(); ++i) {
      if (i > 0) out << ", \\\n     ";
      out << "'rmse_type" << type << ".dat' using 1:" << (2 + 2 * i) << ':' << (3 + 2 * i)
          << " with yerrorlines title '" << method_name(methods[i]) << "'";
    }
    out << '\n';
  }
  close_out(out, gp);
}

void write_chr_plots(const std::filesystem::path& dir, const std::vector<ChrSummary>& rows) {
  std::vector<Method> policies;
  std::vector<double> caps;
  std::map<std::pair<Method, double>, const ChrSummary*> by;
  for (const auto& r : rows) {
    if (std::find(policies.begin(), policies.end(), r.policy) == policies.end()) {
      policies.push_back(r.policy);
    }
    if (std::find(caps.begin(), caps.end(), r.capacity_fraction) == caps.end()) {
      caps.push_back(r.capacity_fraction);
    }
    by[{r.policy, r.capacity_fraction}] = &r;
  }
  std::sort(caps.begin(), caps.end());
  const auto dat = dir / "chr.dat";
  auto out = open_out(dat);
  out << "# capacity_fraction";
  for (Method p : policies) out << ' ' << method_name(p) << ' ' << method_name(p) << "_se";
  out << '\n';
  for (double c : caps) {
    out << csv::format(c);
    for (Method p : policies) {
      const auto it = by.find({p, c});
      if (it == by.end()) {
        out << " nan nan";
      } else {
        out << ' ' << csv::format(it->second->mean_chr) << ' '
            << csv::format(it->second->stderr_chr);
      }
    }
    out << '\n';
  }
  close_out(out, dat);
  const auto gp = dir / "chr.gp";
  auto script = open_out(gp);
  script << "set terminal pngcairo size 900,600\nset datafile missing 'nan'\n"
            "set output 'chr.png'\nset xlabel 'cache capacity (fraction of total size)'\n"
            "set ylabel 'CHR'\nset key bottom right\nplot ";
  for (std::size_t i = 0; i < policies.size(); ++i) {
    if (i > 0) script << ", \\\n     ";
    script << "'chr.dat' using 1:" << (2 + 2 * i) << ':' << (3 + 2 * i)
           << " with yerrorlines title '" << method_name(policies[i]) << "'";
  }
  script << '\n';
  close_out(script, gp);
}

}  // namespace pgp::exp
