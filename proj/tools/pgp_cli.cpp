// pgp: batch driver for dataset generation, fitting, and the RMSE / CHR /
// parameter-table experiments. See README.md for the config keys.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "pgp/csv.hpp"
#include "pgp/datagen.hpp"
#include "pgp/error.hpp"
#include "pgp/experiment.hpp"
#include "pgp/ingest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pgp;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

const std::set<std::string> kInferenceKeys{
    "hmc.step_size", "hmc.leapfrog_steps", "hmc.samples", "hmc.burn_in", "hmc.stride",
    "vb.outer_tol",  "vb.max_outer",       "vb.max_spca", "vb.jitter",   "vb.type2_variance",
    "prior.shape",   "prior.scale"};

const std::set<std::string> kGeneratorKeys{
    "mode",  "m",    "n",     "n_future", "unseen_fraction", "users", "p_user_features",
    "omega", "alpha0", "beta", "eta",     "size_low",        "size_high"};

std::set<std::string> keys(std::initializer_list<std::set<std::string>> parts,
                           std::initializer_list<std::string> extra) {
  std::set<std::string> out{"seed", "threads", "out"};
  for (const auto& p : parts) out.insert(p.begin(), p.end());
  out.insert(extra.begin(), extra.end());
  return out;
}

int as_int(const exp::Config& cfg, const std::string& key, long long fallback) {
  return static_cast<int>(cfg.get_int(key, fallback));
}

fs::path output_dir(const exp::Config& cfg) {
  if (!cfg.has("out")) throw ConfigError("missing output directory (out / --out)");
  const fs::path dir = cfg.get("out", "");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

CellGenConfig cell_config(const exp::Config& cfg) {
  CellGenConfig c;
  c.m_seen = as_int(cfg, "m", c.m_seen);
  c.n_slots = as_int(cfg, "n", c.n_slots);
  c.n_future = as_int(cfg, "n_future", c.n_future);
  c.unseen_fraction = cfg.get_double("unseen_fraction", c.unseen_fraction);
  c.size_low = cfg.get_double("size_low", c.size_low);
  c.size_high = cfg.get_double("size_high", c.size_high);
  if (cfg.has("eta")) c.true_hp.eta = cfg.get_double("eta", c.true_hp.eta);
  if (cfg.has("alpha0")) c.true_hp.alphas[0] = cfg.get_double("alpha0", 0.1);
  c.seed = cfg.get_seed("seed", 1);
  return c;
}

UserGenConfig user_config(const exp::Config& cfg) {
  UserGenConfig c;
  c.m_seen = as_int(cfg, "m", c.m_seen);
  c.n_slots = as_int(cfg, "n", c.n_slots);
  c.n_future = as_int(cfg, "n_future", c.n_future);
  c.unseen_fraction = cfg.get_double("unseen_fraction", c.unseen_fraction);
  c.users = as_int(cfg, "users", c.users);
  c.p_user_features = as_int(cfg, "p_user_features", c.p_user_features);
  c.dirichlet_omega = cfg.get_double("omega", c.dirichlet_omega);
  c.alpha0 = cfg.get_double("alpha0", c.alpha0);
  c.beta = cfg.get_double("beta", c.beta);
  c.eta = cfg.get_double("eta", c.eta);
  c.size_low = cfg.get_double("size_low", c.size_low);
  c.size_high = cfg.get_double("size_high", c.size_high);
  c.seed = cfg.get_seed("seed", 1);
  return c;
}

std::vector<exp::Method> methods(const exp::Config& cfg, const std::string& key,
                                 std::vector<std::string> fallback) {
  std::vector<exp::Method> out;
  for (const auto& name : cfg.get_strings(key, std::move(fallback))) {
    out.push_back(exp::parse_method(name));
  }
  return out;
}

// ---------------------------------------------------------------- verbs

int cmd_gen(const exp::Config& cfg) {
  cfg.require_known(keys({kGeneratorKeys}, {}));
  const std::string mode = cfg.get("mode", "cell");
  SyntheticDataset ds;
  try {
    if (mode == "cell") {
      ds = gen_cell_level(cell_config(cfg));
    } else if (mode == "user") {
      ds = gen_user_level(user_config(cfg));
    } else {
      throw ConfigError("mode must be 'cell' or 'user'");
    }
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  const fs::path dir = output_dir(cfg);
  write_dataset(dir, ds);
  std::cout << "wrote " << ds.contents() << " contents (" << ds.seen_count() << " seen, "
            << ds.unseen_count() << " unseen) x " << ds.requests.slots() << " slots to "
            << dir.string() << '\n';
  return kOk;
}

int cmd_ingest(const exp::Config& cfg) {
  cfg.require_known(keys({}, {"ratings", "movies", "start_year", "end_year", "max_seen",
                              "unseen_fraction", "content_size", "train_days", "eval_days",
                              "max_malformed"}));
  if (!cfg.has("ratings") || !cfg.has("movies")) {
    throw ConfigError("ingest needs ratings and movies paths");
  }
  ingest::WindowOptions w;
  w.start_year = as_int(cfg, "start_year", w.start_year);
  w.end_year = as_int(cfg, "end_year", w.end_year);
  w.max_seen = as_int(cfg, "max_seen", w.max_seen);
  w.unseen_fraction = cfg.get_double("unseen_fraction", w.unseen_fraction);
  w.content_size = cfg.get_double("content_size", w.content_size);
  w.train_days = as_int(cfg, "train_days", w.train_days);
  w.eval_days = as_int(cfg, "eval_days", w.eval_days);
  try {
    w.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  const auto parsed = ingest::parse_movielens(cfg.get("ratings", ""), cfg.get("movies", ""),
                                              cfg.get_double("max_malformed", 0.01));
  const auto result = ingest::make_windows(parsed.log, parsed.movies, w);
  const fs::path dir = output_dir(cfg);
  for (const auto& msg : result.warnings) std::cerr << "warning: " << msg << '\n';
  for (const auto& win : result.windows) {
    char name[32];
    std::snprintf(name, sizeof(name), "window_%02d", win.window_index);
    write_dataset(dir / name, ingest::to_dataset(win));
  }
  json stats = {{"data_rows", parsed.log.data_rows},
                {"malformed", parsed.log.malformed},
                {"train", result.stats.train},
                {"eval", result.stats.eval},
                {"dropped_by_cap", result.stats.dropped_by_cap},
                {"out_of_window", result.stats.out_of_window},
                {"skipped_windows", result.stats.skipped_windows},
                {"windows", result.windows.size()}};
  std::ofstream out(dir / "ingest_stats.json");
  out << stats.dump(2) << '\n';
  if (!out) throw IoError("failed writing ingest_stats.json");
  std::cout << "wrote " << result.windows.size() << " windows to " << dir.string() << '\n';
  return kOk;
}

int cmd_fit(const exp::Config& cfg) {
  cfg.require_known(keys({kInferenceKeys}, {"dataset", "backend", "write_draws"}));
  if (!cfg.has("dataset")) throw ConfigError("fit needs a dataset directory");
  const exp::Method method = exp::parse_method(cfg.get("backend", "vb"));
  if (method == exp::Method::MleRand || method == exp::Method::Truth) {
    throw ConfigError("fit backend must be vb, hmc or mle");
  }
  const exp::InferenceSettings settings = exp::inference_settings(cfg);
  const SyntheticDataset ds = read_dataset(cfg.get("dataset", ""));
  std::optional<FeatureMatrix> unseen;
  if (ds.unseen_count() > 0) unseen = ds.unseen_features();
  const std::uint64_t seed = derive_seed(cfg.get_seed("seed", 1), 2);
  const exp::FitOutput fit =
      exp::fit_method(method, ds.requests, ds.seen_features(), unseen, settings, seed);

  const fs::path dir = output_dir(cfg);
  {
    std::ofstream out(dir / "posterior.csv");
    if (!out) throw IoError("cannot write posterior.csv");
    out << "content_id,seen,kind,mean,variance\n";
    std::vector<Prediction> preds;
    if (fit.variational) {
      preds = predict_seen_all(*fit.variational);
    } else if (fit.samples) {
      preds = predict_seen_all(*fit.samples);
    }
    for (Index m = 0; m < ds.contents(); ++m) {
      const bool seen = m < ds.seen_count();
      const double mean = seen ? fit.type1[m] : fit.type2[m - ds.seen_count()];
      double variance = std::nan("");
      if (seen && !preds.empty()) variance = preds[static_cast<std::size_t>(m)].variance;
      if (seen && method == exp::Method::MLE) variance = mean;
      out << (m + 1) << ',' << (seen ? 1 : 0) << ',' << (seen ? "type1" : "type2") << ','
          << csv::format(mean) << ',' << csv::format(variance) << '\n';
    }
    if (!out) throw IoError("failed writing posterior.csv");
  }

  json summary = {{"backend", exp::method_name(method)},
                  {"M", ds.seen_count()},
                  {"N", ds.requests.slots()},
                  {"Q", ds.features.dims()},
                  {"unseen", ds.unseen_count()},
                  {"seed", cfg.get_seed("seed", 1)}};
  if (method != exp::Method::MLE) {
    std::vector<double> alphas(fit.theta.alphas.data(),
                               fit.theta.alphas.data() + fit.theta.alphas.size());
    summary["theta"] = {{"eta", fit.theta.eta}, {"alpha", alphas}};
  }
  if (fit.variational) {
    const auto& vp = *fit.variational;
    const char* status = vp.status == vb::FitStatus::Converged      ? "converged"
                         : vp.status == vb::FitStatus::MaxIterations ? "max_iterations"
                                                                     : "converged_with_warning";
    summary["diagnostics"] = {{"status", status},
                              {"final_L", vp.elbo_trace.back()},
                              {"trace_entries", vp.trace.size()}};
    vb::write_trace_csv(dir / "trace.csv", vp);
  }
  if (fit.samples) {
    const auto& s = *fit.samples;
    summary["diagnostics"] = {{"accept_rate", s.accept_rate},
                              {"divergent", s.divergent},
                              {"draws", s.draws()},
                              {"step_size", settings.hmc.step_size},
                              {"leapfrog_steps", settings.hmc.leapfrog_steps}};
    if (cfg.get_bool("write_draws", false)) hmc::write_draws_csv(dir / "draws.csv", s);
  }
  std::ofstream out(dir / "summary.json");
  out << summary.dump(2) << '\n';
  if (!out) throw IoError("failed writing summary.json");
  std::cout << "fitted " << exp::method_name(method) << " on " << ds.seen_count()
            << " seen contents; results in " << dir.string() << '\n';
  return kOk;
}

int cmd_rmse(const exp::Config& cfg) {
  cfg.require_known(keys({kInferenceKeys, kGeneratorKeys},
                         {"n_grid", "replications", "methods"}));
  exp::RmseOptions opt;
  opt.generator = cell_config(cfg);
  std::vector<int> grid;
  for (double n : cfg.get_doubles("n_grid", {20, 80})) grid.push_back(static_cast<int>(n));
  opt.n_grid = grid;
  opt.replications = as_int(cfg, "replications", 10);
  opt.methods = methods(cfg, "methods", {"mle", "vb", "hmc"});
  opt.settings = exp::inference_settings(cfg);
  opt.seed = cfg.get_seed("seed", 1);
  opt.threads = exp::worker_count(as_int(cfg, "threads", 0));
  try {
    opt.generator.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  const fs::path dir = output_dir(cfg);
  const exp::RmseResult res = exp::run_rmse(opt);
  const auto summary = exp::summarize(res.rows);
  exp::write_rmse_csv(dir / "rmse.csv", res.rows);
  exp::write_rmse_summary_csv(dir / "rmse_summary.csv", summary);
  exp::write_theta_csv(dir / "theta.csv", res.theta);
  exp::write_rmse_plots(dir, summary);
  for (const auto& s : summary) {
    std::cout << exp::method_name(s.method) << " M=" << s.m << " N=" << s.n
              << " type1=" << s.mean_type1 << " type2=" << s.mean_type2 << '\n';
  }
  return kOk;
}

std::vector<SyntheticDataset> load_windows(const fs::path& root) {
  std::vector<fs::path> dirs;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root, ec)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("window_", 0) == 0) {
      dirs.push_back(entry.path());
    }
  }
  if (ec) throw IoError("cannot list " + root.string() + ": " + ec.message());
  std::sort(dirs.begin(), dirs.end());
  std::vector<SyntheticDataset> out;
  for (const auto& d : dirs) out.push_back(read_dataset(d));
  if (out.empty()) throw IoError(root.string() + ": no window_* directories");
  return out;
}

int cmd_chr(const exp::Config& cfg) {
  cfg.require_known(keys({kInferenceKeys, kGeneratorKeys},
                         {"capacity_grid", "replications", "policies", "seen_share",
                          "windows"}));
  exp::ChrOptions opt;
  const std::string mode = cfg.get("mode", "user");
  if (mode != "cell" && mode != "user") throw ConfigError("mode must be 'cell' or 'user'");
  opt.workload = mode == "cell" ? exp::Workload::Cell : exp::Workload::User;
  opt.cell = cell_config(cfg);
  opt.user = user_config(cfg);
  opt.capacity_grid = cfg.get_doubles("capacity_grid", opt.capacity_grid);
  opt.replications = as_int(cfg, "replications", 10);
  opt.policies = methods(cfg, "policies", {"vb", "hmc", "mle", "mle-rand"});
  opt.seen_share = cfg.get_double("seen_share", opt.seen_share);
  opt.settings = exp::inference_settings(cfg);
  opt.seed = cfg.get_seed("seed", 1);
  opt.threads = exp::worker_count(as_int(cfg, "threads", 0));
  if (!cfg.has("windows")) {
    try {
      if (opt.workload == exp::Workload::User) {
        opt.user.validate();
      } else {
        opt.cell.validate();
      }
    } catch (const InvalidInput& e) {
      throw ConfigError(e.what());
    }
  }
  const fs::path dir = output_dir(cfg);
  const std::vector<exp::ChrRow> rows =
      cfg.has("windows") ? exp::run_chr(load_windows(cfg.get("windows", "")), opt)
                         : exp::run_chr(opt);
  const auto summary = exp::summarize(rows);
  exp::write_chr_csv(dir / "chr.csv", rows);
  exp::write_chr_summary_csv(dir / "chr_summary.csv", summary);
  exp::write_chr_plots(dir, summary);
  for (const auto& s : summary) {
    std::cout << exp::method_name(s.policy) << " capacity=" << s.capacity_fraction
              << " chr=" << s.mean_chr << '\n';
  }
  return kOk;
}

std::vector<exp::ThetaRow> read_fit_summary(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
    if (!j.contains("theta")) return {};
    const auto alphas = j.at("theta").at("alpha").get<std::vector<double>>();
    exp::ThetaRow row;
    row.method = exp::parse_method(j.at("backend").get<std::string>());
    row.m = j.at("M").get<int>();
    row.n = j.at("N").get<int>();
    row.theta = HyperParams(j.at("theta").at("eta").get<double>(),
                            Eigen::Map<const Vector>(alphas.data(),
                                                     static_cast<Index>(alphas.size())));
    return {row};
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

int cmd_tables(const exp::Config& cfg) {
  cfg.require_known(keys({}, {"inputs", "truth"}));
  const auto inputs = cfg.get_strings("inputs", {});
  if (inputs.empty()) throw ConfigError("tables needs at least one input (theta.csv or summary.json)");
  std::vector<exp::ThetaRow> rows;
  for (const auto& in : inputs) {
    const fs::path p = in;
    const fs::path file = fs::is_directory(p) ? p / "summary.json" : p;
    if (!fs::exists(file)) throw IoError("missing artifact " + file.string());
    const auto part = file.extension() == ".json" ? read_fit_summary(file)
                                                  : exp::read_theta_csv(file);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (rows.empty()) throw IoError("no hyperparameter estimates in the inputs");
  const std::string truth = cfg.get("truth", "reference");
  std::optional<HyperParams> truth_hp;
  if (truth == "reference") {
    truth_hp = reference_hyperparams();
  } else if (truth != "none") {
    throw ConfigError("truth must be 'reference' or 'none'");
  }
  const fs::path dir = output_dir(cfg);
  exp::write_table_csv(dir / "parameter_table.csv", exp::make_table(rows, truth_hp));
  std::cout << "wrote " << (dir / "parameter_table.csv").string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson-GP content popularity learning and cache placement"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key = value config file");
    sub->add_option("--set", sets, "override any config key: --set key=value");
  };
  auto flag = [&](CLI::App* sub, const std::string& name, const std::string& key,
                  const std::string& help) {
    sub->add_option_function<std::string>(
        name, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset directory");
  add_common(gen);
  flag(gen, "--mode", "mode", "cell or user");
  flag(gen, "--m", "m", "number of seen contents");
  flag(gen, "--n", "n", "number of training slots");
  flag(gen, "--seed", "seed", "master seed");
  flag(gen, "--omega", "omega", "Dirichlet concentration (user mode)");
  flag(gen, "--alpha0", "alpha0", "kernel scale alpha_0");
  flag(gen, "--out", "out", "output directory");

  auto* ing = app.add_subcommand("ingest", "window a MovieLens ratings log");
  add_common(ing);
  flag(ing, "--ratings", "ratings", "ratings.csv");
  flag(ing, "--movies", "movies", "movies.csv");
  flag(ing, "--out", "out", "output directory (one subdirectory per window)");

  auto* fit = app.add_subcommand("fit", "fit one backend to a dataset directory");
  add_common(fit);
  flag(fit, "--dataset", "dataset", "dataset directory");
  flag(fit, "--backend", "backend", "vb, hmc or mle");
  flag(fit, "--seed", "seed", "master seed");
  flag(fit, "--step-size", "hmc.step_size", "HMC leapfrog step size");
  flag(fit, "--out", "out", "output directory");

  auto* rm = app.add_subcommand("rmse", "Type-1/Type-2 RMSE versus N");
  add_common(rm);
  flag(rm, "--m", "m", "number of seen contents");
  flag(rm, "--n-grid", "n_grid", "comma-separated N values");
  flag(rm, "--replications", "replications", "replications per grid point");
  flag(rm, "--methods", "methods", "comma-separated subset of mle,vb,hmc,truth");
  flag(rm, "--seed", "seed", "master seed");
  flag(rm, "--out", "out", "output directory");

  auto* ch = app.add_subcommand("chr", "cache hit ratio versus capacity");
  add_common(ch);
  flag(ch, "--mode", "mode", "cell or user workload");
  flag(ch, "--m", "m", "number of seen contents");
  flag(ch, "--capacity-grid", "capacity_grid", "comma-separated capacity fractions");
  flag(ch, "--replications", "replications", "replications");
  flag(ch, "--policies", "policies", "comma-separated subset of vb,hmc,mle,mle-rand,truth");
  flag(ch, "--windows", "windows", "directory of ingested window_* datasets");
  flag(ch, "--seed", "seed", "master seed");
  flag(ch, "--out", "out", "output directory");

  auto* tb = app.add_subcommand("tables", "hyperparameter recovery table");
  add_common(tb);
  flag(tb, "--inputs", "inputs", "comma-separated theta.csv / summary.json / fit directories");
  flag(tb, "--truth", "truth", "reference or none");
  flag(tb, "--out", "out", "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    exp::Config cfg = config_path.empty() ? exp::Config() : exp::Config::load(config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : overrides) cfg.set(k, v);

    if (*gen) return cmd_gen(cfg);
    if (*ing) return cmd_ingest(cfg);
    if (*fit) return cmd_fit(cfg);
    if (*rm) return cmd_rmse(cfg);
    if (*ch) return cmd_chr(cfg);
    if (*tb) return cmd_tables(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
