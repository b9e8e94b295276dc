#include "pgp/vb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "pgp/error.hpp"

namespace pgp::vb {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Runs body(m) for m in [0, n). Each m writes only its own outputs, so the
// result is independent of the thread count.
template <typename Body>
void for_each_content(Index n, int threads, Body body) {
  const int workers = std::clamp<int>(threads, 1, static_cast<int>(std::max<Index>(n, 1)));
  if (workers == 1) {
    for (Index m = 0; m < n; ++m) body(m);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (Index m = w; m < n; m += workers) body(m);
    });
  }
  for (auto& t : pool) t.join();
}

struct FixedTheta {
  CovFactor cf;
  Vector diag_inv;

  FixedTheta(const FeatureMatrix& features, const HyperParams& theta, double jitter)
      : cf(build_cov(features, theta, jitter)), diag_inv(cf.diag_of_inverse()) {}
};

struct Data {
  Vector totals;
  double slots;
};

double objective(const Data& d, const CovFactor& cf, const Vector& diag_inv, const Vector& mu,
                 const Vector& sigma) {
  if (!(sigma.array() > 0.0).all()) return kInf;
  const double expected_rates = (mu.array() + 0.5 * sigma.array()).exp().sum();
  return -d.totals.dot(mu) + d.slots * expected_rates +
         0.5 * (diag_inv.dot(sigma) - sigma.array().log().sum()) +
         0.5 * (mu.dot(cf.solve(mu)) + cf.logdet());
}

void check_shapes(const VariationalPosterior& vp, const RequestMatrix& data,
                  const FeatureMatrix& features) {
  if (vp.contents() != data.contents() || data.contents() != features.contents()) {
    throw InvalidInput("variational state, requests and features disagree on M");
  }
  vp.theta.validate_for(features);
}

template <typename Sub>
double newton_1d(const Sub& sub, double x, const VbConfig& cfg, const char* what) {
  double g = 0.0;
  for (int it = 0; it < cfg.max_newton; ++it) {
    const auto [grad, hess, scale] = sub.derivatives(x);
    g = grad;
    if (std::abs(g) <= cfg.newton_tol * scale) return x;
    const double step = -g / hess;
    const double f0 = sub.value(x);
    double t = 1.0;
    double xn = x + step;
    while (t > 1e-12) {
      xn = x + t * step;
      const double fn = sub.value(xn);
      if (std::isfinite(fn) && fn <= f0 + 1e-4 * t * g * step) break;
      t *= 0.5;
    }
    // Already stationary to machine precision.
    if (std::abs(xn - x) <= 1e-15 * (1.0 + std::abs(x))) return x;
    x = xn;
  }
  std::ostringstream msg;
  msg << what << ": Newton did not converge in " << cfg.max_newton
      << " iterations, |g| = " << std::abs(g);
  throw NonConvergence(msg.str(), std::abs(g));
}

struct MuNewton {
  const MuSubproblem& sub;
  double value(double mu) const { return sub.value(mu); }
  std::tuple<double, double, double> derivatives(double mu) const {
    const double e = sub.rate_scale * std::exp(mu);
    const double g = -sub.count + e + sub.precision * mu + sub.linear;
    const double scale =
        1.0 + std::abs(sub.count) + e + std::abs(sub.precision * mu) + std::abs(sub.linear);
    return {g, e + sub.precision, scale};
  }
};

// Works in tau = log sigma.
struct SigmaNewton {
  const SigmaSubproblem& sub;
  double value(double tau) const {
    const double sigma = std::exp(tau);
    return sub.rate_scale * std::exp(0.5 * sigma) + 0.5 * sub.precision * sigma - 0.5 * tau;
  }
  std::tuple<double, double, double> derivatives(double tau) const {
    const double sigma = std::exp(tau);
    const double e = sub.rate_scale * std::exp(0.5 * sigma);
    const double first = sigma * (0.5 * e + 0.5 * sub.precision);
    return {first - 0.5, first + 0.25 * sigma * sigma * e, 0.5 + first};
  }
};

}  // namespace

void VariationalPosterior::validate() const {
  if (mu.size() != sigma.size()) throw InvalidInput("mu and sigma lengths differ");
  if (!mu.allFinite()) throw InvalidInput("mu must be finite");
  if (!(sigma.array() > 0.0).all() || !sigma.allFinite()) {
    throw InvalidInput("sigma entries must be finite and > 0");
  }
  theta.validate();
}

void VbConfig::validate() const {
  if (!(outer_tol > 0.0) || !(spca_tol > 0.0) || !(newton_tol > 0.0)) {
    throw InvalidInput("VB tolerances must be > 0");
  }
  auto unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!unit(armijo_gamma) || !unit(armijo_eta) || !unit(wolfe_c2)) {
    throw InvalidInput("Armijo/Wolfe constants must lie in (0, 1)");
  }
  if (max_outer < 1 || max_spca < 1 || max_newton < 1 || max_bfgs < 1 || max_backtracks < 1) {
    throw InvalidInput("VB iteration limits must be >= 1");
  }
  if (jitter < 0.0) throw InvalidInput("jitter must be >= 0");
}

BfgsOptions VbConfig::bfgs_options() const {
  BfgsOptions o;
  o.max_iterations = max_bfgs;
  o.grad_tol = bfgs_grad_tol;
  o.rel_tol = outer_tol * 1e-3;
  o.armijo_gamma = armijo_gamma;
  o.armijo_eta = armijo_eta;
  o.wolfe_c2 = wolfe_c2;
  o.max_backtracks = max_backtracks;
  return o;
}

double elbo_objective(const VariationalPosterior& vp, const RequestMatrix& data,
                      const FeatureMatrix& features, double jitter) {
  check_shapes(vp, data, features);
  const FixedTheta ctx(features, vp.theta, jitter);
  const Data d{data.totals(), static_cast<double>(data.slots())};
  return objective(d, ctx.cf, ctx.diag_inv, vp.mu, vp.sigma);
}

double full_objective_offset(const RequestMatrix& data) {
  double log_fact = 0.0;
  for (Index j = 0; j < data.slots(); ++j) {
    for (Index i = 0; i < data.contents(); ++i) log_fact += std::lgamma(data(i, j) + 1.0);
  }
  return log_fact - 0.5 * static_cast<double>(data.contents());
}

double MuSubproblem::value(double mu) const {
  return -count * mu + rate_scale * std::exp(mu) + 0.5 * precision * mu * mu + linear * mu;
}

double MuSubproblem::gradient(double mu) const {
  return -count + rate_scale * std::exp(mu) + precision * mu + linear;
}

double SigmaSubproblem::value(double sigma) const {
  if (!(sigma > 0.0)) return kInf;
  return rate_scale * std::exp(0.5 * sigma) + 0.5 * (precision * sigma - std::log(sigma));
}

double SigmaSubproblem::gradient(double sigma) const {
  return 0.5 * rate_scale * std::exp(0.5 * sigma) + 0.5 * precision - 0.5 / sigma;
}

double solve_mu_scalar(const MuSubproblem& sub, const VbConfig& cfg, double start) {
  if (!(sub.precision > 0.0)) throw InvalidInput("mu subproblem needs precision > 0");
  if (sub.rate_scale < 0.0) throw InvalidInput("mu subproblem needs rate_scale >= 0");
  return newton_1d(MuNewton{sub}, std::isfinite(start) ? start : 0.0, cfg, "mu solve");
}

double solve_sigma_scalar(const SigmaSubproblem& sub, const VbConfig& cfg, double start) {
  if (!(sub.precision > 0.0)) throw InvalidInput("sigma subproblem needs precision > 0");
  if (sub.rate_scale < 0.0) throw InvalidInput("sigma subproblem needs rate_scale >= 0");
  const double tau0 = (start > 0.0 && std::isfinite(start)) ? std::log(start) : 0.0;
  return std::exp(newton_1d(SigmaNewton{sub}, tau0, cfg, "sigma solve"));
}

StepResult spca_variational_step(const VariationalPosterior& vp, const RequestMatrix& data,
                                 const FeatureMatrix& features, const VbConfig& cfg) {
  cfg.validate();
  check_shapes(vp, data, features);
  vp.validate();
  const FixedTheta ctx(features, vp.theta, cfg.jitter);
  const Data d{data.totals(), static_cast<double>(data.slots())};
  const Index m_count = vp.contents();

  const Vector kinv_mu = ctx.cf.solve(vp.mu);
  Vector mu_bar(m_count);
  Vector sigma_bar(m_count);
  for_each_content(m_count, cfg.threads, [&](Index m) {
    const double b = ctx.diag_inv[m];
    // Cross term of 1/2 mu'K~^{-1}mu expanded around the previous means.
    const double coupling = kinv_mu[m] - b * vp.mu[m];
    mu_bar[m] = solve_mu_scalar(
        MuSubproblem{d.totals[m], d.slots * std::exp(0.5 * vp.sigma[m]), b, coupling}, cfg,
        vp.mu[m]);
    sigma_bar[m] =
        solve_sigma_scalar(SigmaSubproblem{d.slots * std::exp(vp.mu[m]), b}, cfg, vp.sigma[m]);
  });

  const Vector rate = (vp.mu.array() + 0.5 * vp.sigma.array()).exp();
  const Vector grad_mu = -d.totals + d.slots * rate + kinv_mu;
  const Vector grad_sigma = (0.5 * d.slots * rate.array() + 0.5 * ctx.diag_inv.array() -
                             0.5 / vp.sigma.array())
                                .matrix();
  const Vector dir_mu = mu_bar - vp.mu;
  const Vector dir_sigma = sigma_bar - vp.sigma;
  const double slope = grad_mu.dot(dir_mu) + grad_sigma.dot(dir_sigma);

  StepResult out;
  out.vp = vp;
  out.objective = objective(d, ctx.cf, ctx.diag_inv, vp.mu, vp.sigma);
  if (!(slope < 0.0)) return out;  // already stationary for the surrogate

  double step = 1.0;
  for (int k = 0; k <= cfg.max_backtracks; ++k) {
    Vector mu = vp.mu + step * dir_mu;
    Vector sigma = vp.sigma + step * dir_sigma;
    const double value = objective(d, ctx.cf, ctx.diag_inv, mu, sigma);
    if (value <= out.objective + cfg.armijo_eta * step * slope) {
      out.vp.mu = std::move(mu);
      out.vp.sigma = std::move(sigma);
      out.objective = value;
      out.step = step;
      return out;
    }
    step *= cfg.armijo_gamma;
  }
  out.stalled = true;
  return out;
}

HyperStepResult bfgs_hyper_step(const VariationalPosterior& vp, const RequestMatrix& data,
                                const FeatureMatrix& features, const VbConfig& cfg) {
  cfg.validate();
  check_shapes(vp, data, features);
  vp.validate();
  const Data d{data.totals(), static_cast<double>(data.slots())};
  const SquaredDistances dist(features);
  const Vector& mu = vp.mu;
  const Vector& sigma = vp.sigma;

  const Objective f = [&](const Vector& phi, Vector* grad) {
    const HyperParams theta = HyperParams::from_log(phi);
    const Matrix kernel = dist.kernel(theta);
    const CovFactor cf = CovFactor::factor(kernel, theta.eta, cfg.jitter);
    const Matrix kinv = cf.inverse();
    const Vector a = kinv * mu;
    const Vector diag_inv = kinv.diagonal();
    const double rates = (mu.array() + 0.5 * sigma.array()).exp().sum();
    const double value = -d.totals.dot(mu) + d.slots * rates +
                         0.5 * (diag_inv.dot(sigma) - sigma.array().log().sum()) +
                         0.5 * (mu.dot(a) + cf.logdet());
    if (grad != nullptr) {
      // dL/dphi_q = 1/2 sum_ij W_ij (dK~/dphi_q)_ij,
      // W = K~^{-1} - a a' - K~^{-1} Sigma K~^{-1}.
      Matrix w = kinv;
      w.noalias() -= a * a.transpose();
      w.noalias() -= (kinv * sigma.asDiagonal()) * kinv;
      const Matrix wk = w.cwiseProduct(kernel);
      grad->resize(phi.size());
      (*grad)[0] = 0.5 * theta.eta * w.trace();
      (*grad)[1] = 0.5 * wk.sum();
      for (Index q = 0; q < dist.dims(); ++q) {
        (*grad)[q + 2] = -0.5 * theta.alphas[q + 1] * wk.cwiseProduct(dist.dim(q)).sum();
      }
    }
    return value;
  };

  Vector phi0 = vp.theta.to_log();
  phi0 = phi0.cwiseMax(-30.0);
  HyperStepResult out;
  out.theta = vp.theta;
  const BfgsResult r = minimize_bfgs(f, phi0, cfg.bfgs_options());
  out.iterations = r.iterations;
  out.objective = r.value;
  if (r.iterations == 0 && r.stalled) {
    out.stalled = true;
    return out;
  }
  out.theta = HyperParams::from_log(r.x);
  return out;
}

VariationalPosterior default_init(const RequestMatrix& data, const FeatureMatrix& features) {
  if (data.contents() != features.contents()) {
    throw InvalidInput("requests and features disagree on M");
  }
  const double n = static_cast<double>(data.slots());
  VariationalPosterior vp;
  vp.mu = ((data.totals().array() + 0.5) / n).log();
  vp.sigma = Vector::Constant(data.contents(), 1.0 / n);
  const double mean = vp.mu.mean();
  const double var = (vp.mu.array() - mean).square().mean();
  const Index q = features.dims();
  vp.theta = HyperParams(0.1, Vector::Constant(q + 1, 1.0 / static_cast<double>(q)));
  vp.theta.alphas[0] = std::max(var, 1e-2);
  return vp;
}

VariationalPosterior fit(const RequestMatrix& data, const FeatureMatrix& features,
                         const VbConfig& cfg, const std::optional<VariationalPosterior>& init) {
  cfg.validate();
  VariationalPosterior vp = init ? *init : default_init(data, features);
  check_shapes(vp, data, features);
  vp.validate();
  vp.elbo_trace.clear();
  vp.trace.clear();
  vp.stalled = false;

  double value = elbo_objective(vp, data, features, cfg.jitter);
  auto record = [&](int outer, const char* block) {
    vp.elbo_trace.push_back(value);
    vp.trace.push_back({outer, block, value, vp.theta});
  };
  record(0, "init");

  vp.status = FitStatus::MaxIterations;
  for (int outer = 1; outer <= cfg.max_outer; ++outer) {
    const double start = value;

    bool spca_stalled = false;
    for (int i = 0; i < cfg.max_spca; ++i) {
      StepResult r = spca_variational_step(vp, data, features, cfg);
      if (r.stalled) {
        spca_stalled = true;
        break;
      }
      const double decrease = value - r.objective;
      const std::vector<double> keep_trace = std::move(vp.elbo_trace);
      std::vector<TraceEntry> keep_entries = std::move(vp.trace);
      vp = std::move(r.vp);
      vp.elbo_trace = keep_trace;
      vp.trace = std::move(keep_entries);
      value = r.objective;
      if (r.step == 0.0 || decrease <= cfg.spca_tol * std::max(1.0, std::abs(value))) break;
    }
    record(outer, "spca");

    bool hyper_stalled = !cfg.fit_hyperparameters;
    if (cfg.fit_hyperparameters) {
      const HyperStepResult h = bfgs_hyper_step(vp, data, features, cfg);
      hyper_stalled = h.stalled;
      if (!h.stalled && h.objective <= value) {
        vp.theta = h.theta;
        value = h.objective;
      }
      record(outer, "bfgs");
    }

    if (spca_stalled && hyper_stalled) {
      vp.status = FitStatus::ConvergedWithWarning;
      vp.stalled = true;
      break;
    }
    if (start - value <= cfg.outer_tol * std::max(1.0, std::abs(start))) {
      vp.status = FitStatus::Converged;
      break;
    }
  }
  return vp;
}

Vector vb_mean_rates(const VariationalPosterior& vp) {
  return (vp.mu.array() + 0.5 * vp.sigma.array()).exp();
}

void write_trace_csv(const std::filesystem::path& path, const VariationalPosterior& vp) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "outer_iter,block,L,theta_eta";
  for (Index q = 0; q < vp.theta.alphas.size(); ++q) out << ",theta_alpha_" << q;
  out << '\n' << std::setprecision(17);
  for (const auto& e : vp.trace) {
    out << e.outer_iter << ',' << e.block << ',' << e.objective << ',' << e.theta.eta;
    for (Index q = 0; q < e.theta.alphas.size(); ++q) out << ',' << e.theta.alphas[q];
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace pgp::vb
