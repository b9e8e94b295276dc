#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pgp/bfgs.hpp"
#include "pgp/posterior.hpp"

namespace pgp::vb {

enum class FitStatus { Converged, MaxIterations, ConvergedWithWarning };

struct TraceEntry {
  int outer_iter = 0;
  std::string block;  // "init", "spca" or "bfgs"
  double objective = 0.0;
  HyperParams theta;
};

/// Mean-field Gaussian q(lambda) = prod_m N(mu_m, sigma_m); sigma holds
/// variances. theta is a point estimate.
struct VariationalPosterior {
  Vector mu;
  Vector sigma;
  HyperParams theta;
  std::vector<double> elbo_trace;
  std::vector<TraceEntry> trace;
  FitStatus status = FitStatus::MaxIterations;
  bool stalled = false;

  Index contents() const noexcept { return mu.size(); }
  void validate() const;
};

struct VbConfig {
  double outer_tol = 1e-6;
  int max_outer = 100;
  double spca_tol = 1e-9;
  int max_spca = 50;
  double armijo_gamma = 0.5;
  double armijo_eta = 1e-4;
  double wolfe_c2 = 0.9;
  int max_backtracks = 50;
  double newton_tol = 1e-10;
  int max_newton = 100;
  int max_bfgs = 50;
  double bfgs_grad_tol = 1e-6;
  bool fit_hyperparameters = true;
  double jitter = 0.0;
  /// Worker threads for the per-content subproblems; results never depend on it.
  int threads = 1;
  std::uint64_t seed = 0;

  void validate() const;
  BfgsOptions bfgs_options() const;
};

/// L(mu, sigma, theta) = -D'mu + N sum_m e^{mu_m + sigma_m/2}
///   + 1/2 sum_m ([K~^{-1}]_mm sigma_m - log sigma_m) + 1/2 (mu'K~^{-1}mu + log|K~|).
/// Adding full_objective_offset(data) gives the exact negative evidence bound.
double elbo_objective(const VariationalPosterior& vp, const RequestMatrix& data,
                      const FeatureMatrix& features, double jitter = 0.0);

/// sum log(d!) - M/2: the terms dropped from elbo_objective.
double full_objective_offset(const RequestMatrix& data);

/// minimize  -count mu + rate_scale e^mu + precision mu^2 / 2 + linear mu
struct MuSubproblem {
  double count = 0.0;
  double rate_scale = 0.0;
  double precision = 1.0;
  double linear = 0.0;
  double value(double mu) const;
  double gradient(double mu) const;
};

/// minimize  rate_scale e^{sigma/2} + (precision sigma - log sigma) / 2  over sigma > 0
struct SigmaSubproblem {
  double rate_scale = 0.0;
  double precision = 1.0;
  double value(double sigma) const;
  double gradient(double sigma) const;
};

/// Damped Newton. Converged when |g| < newton_tol relative to the magnitude
/// of the largest term of g.
double solve_mu_scalar(const MuSubproblem& sub, const VbConfig& cfg, double start = 0.0);
/// Newton in tau = log sigma, so the result is always > 0.
double solve_sigma_scalar(const SigmaSubproblem& sub, const VbConfig& cfg, double start = 1.0);

struct StepResult {
  VariationalPosterior vp;
  double objective = 0.0;
  double step = 0.0;  // accepted Armijo step, 0 when the iterate did not move
  bool stalled = false;
};

/// One successive pseudo-convex approximation iteration over (mu, sigma) with
/// theta fixed: independent scalar solves per content, then an Armijo search
/// on the true objective along the joint direction.
StepResult spca_variational_step(const VariationalPosterior& vp, const RequestMatrix& data,
                                 const FeatureMatrix& features, const VbConfig& cfg);

struct HyperStepResult {
  HyperParams theta;
  double objective = 0.0;
  int iterations = 0;
  bool stalled = false;
};

/// BFGS over phi = log theta with (mu, sigma) fixed, run to convergence.
HyperStepResult bfgs_hyper_step(const VariationalPosterior& vp, const RequestMatrix& data,
                                const FeatureMatrix& features, const VbConfig& cfg);

/// mu = smoothed log-MLE, sigma = 1/N, theta = (0.1, var(mu), 1/Q, ..., 1/Q).
VariationalPosterior default_init(const RequestMatrix& data, const FeatureMatrix& features);

/// Block-coordinate descent alternating SPCA (variational block) and BFGS
/// (hyperparameter block) until the relative decrease of L drops below
/// outer_tol.
VariationalPosterior fit(const RequestMatrix& data, const FeatureMatrix& features,
                         const VbConfig& cfg,
                         const std::optional<VariationalPosterior>& init = std::nullopt);

/// e^{mu + sigma/2}.
Vector vb_mean_rates(const VariationalPosterior& vp);

/// CSV: outer_iter,block,L,theta_eta,theta_alpha_0..theta_alpha_Q
void write_trace_csv(const std::filesystem::path& path, const VariationalPosterior& vp);

}  // namespace pgp::vb
