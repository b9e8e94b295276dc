#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "pgp/error.hpp"
#include "pgp/posterior.hpp"

namespace pgp::hmc {

/// Non-finite potential or gradient inside a leapfrog trajectory.
class IntegratorDivergence : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

struct HmcConfig {
  double step_size = 0.015;
  int leapfrog_steps = 20;
  int num_samples = 2500;  // retained draws S
  int burn_in = 2500;
  /// Diagonal of the momentum covariance G; empty means identity.
  Vector mass;
  std::uint64_t seed = 1;
  /// Negates every freshly drawn momentum. Test hook: the chain must not care.
  bool negate_momentum = false;

  void validate(Index dimension) const;
};

struct PosteriorSamples {
  Matrix lambda_draws;  // S x M
  Matrix phi_draws;     // S x (Q + 2); zero columns for generic targets
  double accept_rate = 0.0;
  Vector energy_trace;  // H of the retained state, one per draw
  std::vector<bool> accepted;
  int divergent = 0;  // over all iterations including burn-in

  Index draws() const noexcept { return lambda_draws.rows(); }
  Index contents() const noexcept { return lambda_draws.cols(); }
  HyperParams hyper(Index s) const { return HyperParams::from_log(phi_draws.row(s).transpose()); }
};

/// H = psi(q) + 1/2 log((2 pi)^D |G|) + 1/2 p' G^{-1} p.
double hamiltonian(const Vector& position, const Vector& momentum, const HmcConfig& cfg,
                   const Potential& potential);

/// L standard (half, full, half) leapfrog steps. Throws IntegratorDivergence
/// on any non-finite potential or gradient.
std::pair<Vector, Vector> leapfrog(const Vector& position, const Vector& momentum,
                                   const HmcConfig& cfg, const Potential& potential);

/// Runs burn_in + num_samples Metropolis-corrected HMC iterations and keeps
/// the last num_samples. The first `lambda_size` coordinates are reported as
/// lambda draws, the rest as phi draws. Deterministic given cfg.seed.
///
/// Throws SamplerFailure when more than 99 of any 100 consecutive
/// trajectories diverge.
PosteriorSamples sample(const Potential& potential, Index lambda_size, const HmcConfig& cfg,
                        const Vector& init);

PosteriorSamples sample(const PoissonGpModel& model, const HmcConfig& cfg,
                        const UnconstrainedState& init);

PosteriorSamples sample(const RequestMatrix& data, const FeatureMatrix& features,
                        const std::vector<GammaPrior>& priors, const HmcConfig& cfg,
                        const UnconstrainedState& init);

/// (1/S) sum_s e^{lambda^(s)}, per content.
Vector posterior_mean_rates(const PosteriorSamples& samples);

/// Posterior mean of theta (not of phi) across draws.
Vector posterior_mean_theta(const PosteriorSamples& samples);

/// CSV: draw,lambda_1..lambda_M,phi_0..phi_{Q+1},accepted,H
void write_draws_csv(const std::filesystem::path& path, const PosteriorSamples& samples);

}  // namespace pgp::hmc
