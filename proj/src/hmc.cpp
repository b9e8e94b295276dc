#include "pgp/hmc.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace pgp::hmc {
namespace {

Vector inverse_mass(const HmcConfig& cfg, Index dim) {
  if (cfg.mass.size() == 0) return Vector::Ones(dim);
  return cfg.mass.cwiseInverse();
}

double kinetic(const Vector& p, const Vector& inv_mass) {
  return 0.5 * p.cwiseProduct(inv_mass).dot(p);
}

double normalizer(const HmcConfig& cfg, Index dim) {
  double log_det = 0.0;
  if (cfg.mass.size() != 0) log_det = cfg.mass.array().log().sum();
  return 0.5 * (static_cast<double>(dim) * std::log(2.0 * std::numbers::pi) + log_det);
}

struct Endpoint {
  Vector q;
  Vector p;
  double potential = 0.0;
  Vector grad;
};

double checked_eval(const Potential& potential, const Vector& q, Vector& grad) {
  double value = 0.0;
  try {
    value = potential(q, &grad);
  } catch (const NumericalFailure& e) {
    throw IntegratorDivergence(std::string("trajectory left the numerically valid region: ") +
                               e.what());
  }
  if (!std::isfinite(value) || !grad.allFinite()) {
    throw IntegratorDivergence("non-finite potential or gradient during leapfrog");
  }
  return value;
}

// `grad` is the gradient at `q` on entry, so each step costs one evaluation.
Endpoint integrate(Vector q, Vector p, Vector grad, const HmcConfig& cfg,
                   const Vector& inv_mass, const Potential& potential) {
  const double eps = cfg.step_size;
  double value = 0.0;
  p -= 0.5 * eps * grad;
  for (int l = 0; l < cfg.leapfrog_steps; ++l) {
    q += eps * inv_mass.cwiseProduct(p);
    value = checked_eval(potential, q, grad);
    if (l + 1 < cfg.leapfrog_steps) p -= eps * grad;
  }
  p -= 0.5 * eps * grad;
  if (!p.allFinite()) throw IntegratorDivergence("non-finite momentum");
  return {std::move(q), std::move(p), value, std::move(grad)};
}

}  // namespace

void HmcConfig::validate(Index dimension) const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw InvalidInput("HMC step size must be finite and > 0");
  }
  if (leapfrog_steps < 1) throw InvalidInput("HMC needs at least one leapfrog step");
  if (num_samples < 1) throw InvalidInput("HMC needs at least one retained draw");
  if (burn_in < 0) throw InvalidInput("HMC burn-in must be >= 0");
  if (mass.size() != 0) {
    if (mass.size() != dimension) throw InvalidInput("mass matrix diagonal has wrong length");
    if (!(mass.array() > 0.0).all() || !mass.allFinite()) {
      throw InvalidInput("mass matrix entries must be finite and > 0");
    }
  }
}

double hamiltonian(const Vector& position, const Vector& momentum, const HmcConfig& cfg,
                   const Potential& potential) {
  if (position.size() != momentum.size()) {
    throw InvalidInput("momentum length must match the state");
  }
  cfg.validate(position.size());
  return potential(position, nullptr) + normalizer(cfg, position.size()) +
         kinetic(momentum, inverse_mass(cfg, position.size()));
}

std::pair<Vector, Vector> leapfrog(const Vector& position, const Vector& momentum,
                                   const HmcConfig& cfg, const Potential& potential) {
  if (position.size() != momentum.size()) {
    throw InvalidInput("momentum length must match the state");
  }
  cfg.validate(position.size());
  Vector grad(position.size());
  checked_eval(potential, position, grad);
  auto end = integrate(position, momentum, std::move(grad), cfg,
                       inverse_mass(cfg, position.size()), potential);
  return {std::move(end.q), std::move(end.p)};
}

PosteriorSamples sample(const Potential& potential, Index lambda_size, const HmcConfig& cfg,
                        const Vector& init) {
  const Index dim = init.size();
  cfg.validate(dim);
  if (lambda_size < 0 || lambda_size > dim) throw InvalidInput("lambda_size out of range");
  if (!init.allFinite()) throw InvalidInput("HMC initial state must be finite");

  const Vector inv_mass = inverse_mass(cfg, dim);
  const Vector mass_sqrt =
      cfg.mass.size() == 0 ? Vector::Ones(dim) : Vector(cfg.mass.array().sqrt());
  const double h_const = normalizer(cfg, dim);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Vector q = init;
  Vector grad(dim);
  double value = 0.0;
  try {
    value = checked_eval(potential, q, grad);
  } catch (const IntegratorDivergence& e) {
    throw InvalidInput(std::string("HMC initial state is not evaluable: ") + e.what());
  }

  PosteriorSamples out;
  out.lambda_draws.resize(cfg.num_samples, lambda_size);
  out.phi_draws.resize(cfg.num_samples, dim - lambda_size);
  out.energy_trace.resize(cfg.num_samples);
  out.accepted.reserve(static_cast<std::size_t>(cfg.num_samples));

  const int total = cfg.burn_in + cfg.num_samples;
  constexpr int kWindow = 100;
  int window_divergent = 0;
  int window_len = 0;
  int kept_accepts = 0;
  Vector p(dim);

  for (int it = 0; it < total; ++it) {
    for (Index i = 0; i < dim; ++i) p[i] = mass_sqrt[i] * normal(rng);
    if (cfg.negate_momentum) p = -p;
    const double h_start = value + h_const + kinetic(p, inv_mass);
    const double u = uniform(rng);

    bool accept = false;
    double h_kept = h_start;
    try {
      Endpoint end = integrate(q, p, grad, cfg, inv_mass, potential);
      const double h_end = end.potential + h_const + kinetic(end.p, inv_mass);
      const double dh = h_end - h_start;
      if (std::isfinite(dh) && u < std::exp(-dh)) {
        accept = true;
        q = std::move(end.q);
        grad = std::move(end.grad);
        value = end.potential;
        h_kept = h_end;
      }
    } catch (const IntegratorDivergence&) {
      ++out.divergent;
      ++window_divergent;
    }

    if (++window_len == kWindow) {
      if (100 * window_divergent > 99 * kWindow) {
        std::ostringstream msg;
        msg << "acceptance collapsed: " << window_divergent << " of " << kWindow
            << " trajectories diverged by iteration " << (it + 1)
            << "; reduce the step size (currently " << cfg.step_size << ")";
        throw SamplerFailure(msg.str());
      }
      window_len = 0;
      window_divergent = 0;
    }

    if (it >= cfg.burn_in) {
      const Index s = it - cfg.burn_in;
      out.lambda_draws.row(s) = q.head(lambda_size).transpose();
      out.phi_draws.row(s) = q.tail(dim - lambda_size).transpose();
      out.energy_trace[s] = h_kept;
      out.accepted.push_back(accept);
      if (accept) ++kept_accepts;
    }
  }
  out.accept_rate = static_cast<double>(kept_accepts) / static_cast<double>(cfg.num_samples);
  return out;
}

PosteriorSamples sample(const PoissonGpModel& model, const HmcConfig& cfg,
                        const UnconstrainedState& init) {
  if (init.lambda.size() != model.contents() || init.phi.size() != model.feature_dims() + 2) {
    throw InvalidInput("HMC initial state does not match the model");
  }
  return sample(model.potential(), model.contents(), cfg, init.flatten());
}

PosteriorSamples sample(const RequestMatrix& data, const FeatureMatrix& features,
                        const std::vector<GammaPrior>& priors, const HmcConfig& cfg,
                        const UnconstrainedState& init) {
  const PoissonGpModel model(data, features, priors);
  return sample(model, cfg, init);
}

Vector posterior_mean_rates(const PosteriorSamples& samples) {
  if (samples.draws() < 1) throw InvalidInput("no posterior draws");
  return samples.lambda_draws.array().exp().colwise().mean().transpose();
}

Vector posterior_mean_theta(const PosteriorSamples& samples) {
  if (samples.draws() < 1) throw InvalidInput("no posterior draws");
  return samples.phi_draws.array().exp().colwise().mean().transpose();
}

void write_draws_csv(const std::filesystem::path& path, const PosteriorSamples& samples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "draw";
  for (Index m = 0; m < samples.contents(); ++m) out << ",lambda_" << (m + 1);
  for (Index q = 0; q < samples.phi_draws.cols(); ++q) out << ",phi_" << q;
  out << ",accepted,H\n";
  out << std::setprecision(17);
  for (Index s = 0; s < samples.draws(); ++s) {
    out << s;
    for (Index m = 0; m < samples.contents(); ++m) out << ',' << samples.lambda_draws(s, m);
    for (Index q = 0; q < samples.phi_draws.cols(); ++q) out << ',' << samples.phi_draws(s, q);
    out << ',' << (samples.accepted[static_cast<std::size_t>(s)] ? 1 : 0) << ','
        << samples.energy_trace[s] << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace pgp::hmc
