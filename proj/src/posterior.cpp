#include "pgp/posterior.hpp"

#include <cmath>

#include "pgp/error.hpp"

namespace pgp {

RequestMatrix::RequestMatrix(Matrix counts) : counts_(std::move(counts)) {
  if (counts_.cols() < 1) throw InvalidInput("request matrix needs at least one slot");
  for (Index j = 0; j < counts_.cols(); ++j) {
    for (Index i = 0; i < counts_.rows(); ++i) {
      const double v = counts_(i, j);
      if (!std::isfinite(v) || v < 0.0 || v != std::floor(v)) {
        throw InvalidInput("request counts must be non-negative integers");
      }
    }
  }
}

RequestMatrix RequestMatrix::select_rows(std::span<const Index> rows) const {
  Matrix out(static_cast<Index>(rows.size()), slots());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= contents()) throw InvalidInput("row index out of range");
    out.row(static_cast<Index>(i)) = counts_.row(rows[i]);
  }
  return RequestMatrix(std::move(out));
}

RequestMatrix RequestMatrix::first_slots(Index n) const {
  if (n < 1 || n > slots()) throw InvalidInput("first_slots: slot count out of range");
  return RequestMatrix(counts_.leftCols(n));
}

void GammaPrior::validate() const {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    throw InvalidInput("Gamma prior needs shape > 0 and scale > 0");
  }
}

std::vector<GammaPrior> default_priors(Index feature_dims) {
  return std::vector<GammaPrior>(static_cast<std::size_t>(feature_dims + 2), GammaPrior{});
}

Vector UnconstrainedState::flatten() const {
  Vector zeta(size());
  zeta << lambda, phi;
  return zeta;
}

UnconstrainedState UnconstrainedState::unflatten(const Vector& zeta, Index contents) {
  if (contents < 1 || zeta.size() <= contents + 1) {
    throw InvalidInput("unflatten: state vector too short");
  }
  return {zeta.head(contents), zeta.tail(zeta.size() - contents)};
}

double hyperprior_term(const Vector& phi, const std::vector<GammaPrior>& priors) {
  if (static_cast<std::size_t>(phi.size()) != priors.size()) {
    throw InvalidInput("one Gamma prior per hyperparameter required");
  }
  double total = 0.0;
  for (Index q = 0; q < phi.size(); ++q) {
    const auto& g = priors[static_cast<std::size_t>(q)];
    total += -g.shape * phi[q] + std::exp(phi[q]) / g.scale;
  }
  return total;
}

PoissonGpModel::PoissonGpModel(const RequestMatrix& data, FeatureMatrix features,
                               std::vector<GammaPrior> priors, double jitter)
    : totals_(data.totals()),
      slots_(data.slots()),
      features_(std::move(features)),
      dist_(features_),
      priors_(std::move(priors)),
      jitter_(jitter) {
  if (data.contents() != features_.contents()) {
    throw InvalidInput("request rows and feature rows disagree");
  }
  if (static_cast<Index>(priors_.size()) != features_.dims() + 2) {
    throw InvalidInput("need Q + 2 Gamma priors (eta, alpha_0..alpha_Q)");
  }
  for (const auto& g : priors_) g.validate();
  if (jitter_ < 0.0) throw InvalidInput("jitter must be >= 0");
}

void PoissonGpModel::check_state(const UnconstrainedState& state) const {
  if (state.lambda.size() != contents() || state.phi.size() != feature_dims() + 2) {
    throw InvalidInput("state dimensions do not match the model");
  }
}

double PoissonGpModel::evaluate(const Vector& zeta, Vector* grad) const {
  if (zeta.size() != dimension()) throw InvalidInput("state vector has wrong length");
  const Index m = contents();
  const auto lambda = zeta.head(m);
  const Vector phi = zeta.tail(feature_dims() + 2);
  if (!zeta.allFinite()) throw NumericalFailure("non-finite state");

  const HyperParams hp = HyperParams::from_log(phi);
  const Matrix kernel = dist_.kernel(hp);
  const CovFactor cf = CovFactor::factor(kernel, hp.eta, jitter_);
  const Vector a = cf.solve(Vector(lambda));
  const Vector rates = lambda.array().exp();
  const double n = static_cast<double>(slots_);

  const double value = -totals_.dot(lambda) + n * rates.sum() + 0.5 * cf.logdet() +
                       0.5 * lambda.dot(a) + hyperprior_term(phi, priors_);

  if (grad != nullptr) {
    grad->resize(dimension());
    grad->head(m) = -totals_ + n * rates + a;

    // d psi / d phi_q = 1/2 sum_ij W_ij (dK~/dphi_q)_ij, W = K~^{-1} - a a'.
    Matrix w = cf.inverse();
    w.noalias() -= a * a.transpose();
    const Matrix wk = w.cwiseProduct(kernel);
    (*grad)[m] = 0.5 * hp.eta * w.trace();
    (*grad)[m + 1] = 0.5 * wk.sum();
    for (Index q = 0; q < feature_dims(); ++q) {
      (*grad)[m + 2 + q] = -0.5 * hp.alphas[q + 1] * wk.cwiseProduct(dist_.dim(q)).sum();
    }
    for (Index q = 0; q < phi.size(); ++q) {
      const auto& g = priors_[static_cast<std::size_t>(q)];
      (*grad)[m + q] += -g.shape + std::exp(phi[q]) / g.scale;
    }
  }
  return value;
}

double PoissonGpModel::neg_log_posterior(const UnconstrainedState& state) const {
  check_state(state);
  return evaluate(state.flatten(), nullptr);
}

Vector PoissonGpModel::gradient(const UnconstrainedState& state) const {
  check_state(state);
  Vector g;
  evaluate(state.flatten(), &g);
  return g;
}

Potential PoissonGpModel::potential() const {
  return [this](const Vector& zeta, Vector* grad) { return evaluate(zeta, grad); };
}

UnconstrainedState PoissonGpModel::default_init() const {
  const double n = static_cast<double>(slots_);
  UnconstrainedState s;
  s.lambda = ((totals_.array() + 0.5) / n).log();
  s.phi = Vector::Zero(feature_dims() + 2);
  return s;
}

double neg_log_posterior(const UnconstrainedState& state, const RequestMatrix& data,
                         const FeatureMatrix& features,
                         const std::vector<GammaPrior>& priors) {
  return PoissonGpModel(data, features, priors).neg_log_posterior(state);
}

Vector grad_neg_log_posterior(const UnconstrainedState& state, const RequestMatrix& data,
                              const FeatureMatrix& features,
                              const std::vector<GammaPrior>& priors) {
  return PoissonGpModel(data, features, priors).gradient(state);
}

Vector mle_popularity(const RequestMatrix& data) {
  return data.totals() / static_cast<double>(data.slots());
}

}  // namespace pgp
