#pragma once

#include <functional>
#include <vector>

#include "pgp/kernel.hpp"

namespace pgp {

/// Per-slot request counts d_{m,n}: one row per content, one column per slot.
class RequestMatrix {
 public:
  RequestMatrix() = default;
  /// Throws InvalidInput unless every entry is a finite non-negative integer
  /// and there is at least one slot.
  explicit RequestMatrix(Matrix counts);

  Index contents() const noexcept { return counts_.rows(); }
  Index slots() const noexcept { return counts_.cols(); }
  const Matrix& counts() const noexcept { return counts_; }
  double operator()(Index m, Index n) const { return counts_(m, n); }

  /// Per-content totals over all slots.
  Vector totals() const { return counts_.rowwise().sum(); }

  RequestMatrix select_rows(std::span<const Index> rows) const;
  RequestMatrix first_slots(Index n) const;

 private:
  Matrix counts_;
};

/// Gam(shape A, scale B) over a positive hyperparameter; density ~ t^{A-1} e^{-t/B}.
struct GammaPrior {
  double shape = 1.0;
  double scale = 0.1;

  void validate() const;
};

/// A = 1, B = 0.1 for each of eta, alpha_0, ..., alpha_Q.
std::vector<GammaPrior> default_priors(Index feature_dims);

/// zeta = (lambda, phi) with phi = log theta in packed order.
struct UnconstrainedState {
  Vector lambda;
  Vector phi;

  Index size() const noexcept { return lambda.size() + phi.size(); }
  Vector flatten() const;
  static UnconstrainedState unflatten(const Vector& zeta, Index contents);
  HyperParams hyper() const { return HyperParams::from_log(phi); }
};

/// Sum over packed hyperparameters of -A phi + e^phi / B: the negative log Gamma
/// density after the theta = e^phi change of variables, constants dropped.
double hyperprior_term(const Vector& phi, const std::vector<GammaPrior>& priors);

/// Value and (optionally) gradient of an unnormalized negative log density
/// over a flat parameter vector. Used as the HMC target.
using Potential = std::function<double(const Vector& zeta, Vector* grad)>;

/// Poisson likelihood with the GP prior on lambda (f integrated out) and Gamma
/// hyperpriors. The data enter only through per-content totals and N.
///
/// psi(zeta) = sum_m (-D_m lambda_m + N e^{lambda_m}) + 1/2 log|K~|
///             + 1/2 lambda' K~^{-1} lambda + sum_q (-A_q phi_q + e^{phi_q} / B_q)
///
/// log(d!) and (M/2) log 2 pi are omitted, so values are only comparable for
/// a fixed dataset.
class PoissonGpModel {
 public:
  PoissonGpModel(const RequestMatrix& data, FeatureMatrix features,
                 std::vector<GammaPrior> priors, double jitter = 0.0);

  Index contents() const noexcept { return totals_.size(); }
  Index feature_dims() const noexcept { return features_.dims(); }
  /// M + Q + 2.
  Index dimension() const noexcept { return contents() + feature_dims() + 2; }
  Index slots() const noexcept { return slots_; }
  const Vector& totals() const noexcept { return totals_; }
  const FeatureMatrix& features() const noexcept { return features_; }
  const SquaredDistances& distances() const noexcept { return dist_; }
  const std::vector<GammaPrior>& priors() const noexcept { return priors_; }
  double jitter() const noexcept { return jitter_; }

  double neg_log_posterior(const UnconstrainedState& state) const;
  Vector gradient(const UnconstrainedState& state) const;

  /// Flat-vector evaluation sharing one factorization between value and
  /// gradient; `grad` may be null.
  double evaluate(const Vector& zeta, Vector* grad) const;
  Potential potential() const;

  /// lambda_m = log((D_m + 0.5) / N), phi = 0.
  UnconstrainedState default_init() const;

 private:
  void check_state(const UnconstrainedState& state) const;

  Vector totals_;
  Index slots_ = 0;
  FeatureMatrix features_;
  SquaredDistances dist_;
  std::vector<GammaPrior> priors_;
  double jitter_ = 0.0;
};

double neg_log_posterior(const UnconstrainedState& state, const RequestMatrix& data,
                         const FeatureMatrix& features,
                         const std::vector<GammaPrior>& priors);

Vector grad_neg_log_posterior(const UnconstrainedState& state, const RequestMatrix& data,
                              const FeatureMatrix& features,
                              const std::vector<GammaPrior>& priors);

/// Empirical mean requests per slot, the independent-Poisson MLE.
Vector mle_popularity(const RequestMatrix& data);

}  // namespace pgp
