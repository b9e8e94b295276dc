#pragma once

#include <utility>
#include <vector>

#include "pgp/hmc.hpp"
#include "pgp/vb.hpp"

namespace pgp {

enum class Backend { HMC, VB, MLE };
enum class PredictionKind { Type1, Type2 };

const char* backend_name(Backend b);

struct Prediction {
  double mean = 0.0;      // expected requests in the next slot
  double variance = 0.0;  // predictive variance of that count
  Backend backend = Backend::VB;
  PredictionKind kind = PredictionKind::Type1;
  bool clamped = false;  // a negative conditional variance was clamped
};

/// Seen content m. Mean e^{mu + sigma/2}; variance is the lognormal rate
/// variance plus the Poisson variance.
Prediction predict_seen(const vb::VariationalPosterior& vp, Index m);
/// Seen content m. Mean (1/S) sum_s e^{lambda_m^(s)}; variance is the sample
/// variance of the rate plus the mean.
Prediction predict_seen(const hmc::PosteriorSamples& samples, Index m);

std::vector<Prediction> predict_seen_all(const vb::VariationalPosterior& vp);
std::vector<Prediction> predict_seen_all(const hmc::PosteriorSamples& samples);

/// GP conditioning of lambda at new feature vectors for one fixed theta.
/// Factors K~ once and reuses it for every query.
class GpConditioner {
 public:
  GpConditioner(const FeatureMatrix& features, const HyperParams& hp, double jitter = 0.0);

  /// K~^{-1} k~ for the query point.
  Vector weights(const Vector& x_new) const;
  /// K(x_new, x_new) + eta - k~' K~^{-1} k~, floored at 0 against roundoff.
  double conditional_variance(const Vector& x_new, const Vector& weights) const;
  /// (k~' K~^{-1} lambda, conditional variance).
  std::pair<double, double> condition(const Vector& x_new, const Vector& lambda) const;

 private:
  const FeatureMatrix* features_;
  HyperParams hp_;
  CovFactor cf_;
};

std::pair<double, double> gp_condition(const Vector& x_new, const Vector& lambda,
                                       const HyperParams& hp, const FeatureMatrix& features,
                                       double jitter = 0.0);

/// Averages e^{lambda_hat + sigma_hat/2} over every `stride`-th draw, each
/// conditioned with that draw's own lambda and theta.
Prediction predict_unseen_hmc(const hmc::PosteriorSamples& samples, const Vector& x_new,
                              const FeatureMatrix& features, int stride = 1);
/// Same for many query points; K~ is factored once per used draw.
std::vector<Prediction> predict_unseen_hmc(const hmc::PosteriorSamples& samples,
                                           const FeatureMatrix& new_features,
                                           const FeatureMatrix& features, int stride = 1);

/// How the VB Type-2 variance treats the spread of q(lambda).
///   Printed:      sigma_bar = sigma_hat - k~'K~^{-1} Sigma K~^{-1} k~ (clamped at 1e-12)
///   Marginalized: sigma_bar = sigma_hat + k~'K~^{-1} Sigma K~^{-1} k~
/// Marginalized is the exact variance of lambda_new when lambda ~ q is pushed
/// through the GP conditional.
enum class VbType2Variance { Printed, Marginalized };

Prediction predict_unseen_vb(const vb::VariationalPosterior& vp, const Vector& x_new,
                             const FeatureMatrix& features,
                             VbType2Variance variant = VbType2Variance::Marginalized,
                             double jitter = 0.0);
std::vector<Prediction> predict_unseen_vb(const vb::VariationalPosterior& vp,
                                          const FeatureMatrix& new_features,
                                          const FeatureMatrix& features,
                                          VbType2Variance variant = VbType2Variance::Marginalized,
                                          double jitter = 0.0);

/// Means of a prediction list.
Vector prediction_means(const std::vector<Prediction>& predictions);

}  // namespace pgp
