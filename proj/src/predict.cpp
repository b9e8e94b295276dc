#include "pgp/predict.hpp"

#include <algorithm>
#include <cmath>

#include "pgp/error.hpp"

namespace pgp {
namespace {

constexpr double kVarianceFloor = 1e-12;

// Count variance of a Poisson whose log-rate is N(m, v).
double lognormal_poisson_variance(double m, double v) {
  return std::expm1(v) * std::exp(2.0 * m + v) + std::exp(m + 0.5 * v);
}

void check_query(const FeatureMatrix& features, const Vector& x_new) {
  if (x_new.size() != features.dims()) {
    throw InvalidInput("query feature vector has the wrong length");
  }
  if (!x_new.allFinite()) throw InvalidInput("query features must be finite");
}

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::HMC: return "hmc";
    case Backend::VB: return "vb";
    case Backend::MLE: return "mle";
  }
  return "?";
}

Prediction predict_seen(const vb::VariationalPosterior& vp, Index m) {
  if (m < 0 || m >= vp.contents()) throw InvalidInput("content index out of range");
  Prediction p;
  p.backend = Backend::VB;
  p.kind = PredictionKind::Type1;
  p.mean = std::exp(vp.mu[m] + 0.5 * vp.sigma[m]);
  p.variance = lognormal_poisson_variance(vp.mu[m], vp.sigma[m]);
  return p;
}

Prediction predict_seen(const hmc::PosteriorSamples& samples, Index m) {
  if (m < 0 || m >= samples.contents()) throw InvalidInput("content index out of range");
  if (samples.draws() < 1) throw InvalidInput("no posterior draws");
  const Vector rates = samples.lambda_draws.col(m).array().exp();
  const double mean = rates.mean();
  Prediction p;
  p.backend = Backend::HMC;
  p.kind = PredictionKind::Type1;
  p.mean = mean;
  p.variance = mean + (rates.array() - mean).square().mean();
  return p;
}

std::vector<Prediction> predict_seen_all(const vb::VariationalPosterior& vp) {
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(vp.contents()));
  for (Index m = 0; m < vp.contents(); ++m) out.push_back(predict_seen(vp, m));
  return out;
}

std::vector<Prediction> predict_seen_all(const hmc::PosteriorSamples& samples) {
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(samples.contents()));
  for (Index m = 0; m < samples.contents(); ++m) out.push_back(predict_seen(samples, m));
  return out;
}

GpConditioner::GpConditioner(const FeatureMatrix& features, const HyperParams& hp,
                             double jitter)
    : features_(&features), hp_(hp), cf_(build_cov(features, hp, jitter)) {}

Vector GpConditioner::weights(const Vector& x_new) const {
  check_query(*features_, x_new);
  return cf_.solve(cross_kernel(*features_, x_new, hp_));
}

double GpConditioner::conditional_variance(const Vector& x_new, const Vector& weights) const {
  const Vector k = cross_kernel(*features_, x_new, hp_);
  const double prior = sek_entry(x_new, x_new, hp_) + hp_.eta;
  return std::max(prior - k.dot(weights), 0.0);
}

std::pair<double, double> GpConditioner::condition(const Vector& x_new,
                                                   const Vector& lambda) const {
  if (lambda.size() != features_->contents()) {
    throw InvalidInput("lambda length must equal the number of training contents");
  }
  const Vector w = weights(x_new);
  return {w.dot(lambda), conditional_variance(x_new, w)};
}

std::pair<double, double> gp_condition(const Vector& x_new, const Vector& lambda,
                                       const HyperParams& hp, const FeatureMatrix& features,
                                       double jitter) {
  hp.validate_for(features);
  return GpConditioner(features, hp, jitter).condition(x_new, lambda);
}

std::vector<Prediction> predict_unseen_hmc(const hmc::PosteriorSamples& samples,
                                           const FeatureMatrix& new_features,
                                           const FeatureMatrix& features, int stride) {
  if (samples.draws() < 1) throw InvalidInput("no posterior draws");
  if (stride < 1) throw InvalidInput("draw stride must be >= 1");
  if (samples.contents() != features.contents()) {
    throw InvalidInput("draws and training features disagree on M");
  }
  if (new_features.dims() != features.dims()) {
    throw InvalidInput("query features have the wrong dimension");
  }
  const Index j_count = new_features.contents();
  Vector first(j_count);
  Vector second(j_count);
  first.setZero();
  second.setZero();
  int used = 0;
  for (Index s = 0; s < samples.draws(); s += stride) {
    const GpConditioner cond(features, samples.hyper(s));
    const Vector lambda = samples.lambda_draws.row(s).transpose();
    for (Index j = 0; j < j_count; ++j) {
      const auto [mean, var] = cond.condition(new_features.row(j), lambda);
      first[j] += std::exp(mean + 0.5 * var);
      second[j] += std::exp(2.0 * mean + 2.0 * var);
    }
    ++used;
  }
  std::vector<Prediction> out(static_cast<std::size_t>(j_count));
  for (Index j = 0; j < j_count; ++j) {
    Prediction& p = out[static_cast<std::size_t>(j)];
    p.backend = Backend::HMC;
    p.kind = PredictionKind::Type2;
    p.mean = first[j] / used;
    p.variance = std::max(p.mean + second[j] / used - p.mean * p.mean, 0.0);
  }
  return out;
}

Prediction predict_unseen_hmc(const hmc::PosteriorSamples& samples, const Vector& x_new,
                              const FeatureMatrix& features, int stride) {
  check_query(features, x_new);
  return predict_unseen_hmc(samples, FeatureMatrix(x_new.transpose()), features, stride)[0];
}

std::vector<Prediction> predict_unseen_vb(const vb::VariationalPosterior& vp,
                                          const FeatureMatrix& new_features,
                                          const FeatureMatrix& features,
                                          VbType2Variance variant, double jitter) {
  vp.validate();
  if (vp.contents() != features.contents()) {
    throw InvalidInput("variational state and training features disagree on M");
  }
  if (new_features.dims() != features.dims()) {
    throw InvalidInput("query features have the wrong dimension");
  }
  vp.theta.validate_for(features);
  const GpConditioner cond(features, vp.theta, jitter);
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(new_features.contents()));
  for (Index j = 0; j < new_features.contents(); ++j) {
    const Vector x = new_features.row(j);
    const Vector w = cond.weights(x);
    const double mean = w.dot(vp.mu);
    const double spread = w.cwiseProduct(w).dot(vp.sigma);
    double var = cond.conditional_variance(x, w);
    Prediction p;
    p.backend = Backend::VB;
    p.kind = PredictionKind::Type2;
    if (variant == VbType2Variance::Printed) {
      var -= spread;
      if (var < kVarianceFloor) {
        var = kVarianceFloor;
        p.clamped = true;
      }
    } else {
      var += spread;
    }
    p.mean = std::exp(mean + 0.5 * var);
    p.variance = lognormal_poisson_variance(mean, var);
    out.push_back(p);
  }
  return out;
}

Prediction predict_unseen_vb(const vb::VariationalPosterior& vp, const Vector& x_new,
                             const FeatureMatrix& features, VbType2Variance variant,
                             double jitter) {
  check_query(features, x_new);
  return predict_unseen_vb(vp, FeatureMatrix(x_new.transpose()), features, variant, jitter)[0];
}

Vector prediction_means(const std::vector<Prediction>& predictions) {
  Vector out(static_cast<Index>(predictions.size()));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    out[static_cast<Index>(i)] = predictions[i].mean;
  }
  return out;
}

}  // namespace pgp
