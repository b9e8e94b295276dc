#include "pgp/kernel.hpp"

#include <cmath>
#include <sstream>

#include "pgp/error.hpp"

namespace pgp {

FeatureMatrix::FeatureMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw InvalidInput("feature matrix needs at least one content and one dimension");
  }
  if (!values_.allFinite()) {
    throw InvalidInput("feature matrix has non-finite entries");
  }
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const Index> rows) const {
  Matrix out(static_cast<Index>(rows.size()), dims());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= contents()) {
      throw InvalidInput("feature row index out of range");
    }
    out.row(static_cast<Index>(i)) = values_.row(rows[i]);
  }
  return FeatureMatrix(std::move(out));
}

void HyperParams::validate() const {
  if (alphas.size() < 1) throw InvalidInput("hyperparameters need alpha_0");
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw InvalidInput("eta must be finite and > 0");
  }
  if (!(alphas[0] > 0.0) || !std::isfinite(alphas[0])) {
    throw InvalidInput("alpha_0 must be finite and > 0");
  }
  for (Index q = 1; q < alphas.size(); ++q) {
    if (!(alphas[q] >= 0.0) || !std::isfinite(alphas[q])) {
      throw InvalidInput("alpha_q must be finite and >= 0");
    }
  }
}

void HyperParams::validate_for(const FeatureMatrix& features) const {
  validate();
  if (feature_dims() != features.dims()) {
    std::ostringstream msg;
    msg << "hyperparameters cover " << feature_dims() << " feature dims, features have "
        << features.dims();
    throw InvalidInput(msg.str());
  }
}

Vector HyperParams::to_log() const {
  Vector phi(packed_size());
  phi[0] = std::log(eta);
  phi.tail(alphas.size()) = alphas.array().log();
  return phi;
}

HyperParams HyperParams::from_log(const Vector& phi) {
  if (phi.size() < 2) throw InvalidInput("log hyperparameter vector too short");
  return HyperParams(std::exp(phi[0]), phi.tail(phi.size() - 1).array().exp().matrix());
}

Vector HyperParams::packed() const {
  Vector theta(packed_size());
  theta[0] = eta;
  theta.tail(alphas.size()) = alphas;
  return theta;
}

double sek_entry(std::span<const double> xi, std::span<const double> xj,
                 const HyperParams& hp) {
  if (xi.size() != xj.size() || static_cast<Index>(xi.size()) != hp.feature_dims()) {
    throw InvalidInput("sek_entry: feature dimension mismatch");
  }
  double exponent = 0.0;
  for (std::size_t q = 0; q < xi.size(); ++q) {
    const double diff = xi[q] - xj[q];
    exponent += hp.alphas[static_cast<Index>(q) + 1] * (diff * diff);
  }
  return hp.alphas[0] * std::exp(-exponent);
}

double sek_entry(const Vector& xi, const Vector& xj, const HyperParams& hp) {
  return sek_entry(std::span<const double>(xi.data(), static_cast<std::size_t>(xi.size())),
                   std::span<const double>(xj.data(), static_cast<std::size_t>(xj.size())),
                   hp);
}

SquaredDistances::SquaredDistances(const FeatureMatrix& features)
    : n_(features.contents()) {
  per_dim_.reserve(static_cast<std::size_t>(features.dims()));
  for (Index q = 0; q < features.dims(); ++q) {
    Matrix d(n_, n_);
    const auto col = features.values().col(q);
    for (Index j = 0; j < n_; ++j) {
      for (Index i = 0; i < n_; ++i) {
        const double diff = col[i] - col[j];
        d(i, j) = diff * diff;
      }
    }
    per_dim_.push_back(std::move(d));
  }
}

Matrix SquaredDistances::kernel(const HyperParams& hp) const {
  if (hp.feature_dims() != dims()) {
    throw InvalidInput("kernel: hyperparameter/feature dimension mismatch");
  }
  // Same accumulation order as sek_entry so both paths agree bit for bit.
  Matrix exponent = Matrix::Zero(n_, n_);
  for (Index q = 0; q < dims(); ++q) {
    exponent.noalias() += hp.alphas[q + 1] * dim(q);
  }
  const double scale = hp.alphas[0];
  return exponent.unaryExpr([scale](double e) { return scale * std::exp(-e); });
}

Matrix kernel_matrix(const FeatureMatrix& features, const HyperParams& hp) {
  hp.validate_for(features);
  return SquaredDistances(features).kernel(hp);
}

Vector cross_kernel(const FeatureMatrix& features, const Vector& x_new,
                    const HyperParams& hp) {
  hp.validate_for(features);
  if (x_new.size() != features.dims()) {
    throw InvalidInput("cross_kernel: new feature vector has wrong dimension");
  }
  Vector k(features.contents());
  for (Index m = 0; m < features.contents(); ++m) {
    k[m] = sek_entry(features.row(m), x_new, hp);
  }
  return k;
}

Vector CovFactor::solve(const Vector& b) const {
  if (b.size() != size()) throw InvalidInput("solve: right-hand side has wrong length");
  return llt_.solve(b);
}

Matrix CovFactor::solve(const Matrix& b) const {
  if (b.rows() != size()) throw InvalidInput("solve: right-hand side has wrong rows");
  return llt_.solve(b);
}

Vector CovFactor::diag_of_inverse() const {
  const Index n = size();
  Vector diag(n);
  Vector e(n);
  // diag(K^{-1})_i = || L^{-1} e_i ||^2, one triangular solve per column.
  for (Index i = 0; i < n; ++i) {
    e.setZero();
    e[i] = 1.0;
    llt_.matrixL().solveInPlace(e);
    diag[i] = e.squaredNorm();
  }
  return diag;
}

Matrix CovFactor::inverse() const {
  return llt_.solve(Matrix::Identity(size(), size()));
}

CovFactor CovFactor::factor(const Matrix& base, double eta, double jitter) {
  if (base.rows() != base.cols() || base.rows() < 1) {
    throw InvalidInput("factor: matrix must be square and non-empty");
  }
  if (!base.allFinite() || !std::isfinite(eta) || !std::isfinite(jitter) || jitter < 0.0) {
    throw FactorizationFailure("factor: non-finite covariance or jitter", jitter);
  }
  const Index n = base.rows();
  const double scale = base.trace() / static_cast<double>(n);

  std::vector<double> ladder{jitter};
  if (scale > 0.0) {
    for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
      ladder.push_back(jitter + rel * scale);
    }
  }

  CovFactor out;
  for (double j : ladder) {
    out.ktilde_ = base;
    out.ktilde_.diagonal().array() += eta + j;
    out.llt_.compute(out.ktilde_);
    if (out.llt_.info() != Eigen::Success) continue;
    const auto diag = out.llt_.matrixLLT().diagonal();
    if (!(diag.array() > 0.0).all() || !diag.allFinite()) continue;
    out.logdet_ = 2.0 * diag.array().log().sum();
    out.jitter_ = j;
    return out;
  }
  std::ostringstream msg;
  msg << "Cholesky failed for " << n << "x" << n << " covariance; last jitter "
      << ladder.back();
  throw FactorizationFailure(msg.str(), ladder.back());
}

CovFactor build_cov(const FeatureMatrix& features, const HyperParams& hp, double jitter) {
  if (jitter < 0.0) throw InvalidInput("build_cov: jitter must be >= 0");
  return CovFactor::factor(kernel_matrix(features, hp), hp.eta, jitter);
}

Matrix cov_grad(const SquaredDistances& dist, const Matrix& kernel,
                const HyperParams& hp, Index which) {
  const Index n = kernel.rows();
  if (which < 0 || which >= hp.packed_size()) {
    throw InvalidInput("cov_grad: parameter index out of range");
  }
  if (which == 0) return hp.eta * Matrix::Identity(n, n);
  if (which == 1) return kernel;
  // which = q + 1 addresses alpha_q, whose distances live in dim(q - 1).
  return (-hp.alphas[which - 1]) * dist.dim(which - 2).cwiseProduct(kernel);
}

Matrix cov_grad(const FeatureMatrix& features, const HyperParams& hp, Index which) {
  hp.validate_for(features);
  const SquaredDistances dist(features);
  return cov_grad(dist, dist.kernel(hp), hp, which);
}

}  // namespace pgp
