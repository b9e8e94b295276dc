#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace pgp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Content feature vectors, one row per content. Binary features are stored
/// as 0.0/1.0 and enter the kernel exactly like continuous ones.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(Matrix values);

  Index contents() const noexcept { return values_.rows(); }
  Index dims() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  Vector row(Index m) const { return values_.row(m).transpose(); }

  FeatureMatrix select_rows(std::span<const Index> rows) const;

 private:
  Matrix values_;
};

/// Kernel hyperparameters theta = (eta, alpha_0, ..., alpha_Q).
///
/// Packed parameter index convention, shared with every log-space routine:
/// index 0 is eta, index 1 is alpha_0, index q + 1 is alpha_q.
struct HyperParams {
  double eta = 1.0;
  Vector alphas;  // alphas[0] = vertical scale, alphas[1..Q] = relevances

  HyperParams() = default;
  HyperParams(double eta_, Vector alphas_) : eta(eta_), alphas(std::move(alphas_)) {}

  Index feature_dims() const noexcept { return alphas.size() - 1; }
  Index packed_size() const noexcept { return alphas.size() + 1; }

  /// Throws InvalidInput unless eta > 0, alpha_0 > 0, alpha_q >= 0.
  void validate() const;
  void validate_for(const FeatureMatrix& features) const;

  /// [log eta, log alpha_0, ..., log alpha_Q]. Zero relevances map to -inf.
  Vector to_log() const;
  static HyperParams from_log(const Vector& phi);

  /// theta in packed order.
  Vector packed() const;
};

double sek_entry(std::span<const double> xi, std::span<const double> xj,
                 const HyperParams& hp);
double sek_entry(const Vector& xi, const Vector& xj, const HyperParams& hp);

/// Per-dimension squared coordinate differences, D_q[i][j] = (x_qi - x_qj)^2.
/// Kernel evaluation and log-space derivatives both reuse them.
class SquaredDistances {
 public:
  SquaredDistances() = default;
  explicit SquaredDistances(const FeatureMatrix& features);

  Index contents() const noexcept { return n_; }
  Index dims() const noexcept { return static_cast<Index>(per_dim_.size()); }
  const Matrix& dim(Index q) const { return per_dim_[static_cast<std::size_t>(q)]; }

  /// Unregularized K, bit-identical to sek_entry on every pair.
  Matrix kernel(const HyperParams& hp) const;

 private:
  Index n_ = 0;
  std::vector<Matrix> per_dim_;
};

/// K (without eta) over all rows of `features`.
Matrix kernel_matrix(const FeatureMatrix& features, const HyperParams& hp);

/// [K(x_1, x_new), ..., K(x_M, x_new)].
Vector cross_kernel(const FeatureMatrix& features, const Vector& x_new,
                    const HyperParams& hp);

/// Immutable Cholesky factorization of K~ = K + (eta + jitter) I.
class CovFactor {
 public:
  Index size() const noexcept { return ktilde_.rows(); }
  const Matrix& ktilde() const noexcept { return ktilde_; }
  Matrix chol() const { return llt_.matrixL(); }
  double logdet() const noexcept { return logdet_; }
  /// Diagonal loading actually applied on top of eta (requested + ladder).
  double jitter() const noexcept { return jitter_; }

  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;

  /// diag(K~^{-1}) from the columns of L^{-1}; never forms K~^{-1}.
  Vector diag_of_inverse() const;
  /// Full K~^{-1}; only for trace terms of hyperparameter gradients.
  Matrix inverse() const;

  /// Factor `base + (eta + jitter) I`. When that fails, retries with jitter
  /// raised by 1e-10, 1e-9, ..., 1e-4 times trace(base)/M before giving up.
  static CovFactor factor(const Matrix& base, double eta, double jitter);

 private:
  Matrix ktilde_;
  Eigen::LLT<Matrix> llt_;
  double logdet_ = 0.0;
  double jitter_ = 0.0;
};

/// K~ = K + (eta + jitter) I, factored.
CovFactor build_cov(const FeatureMatrix& features, const HyperParams& hp,
                    double jitter = 0.0);

/// dK~/d phi for phi = log theta_which (packed index convention above).
Matrix cov_grad(const FeatureMatrix& features, const HyperParams& hp, Index which);
Matrix cov_grad(const SquaredDistances& dist, const Matrix& kernel,
                const HyperParams& hp, Index which);

}  // namespace pgp
