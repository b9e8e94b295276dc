// Shared oracles for the unit and acceptance tests. Everything here is
// written from first principles and does not call into the library code it
// is used to check.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pgp::testing {

inline Eigen::MatrixXd random_features(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) x(i, j) = z(rng);
  }
  return x;
}

/// Central differences of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd a = x;
    Eigen::VectorXd b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|b_i|, floor)
inline double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                            double floor = 1.0) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
  }
  return worst;
}

/// Posterior of one log-rate lambda ~ N(0, prior_var) after `slots` Poisson
/// slots summing to `total`, by trapezoid quadrature on a wide grid.
struct Quadrature1d {
  double mean = 0.0;
  double variance = 0.0;
  /// log p(d | theta) including the -sum log d! term passed in.
  double log_evidence = 0.0;
};

inline Quadrature1d poisson_lognormal_quadrature(double total, double slots, double prior_var,
                                                 double log_factorials, int points = 200001) {
  // Locate the mode by bisection on the log-density derivative.
  auto dlog = [&](double l) { return total - slots * std::exp(l) - l / prior_var; };
  double lo = -50.0;
  double hi = 50.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (dlog(mid) > 0.0 ? lo : hi) = mid;
  }
  const double mode = 0.5 * (lo + hi);
  const double curvature = slots * std::exp(mode) + 1.0 / prior_var;
  const double half_width = 40.0 / std::sqrt(curvature);
  const double a = mode - half_width;
  const double h = 2.0 * half_width / (points - 1);
  auto log_joint = [&](double l) {
    return total * l - slots * std::exp(l) - 0.5 * l * l / prior_var;
  };
  const double peak = log_joint(mode);
  double z = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  for (int i = 0; i < points; ++i) {
    const double l = a + h * i;
    const double w = (i == 0 || i == points - 1) ? 0.5 : 1.0;
    const double p = w * std::exp(log_joint(l) - peak);
    z += p;
    m1 += p * l;
    m2 += p * l * l;
  }
  Quadrature1d q;
  q.mean = m1 / z;
  q.variance = m2 / z - q.mean * q.mean;
  q.log_evidence = peak + std::log(z * h) - 0.5 * std::log(2.0 * M_PI * prior_var) -
                   log_factorials;
  return q;
}

/// Exhaustive 0/1 knapsack over every subset (n <= 20).
struct Enumerated {
  double value = 0.0;
  std::uint32_t subset = 0;
};

inline Enumerated knapsack_enumerate(const std::vector<double>& values,
                                     const std::vector<double>& sizes, double capacity) {
  Enumerated best;
  const auto n = static_cast<std::uint32_t>(values.size());
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double v = 0.0;
    double s = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        v += values[i];
        s += sizes[i];
      }
    }
    if (s <= capacity && v > best.value) best = {v, mask};
  }
  return best;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pgp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace pgp::testing
