#pragma once

#include <functional>

#include "pgp/kernel.hpp"

namespace pgp {

/// Value and optional gradient of a smooth objective. May throw
/// NumericalFailure; the line search treats that as an infinite value.
using Objective = std::function<double(const Vector& x, Vector* grad)>;

struct BfgsOptions {
  int max_iterations = 50;
  double grad_tol = 1e-6;  // on the infinity norm
  double rel_tol = 1e-10;  // relative decrease per iteration
  double armijo_gamma = 0.5;
  double armijo_eta = 1e-4;
  double wolfe_c2 = 0.9;
  int max_backtracks = 50;
  int max_expansions = 8;
};

struct BfgsResult {
  Vector x;
  double value = 0.0;
  Vector grad;
  Matrix hessian;  // current approximation H, not its inverse
  int iterations = 0;
  int skipped_updates = 0;
  bool converged = false;
  bool stalled = false;  // line search could not find an acceptable step
};

/// Called after every accepted step with the state so far.
using BfgsObserver = std::function<void(const BfgsResult&)>;

/// Quasi-Newton descent with p = -H^{-1} g, Armijo backtracking, and the
/// update H + yy'/(y's) - Hss'H/(s'Hs) applied only when the curvature
/// condition y's > (c2 - 1) g's holds, which keeps H positive definite.
BfgsResult minimize_bfgs(const Objective& objective, Vector x0, const BfgsOptions& options,
                         const BfgsObserver& observer = {});

}  // namespace pgp
