#include "pgp/bfgs.hpp"

#include <cmath>
#include <limits>

#include "pgp/error.hpp"

namespace pgp {
namespace {

struct Trial {
  Vector x;
  double value = std::numeric_limits<double>::infinity();
  Vector grad;
};

Trial evaluate(const Objective& f, Vector x) {
  Trial t;
  t.x = std::move(x);
  try {
    t.value = f(t.x, &t.grad);
  } catch (const NumericalFailure&) {
    t.value = std::numeric_limits<double>::infinity();
  }
  if (!std::isfinite(t.value) || !t.grad.allFinite()) {
    t.value = std::numeric_limits<double>::infinity();
  }
  return t;
}

}  // namespace

BfgsResult minimize_bfgs(const Objective& objective, Vector x0, const BfgsOptions& options,
                         const BfgsObserver& observer) {
  const Index n = x0.size();
  BfgsResult r;
  Trial cur = evaluate(objective, std::move(x0));
  if (!std::isfinite(cur.value)) {
    throw NumericalFailure("BFGS starting point has a non-finite objective");
  }
  r.x = cur.x;
  r.value = cur.value;
  r.grad = cur.grad;
  r.hessian = Matrix::Identity(n, n);
  bool scaled = false;

  for (int it = 0; it < options.max_iterations; ++it) {
    if (r.grad.lpNorm<Eigen::Infinity>() < options.grad_tol) {
      r.converged = true;
      break;
    }
    Eigen::LLT<Matrix> llt(r.hessian);
    Vector p = -llt.solve(r.grad);
    double slope = r.grad.dot(p);
    if (llt.info() != Eigen::Success || !(slope < 0.0)) {
      r.hessian = Matrix::Identity(n, n);
      p = -r.grad;
      slope = r.grad.dot(p);
    }

    // Armijo backtracking from the unit step.
    double step = 1.0;
    Trial next;
    bool found = false;
    for (int k = 0; k <= options.max_backtracks; ++k) {
      next = evaluate(objective, r.x + step * p);
      if (next.value <= r.value + options.armijo_eta * step * slope) {
        found = true;
        break;
      }
      step *= options.armijo_gamma;
    }
    if (!found) {
      r.stalled = true;
      break;
    }

    auto curvature_ok = [&](const Trial& t) {
      const Vector s = t.x - r.x;
      const Vector y = t.grad - r.grad;
      return y.dot(s) > (options.wolfe_c2 - 1.0) * r.grad.dot(s) && y.dot(s) > 0.0;
    };

    // A full step that is too short for the curvature condition is extended
    // while the Armijo condition still holds.
    if (!curvature_ok(next) && step == 1.0) {
      double longer = step;
      for (int k = 0; k < options.max_expansions; ++k) {
        longer *= 2.0;
        Trial t = evaluate(objective, r.x + longer * p);
        if (!(t.value <= r.value + options.armijo_eta * longer * slope)) break;
        next = std::move(t);
        if (curvature_ok(next)) break;
      }
    }

    const Vector s = next.x - r.x;
    const Vector y = next.grad - r.grad;
    const double prev_value = r.value;
    if (curvature_ok(next)) {
      if (!scaled) {
        r.hessian = (y.squaredNorm() / y.dot(s)) * Matrix::Identity(n, n);
        scaled = true;
      }
      const Vector hs = r.hessian * s;
      r.hessian += (y * y.transpose()) / y.dot(s) - (hs * hs.transpose()) / s.dot(hs);
      r.hessian = 0.5 * (r.hessian + r.hessian.transpose());
    } else {
      ++r.skipped_updates;
    }

    r.x = std::move(next.x);
    r.value = next.value;
    r.grad = std::move(next.grad);
    r.iterations = it + 1;
    if (observer) observer(r);

    if (prev_value - r.value <= options.rel_tol * std::max(1.0, std::abs(prev_value))) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged && !r.stalled && r.grad.lpNorm<Eigen::Infinity>() < options.grad_tol) {
    r.converged = true;
  }
  return r;
}

}  // namespace pgp
