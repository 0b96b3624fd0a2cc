#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hfa/types.hpp"

namespace hfa {

// Projected L-BFGS for box constraints. The objective callback returns the
// value and fills the gradient; it may return +infinity (with any gradient)
// to reject a point, which the backtracking line search treats as failure.

struct BoxOptimOptions {
  int max_iterations = 2000;
  double grad_tol = 1e-6;    // projected-gradient infinity norm
  double rel_f_tol = 1e-9;   // relative objective change between accepted steps
  int memory = 8;
  int max_line_search = 60;
};

struct BoxOptimResult {
  Vector x;
  double fx = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;  // "gradient", "ftol", "max_iterations", "line_search"
};

namespace detail {

inline Vector clamp(const Vector& x, const Vector& lo, const Vector& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Infinity norm of the projected gradient: the step to the box-projected
// steepest-descent point.
inline double projected_grad_norm(const Vector& x, const Vector& g,
                                  const Vector& lo, const Vector& hi) {
  return (x - clamp(x - g, lo, hi)).cwiseAbs().maxCoeff();
}

}  // namespace detail

template <typename F>
BoxOptimResult minimize_box(F&& fg, Vector x, const Vector& lo, const Vector& hi,
                            const BoxOptimOptions& opts = {}) {
  const Index n = x.size();
  BoxOptimResult res;
  x = detail::clamp(x, lo, hi);

  Vector g(n), g_new(n), x_new(n);
  double fx = fg(x, g);
  ++res.evaluations;
  if (!std::isfinite(fx)) {
    // Starting point is infeasible for the objective; nothing sensible to do.
    res.x = x;
    res.fx = fx;
    res.status = "bad_start";
    return res;
  }

  std::vector<Vector> mem_s, mem_y;
  std::vector<double> mem_rho;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter + 1;

    if (detail::projected_grad_norm(x, g, lo, hi) < opts.grad_tol) {
      res.converged = true;
      res.status = "gradient";
      break;
    }

    // Two-loop recursion over stored curvature pairs.
    Vector d = -g;
    const int k = static_cast<int>(mem_s.size());
    std::vector<double> alpha(k);
    for (int i = k - 1; i >= 0; --i) {
      alpha[i] = mem_rho[i] * mem_s[i].dot(d);
      d -= alpha[i] * mem_y[i];
    }
    if (k > 0) {
      const double gamma =
          mem_s[k - 1].dot(mem_y[k - 1]) / mem_y[k - 1].squaredNorm();
      d *= gamma;
    }
    for (int i = 0; i < k; ++i) {
      const double beta = mem_rho[i] * mem_y[i].dot(d);
      d += (alpha[i] - beta) * mem_s[i];
    }
    if (d.dot(g) >= 0.0) d = -g;  // not a descent direction; reset

    // Backtracking line search on the projected arc.
    double step = (iter == 0) ? std::min(1.0, 1.0 / std::max(1.0, g.norm())) : 1.0;
    double f_new = fx;
    bool accepted = false;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      x_new = detail::clamp(x + step * d, lo, hi);
      const Vector dx = x_new - x;
      if (dx.cwiseAbs().maxCoeff() == 0.0) break;
      f_new = fg(x_new, g_new);
      ++res.evaluations;
      const double slope = g.dot(dx);
      const double need =
          (slope < 0.0) ? fx + 1e-4 * slope : fx - 1e-12 * std::abs(fx);
      if (std::isfinite(f_new) && f_new <= need) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.status = "line_search";
      break;
    }

    const Vector s = x_new - x;
    const Vector yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (static_cast<int>(mem_s.size()) == opts.memory) {
        mem_s.erase(mem_s.begin());
        mem_y.erase(mem_y.begin());
        mem_rho.erase(mem_rho.begin());
      }
      mem_s.push_back(s);
      mem_y.push_back(yv);
      mem_rho.push_back(1.0 / sy);
    }

    const double df = fx - f_new;
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;

    if (df <= opts.rel_f_tol * std::max(1.0, std::abs(fx))) {
      res.converged = true;
      res.status = "ftol";
      break;
    }
  }

  if (res.status.empty()) res.status = "max_iterations";
  res.x = std::move(x);
  res.fx = fx;
  return res;
}

}  // namespace hfa
