#include "hfa/objective.hpp"

#include <cmath>

#include "hfa/detail/fit_problem.hpp"
#include "hfa/optimize.hpp"
#include "hfa/rng.hpp"

namespace hfa {

Matrix ModelParams::implied_covariance() const {
  Matrix sigma = loadings * loadings.transpose();
  if (offset.size() > 0) sigma += offset;
  sigma.diagonal() += psi2;
  return sigma;
}

DiscrepancyGradient discrepancy_gradient(const ModelParams& params,
                                         const LoadingPattern& pattern,
                                         const SampleCovariance& sample) {
  if (params.loadings.rows() != pattern.rows() ||
      params.loadings.cols() != pattern.cols())
    throw StructuralError("gradient: loadings do not match pattern shape");
  if (sample.dim() != pattern.rows())
    throw StructuralError("gradient: sample dimension mismatch");

  detail::FitProblem problem(pattern.mask, sample.S,
                             static_cast<double>(sample.N),
                             params.offset.size() > 0 ? &params.offset : nullptr);
  const Vector psi = params.psi2.cwiseMax(0.0).cwiseSqrt();
  Vector grad;
  const double f = problem(problem.pack(params.loadings, psi), grad);
  if (!std::isfinite(f))
    throw NotPositiveDefinite("gradient: implied covariance is not PD");

  DiscrepancyGradient out;
  out.dloadings.setZero(pattern.rows(), pattern.cols());
  const auto& free = problem.free_entries();
  for (std::size_t i = 0; i < free.size(); ++i)
    out.dloadings(free[i].first, free[i].second) = grad[static_cast<Index>(i)];
  out.dpsi = grad.tail(pattern.rows());
  return out;
}

namespace {

// Start recipe shared by every fit: free loadings i.i.d. Uniform(-1, 1),
// psi_j = sqrt(max(S_jj / 2, 0.05)).
Vector random_start(detail::FitProblem& problem, const Matrix& S, Rng& rng) {
  Vector x(problem.num_params());
  for (Index i = 0; i < problem.num_free(); ++i) x[i] = rng.uniform(-1.0, 1.0);
  for (Index j = 0; j < problem.rows(); ++j)
    x[problem.num_free() + j] = std::sqrt(std::max(S(j, j) / 2.0, 0.05));
  return x;
}

}  // namespace

RefitResult refit_mle(const LoadingPattern& pattern,
                      const SampleCovariance& sample,
                      const RefitOptions& options, const Matrix* offset,
                      const ModelStart* warm) {
  if (sample.dim() != pattern.rows())
    throw StructuralError("refit: sample dimension does not match pattern");
  if (offset && (offset->rows() != pattern.rows() || offset->cols() != pattern.rows()))
    throw StructuralError("refit: offset dimension mismatch");

  detail::FitProblem problem(pattern.mask, sample.S,
                             static_cast<double>(sample.N), offset);
  BoxOptimOptions optim;
  optim.max_iterations = options.max_iterations;
  optim.grad_tol = options.grad_tol;
  optim.rel_f_tol = options.rel_f_tol;
  const Vector lo = problem.lower_bounds(options.tau);
  const Vector hi = problem.upper_bounds(options.tau);

  BoxOptimResult best;
  bool have_best = false;
  auto consider = [&](const Vector& x0) {
    auto r = minimize_box(problem, x0, lo, hi, optim);
    if (!have_best || r.fx < best.fx) {
      best = std::move(r);
      have_best = true;
    }
  };

  if (warm) consider(problem.pack(warm->loadings, warm->psi));
  const int starts = std::max(1, options.num_starts);
  for (int s = 0; s < starts; ++s) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(s)));
    consider(random_start(problem, sample.S, rng));
  }

  RefitResult out;
  Matrix lambda;
  Vector psi;
  problem.unpack(best.x, lambda, psi);
  // Sign convention: the largest-magnitude entry of each column is positive.
  for (Index c = 0; c < lambda.cols(); ++c) {
    Index at = 0;
    if (lambda.rows() > 0) lambda.col(c).cwiseAbs().maxCoeff(&at);
    if (lambda.rows() > 0 && lambda(at, c) < 0.0) lambda.col(c) = -lambda.col(c);
  }
  out.loadings = std::move(lambda);
  out.psi2 = psi.array().square();
  out.discrepancy = best.fx;
  out.converged = best.converged;
  out.iterations = best.iterations;
  return out;
}

double bic(double fit_discrepancy, int num_free_params, std::int64_t N) {
  if (N < 2) throw StructuralError("bic: sample size must be at least 2");
  if (num_free_params < 0) throw StructuralError("bic: negative parameter count");
  return fit_discrepancy +
         static_cast<double>(num_free_params) * std::log(static_cast<double>(N));
}

}  // namespace hfa
