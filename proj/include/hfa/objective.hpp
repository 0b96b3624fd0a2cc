#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Cholesky>

#include "hfa/covariance.hpp"
#include "hfa/error.hpp"
#include "hfa/factor_tree.hpp"
#include "hfa/types.hpp"

namespace hfa {

/// Model state for a patterned factor decomposition: the implied covariance
/// is offset + loadings * loadings^T + diag(psi2). Structural zeros of
/// `loadings` are exact zeros. `psi2` holds unique variances (may contain
/// exact zeros). `offset` captures loadings of factors fitted earlier; an
/// empty (0 x 0) offset means none.
struct ModelParams {
  Matrix loadings;
  Vector psi2;
  Matrix offset;

  Matrix implied_covariance() const;
};

/// Gaussian likelihood-ratio discrepancy between a model covariance and a
/// sample covariance, scaled by the sample size:
///
///   n * ( logdet(Sigma) + tr(S Sigma^{-1}) - logdet(S) - dim )
///
/// Nonnegative for positive definite inputs, zero iff Sigma == S. Throws
/// NotPositiveDefinite when either matrix fails its factorization.
template <typename DerivedA, typename DerivedB>
double discrepancy(const Eigen::MatrixBase<DerivedA>& sigma,
                   const Eigen::MatrixBase<DerivedB>& sample, double n) {
  const Index m = sigma.rows();
  if (sigma.cols() != m || sample.rows() != m || sample.cols() != m)
    throw StructuralError("discrepancy: dimension mismatch");
  Eigen::LLT<Matrix> ls(sigma.derived());
  if (ls.info() != Eigen::Success)
    throw NotPositiveDefinite("discrepancy: model covariance is not PD");
  Eigen::LLT<Matrix> lt(sample.derived());
  if (lt.info() != Eigen::Success)
    throw NotPositiveDefinite("discrepancy: sample covariance is not PD");
  const double logdet_sigma =
      2.0 * ls.matrixLLT().diagonal().array().log().sum();
  const double logdet_sample =
      2.0 * lt.matrixLLT().diagonal().array().log().sum();
  const double tr = ls.solve(sample.derived()).trace();
  return n * (logdet_sigma + tr - logdet_sample - static_cast<double>(m));
}

/// Analytic gradient of the discrepancy at `params` with respect to the free
/// loadings and to psi (the square roots of psi2). Entries of `dloadings` at
/// structural zeros of the pattern are zero.
struct DiscrepancyGradient {
  Matrix dloadings;
  Vector dpsi;
};

DiscrepancyGradient discrepancy_gradient(const ModelParams& params,
                                         const LoadingPattern& pattern,
                                         const SampleCovariance& sample);

/// Starting point for a patterned fit; used to warm-start refinements.
struct ModelStart {
  Matrix loadings;
  Vector psi;  // square roots of unique variances
};

struct RefitOptions {
  double tau = 10.0;           // loading magnitude bound
  int max_iterations = 2000;   // quasi-Newton iteration cap
  double grad_tol = 1e-6;      // projected-gradient infinity norm
  double rel_f_tol = 1e-9;     // relative objective change
  int num_starts = 3;          // seeded random starts (best-of)
  std::uint64_t seed = 0x5eedf17ULL;
};

struct RefitResult {
  Matrix loadings;      // structural zeros exact
  Vector psi2;          // unique variances
  double discrepancy = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Minimizes the discrepancy over loadings obeying `pattern` (entries bounded
/// by tau in magnitude) and nonnegative unique variances. `offset`, when
/// given, is added to the implied covariance. The result never exceeds the
/// objective at a supplied warm start. Loading signs are normalized so each
/// column's largest-magnitude entry is positive.
RefitResult refit_mle(const LoadingPattern& pattern,
                      const SampleCovariance& sample,
                      const RefitOptions& options = {},
                      const Matrix* offset = nullptr,
                      const ModelStart* warm = nullptr);

/// Bayesian-type information criterion on the discrepancy scale:
/// fit_discrepancy + num_free_params * log(N).
double bic(double fit_discrepancy, int num_free_params, std::int64_t N);

}  // namespace hfa
