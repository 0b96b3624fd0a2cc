#pragma once

#include <cstdint>

#include "hfa/error.hpp"
#include "hfa/types.hpp"

namespace hfa {

/// A sample covariance matrix together with the sample size it came from.
/// `checked` construction enforces symmetry (relative tolerance 1e-12,
/// after which the matrix is symmetrized exactly) and positive definiteness.
struct SampleCovariance {
  Matrix S;
  std::int64_t N = 0;

  Index dim() const { return S.rows(); }

  /// Throws StructuralError (shape, symmetry, N < 2) or NotPositiveDefinite.
  /// `ridge` is added to the diagonal before the definiteness check.
  static SampleCovariance checked(Matrix S, std::int64_t N, double ridge = 0.0);
};

/// True when M is symmetric up to `rel_tol` times its largest magnitude.
bool is_symmetric(const Matrix& M, double rel_tol = 1e-12);

/// Smallest eigenvalue sign probe: true when the symmetric matrix M admits a
/// Cholesky factorization.
bool is_positive_definite(const Matrix& M);

}  // namespace hfa
