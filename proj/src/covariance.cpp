#include "hfa/covariance.hpp"

#include <Eigen/Cholesky>

namespace hfa {

bool is_symmetric(const Matrix& M, double rel_tol) {
  if (M.rows() != M.cols()) return false;
  const double scale = M.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

bool is_positive_definite(const Matrix& M) {
  Eigen::LLT<Matrix> llt(M);
  return llt.info() == Eigen::Success &&
         (llt.matrixLLT().diagonal().array() > 0.0).all();
}

SampleCovariance SampleCovariance::checked(Matrix S, std::int64_t N,
                                           double ridge) {
  if (S.rows() != S.cols())
    throw StructuralError("covariance matrix must be square, got " +
                          std::to_string(S.rows()) + "x" +
                          std::to_string(S.cols()));
  if (S.rows() < 1) throw StructuralError("covariance matrix is empty");
  if (N < 2) throw StructuralError("sample size must be at least 2");
  if (!S.allFinite())
    throw StructuralError("covariance matrix has non-finite entries");
  if (!is_symmetric(S))
    throw StructuralError("covariance matrix is not symmetric");
  S = ((S + S.transpose()) / 2.0).eval();
  if (ridge != 0.0) {
    if (ridge < 0.0) throw StructuralError("ridge must be nonnegative");
    S.diagonal().array() += ridge;
  }
  if (!is_positive_definite(S))
    throw NotPositiveDefinite(
        ridge == 0.0
            ? "covariance matrix is not positive definite"
            : "covariance matrix is not positive definite even after the ridge");
  return SampleCovariance{std::move(S), N};
}

}  // namespace hfa
