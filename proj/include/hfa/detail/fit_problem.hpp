#pragma once

#include <limits>
#include <vector>

#include <Eigen/Cholesky>

#include "hfa/types.hpp"

namespace hfa::detail {

/// One bilinear coupling lambda(row, col_a) * lambda(row, col_b) between two
/// column blocks, with its own multiplier.
struct PairTerm {
  int row;
  int col_a;
  int col_b;
};

/// Objective for patterned likelihood fits and their augmented variants.
/// Parameters are the free loadings (column-major order over the mask)
/// followed by psi (square roots of the unique variances):
///
///   f(x) = n * ( logdet(Sigma) + tr(S Sigma^{-1}) - logdet(S) - m )
///          + sum_p beta_p g_p + (c_pen / 2) sum_p g_p^2
///
/// with Sigma = offset + Lambda Lambda^T + diag(psi^2) and g_p the pair
/// products. Returns +infinity when Sigma is not positive definite; the
/// caller's line search backtracks off such points.
class FitProblem {
 public:
  FitProblem(BoolMatrix mask, const Matrix& sample, double n,
             const Matrix* offset = nullptr)
      : mask_(std::move(mask)),
        sample_(&sample),
        offset_(offset),
        n_(n),
        m_(mask_.rows()),
        k_(mask_.cols()) {
    for (Index c = 0; c < k_; ++c)
      for (Index r = 0; r < m_; ++r)
        if (mask_(r, c)) free_.emplace_back(static_cast<int>(r), static_cast<int>(c));
    Eigen::LLT<Matrix> llt(sample);
    logdet_sample_ = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    lambda_.setZero(m_, k_);
    sigma_.setZero(m_, m_);  // rank updates accumulate in place; size up front
  }

  void set_pair_terms(const std::vector<PairTerm>* pairs, const Vector* beta,
                      double c_pen) {
    pairs_ = pairs;
    beta_ = beta;
    c_pen_ = c_pen;
    if (pairs_ && pairs_ != indexed_pairs_) {
      pair_idx_.resize(2 * pairs_->size());
      for (std::size_t p = 0; p < pairs_->size(); ++p) {
        const PairTerm& t = (*pairs_)[p];
        pair_idx_[2 * p] = t.col_a * static_cast<int>(m_) + t.row;
        pair_idx_[2 * p + 1] = t.col_b * static_cast<int>(m_) + t.row;
      }
      indexed_pairs_ = pairs_;
    }
  }

  Index num_free() const { return static_cast<Index>(free_.size()); }
  Index num_params() const { return num_free() + m_; }
  Index rows() const { return m_; }
  Index cols() const { return k_; }
  const std::vector<std::pair<int, int>>& free_entries() const { return free_; }

  Vector pack(const Matrix& lambda, const Vector& psi) const {
    Vector x(num_params());
    for (std::size_t i = 0; i < free_.size(); ++i)
      x[static_cast<Index>(i)] = lambda(free_[i].first, free_[i].second);
    x.tail(m_) = psi;
    return x;
  }

  void unpack(const Vector& x, Matrix& lambda, Vector& psi) const {
    lambda.setZero(m_, k_);
    for (std::size_t i = 0; i < free_.size(); ++i)
      lambda(free_[i].first, free_[i].second) = x[static_cast<Index>(i)];
    psi = x.tail(m_);
  }

  Vector lower_bounds(double tau) const {
    Vector lo(num_params());
    lo.head(num_free()).setConstant(-tau);
    lo.tail(m_).setZero();
    return lo;
  }

  Vector upper_bounds(double tau) const {
    Vector hi(num_params());
    hi.head(num_free()).setConstant(tau);
    hi.tail(m_).setConstant(std::numeric_limits<double>::infinity());
    return hi;
  }

  /// Value and gradient; +infinity when the implied covariance fails its
  /// Cholesky factorization.
  double operator()(const Vector& x, Vector& grad) {
    unpack(x, lambda_, psi_);
    // Only the lower triangle feeds the factorization; skip the upper half.
    sigma_.setZero();
    sigma_.selfadjointView<Eigen::Lower>().rankUpdate(lambda_);
    if (offset_) sigma_ += *offset_;
    sigma_.diagonal() += psi_.array().square().matrix();

    llt_.compute(sigma_);
    if (llt_.info() != Eigen::Success)
      return std::numeric_limits<double>::infinity();
    const auto diag = llt_.matrixLLT().diagonal().array();
    if (!(diag > 0.0).all()) return std::numeric_limits<double>::infinity();
    const double logdet_sigma = 2.0 * diag.log().sum();

    x_solve_ = llt_.solve(*sample_);  // Sigma^{-1} S
    double f = n_ * (logdet_sigma + x_solve_.trace() - logdet_sample_ -
                     static_cast<double>(m_));
    if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();

    // M = n (Sigma^{-1} - Sigma^{-1} S Sigma^{-1}) = n Sigma^{-1} (I - S Sigma^{-1});
    // gradient in Lambda is 2 M Lambda.
    work_.noalias() = -x_solve_.transpose();
    work_.diagonal().array() += 1.0;
    mmat_ = llt_.solve(work_);
    mmat_ *= n_;
    glambda_.noalias() = 2.0 * mmat_ * lambda_;

    if (pairs_ && c_pen_ >= 0.0) {
      const double* lam = lambda_.data();
      double* gl = glambda_.data();
      const double* bt = beta_->data();
      const int* idx = pair_idx_.data();
      const double cp = c_pen_;
      const std::size_t np = pairs_->size();
      for (std::size_t p = 0; p < np; ++p) {
        const int ia = idx[2 * p];
        const int ib = idx[2 * p + 1];
        const double a = lam[ia];
        const double b = lam[ib];
        const double g = a * b;
        const double bp = bt[p];
        const double w = bp + cp * g;
        f += bp * g + 0.5 * cp * g * g;
        gl[ia] += w * b;
        gl[ib] += w * a;
      }
    }

    grad.resize(num_params());
    for (std::size_t i = 0; i < free_.size(); ++i)
      grad[static_cast<Index>(i)] = glambda_(free_[i].first, free_[i].second);
    for (Index j = 0; j < m_; ++j)
      grad[num_free() + j] = 2.0 * psi_[j] * mmat_(j, j);
    return f;
  }

  /// Plain discrepancy at x, ignoring any pair terms.
  double discrepancy_at(const Vector& x) {
    const auto* saved = pairs_;
    pairs_ = nullptr;
    Vector g;
    const double f = (*this)(x, g);
    pairs_ = saved;
    return f;
  }

  /// Current pair products at x (for multiplier updates).
  Vector pair_products(const Vector& x) {
    unpack(x, lambda_, psi_);
    Vector g(pairs_ ? static_cast<Index>(pairs_->size()) : 0);
    if (pairs_)
      for (std::size_t p = 0; p < pairs_->size(); ++p) {
        const auto& t = (*pairs_)[p];
        g[static_cast<Index>(p)] = lambda_(t.row, t.col_a) * lambda_(t.row, t.col_b);
      }
    return g;
  }

 private:
  BoolMatrix mask_;
  const Matrix* sample_;
  const Matrix* offset_;
  double n_;
  Index m_, k_;
  std::vector<std::pair<int, int>> free_;
  double logdet_sample_ = 0.0;

  const std::vector<PairTerm>* pairs_ = nullptr;
  const Vector* beta_ = nullptr;
  double c_pen_ = -1.0;
  const std::vector<PairTerm>* indexed_pairs_ = nullptr;
  std::vector<int> pair_idx_;  // flat column-major positions, 2 per pair

  // workspace
  Matrix lambda_, sigma_, x_solve_, mmat_, glambda_, work_;
  Vector psi_;
  Eigen::LLT<Matrix> llt_;
};

}  // namespace hfa::detail
