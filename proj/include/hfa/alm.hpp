#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hfa/block_partition.hpp"
#include "hfa/detail/fit_problem.hpp"
#include "hfa/types.hpp"

namespace hfa {

// Augmented Lagrangian search for a blocked loading structure. The local
// model over m variables has one dense leading column plus c blocks of d
// columns; cross-block products lambda(i, a) * lambda(i, b) are driven to
// zero through multipliers and a quadratic penalty, so that each row ends up
// attached to a single block. The surviving blocks are the candidate child
// factors.

struct ALMConfig {
  double c_theta = 0.25;     // escalate the penalty when the constraint norm
  double c_sigma = 10.0;     // fails to shrink by factor c_theta; multiply by c_sigma
  double delta1 = 0.01;      // parameter-change stopping tolerance
  double delta2 = 0.01;      // off-block magnitude tolerance (also partition tol)
  int max_outer = 100;       // multiplier updates per pass
  int max_restarts = 5;      // warm restarts after an exhausted pass
  int num_starts = 100;      // random starts per batch
  int min_admissible = 50;   // quorum of usable solutions before stopping early
  int max_batches = 5;
  double initial_penalty = 1.0;
  double tau = 10.0;         // loading bound
  // Subproblems are solved inexactly: the multiplier update re-solves each
  // outer pass, so a tight inner optimum buys nothing until the penalty has
  // settled. The final refit, not the search, delivers precise estimates.
  int inner_max_iterations = 300;
  double inner_grad_tol = 1e-6;
  double inner_grad_tol_early = 1e-5;  // used while outer iteration <= early_outer
  int early_outer = 3;
  double inner_rel_f_tol = 1e-9;
  int threads = 0;  // 0 = all hardware threads
};

struct ALMSolution {
  Matrix loadings;  // m x (1 + c*d)
  Vector psi;       // square roots of unique variances
  BlockPartition partition;                      // nonempty blocks by smallest row
  std::vector<std::vector<int>> rows_per_block;  // per block position, may be empty
  double objective = 0.0;        // plain discrepancy at the solution
  double constraint_norm = 0.0;  // Euclidean norm of the final pair products
  double h_max = 0.0;            // max over rows of the second-largest block magnitude
  bool converged = false;
  bool admissible = false;  // every block position captured at least 3 rows
  int outer_iterations = 0;
  int restarts_used = 0;
  std::vector<int> ambiguous_rows;  // rows resolved by the magnitude fallback
};

/// Second largest value of a sequence (the largest when fewer than two
/// elements). For a row's per-block magnitude maxima this measures how close
/// the row is to loading on a single block.
template <typename Derived>
double h_second_largest(const Eigen::DenseBase<Derived>& values) {
  double best = -std::numeric_limits<double>::infinity();
  double second = best;
  for (Index i = 0; i < values.size(); ++i) {
    const double v = values.derived()(i);
    if (v > best) {
      second = best;
      best = v;
    } else if (v > second) {
      second = v;
    }
  }
  if (values.size() < 2) return values.size() == 1 ? best : 0.0;
  return second;
}

/// Cross-block coupling terms in canonical order: rows ascending, block pairs
/// (s, s') with s < s' in lexicographic order, columns within a pair in group
/// order. Multiplier vectors align with this order.
std::vector<detail::PairTerm> make_pair_terms(
    int m, const std::vector<std::vector<int>>& block_columns);

/// Discrepancy plus multiplier and quadratic penalty terms; beta aligns with
/// make_pair_terms order. `offset` may be empty (0 x 0) for none.
double augmented_objective(const Matrix& lambda, const Vector& psi,
                           const std::vector<std::vector<int>>& block_columns,
                           const Vector& beta, double c_pen,
                           const Matrix& offset, const Matrix& sample, double n);

struct ALMStart {
  Matrix lambda;
  Vector psi;
};

/// One augmented Lagrangian run from a given start. `offset` may be empty.
ALMSolution alm_run(int c, int d, const Matrix& offset, const Matrix& sample,
                    double n, const ALMStart& start, const ALMConfig& config);

/// Start used by the multi-start driver: loadings i.i.d. Uniform(-1, 1),
/// psi_j = sqrt(max(S_jj / 2, 0.05)).
ALMStart random_alm_start(int m, int c, int d, const Matrix& sample,
                          std::uint64_t seed);

struct MultiStartLog {
  int batches = 0;
  int total_runs = 0;
  int converged = 0;
  int admissible = 0;  // converged runs whose blocks all have >= 3 rows
  bool degraded = false;  // no admissible solution; best converged returned
  double max_h_converged = 0.0;  // worst off-block magnitude over converged runs
  std::string to_string() const;
};

/// Batches of random starts until the admissible quorum or the batch budget
/// is reached; returns the smallest-objective converged admissible solution.
/// Falls back to the best converged solution (degraded flag in the log) when
/// no admissible one exists, and throws SolverFailure when nothing converged.
ALMSolution multi_start_solve(int c, int d, const Matrix& offset,
                              const Matrix& sample, double n,
                              const ALMConfig& config, std::uint64_t seed,
                              MultiStartLog* log = nullptr);

}  // namespace hfa
