#include "hfa/alm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hfa/detail/parallel.hpp"
#include "hfa/error.hpp"
#include "hfa/optimize.hpp"
#include "hfa/rng.hpp"

namespace hfa {

std::vector<detail::PairTerm> make_pair_terms(
    int m, const std::vector<std::vector<int>>& block_columns) {
  std::vector<detail::PairTerm> pairs;
  const int c = static_cast<int>(block_columns.size());
  for (int i = 0; i < m; ++i)
    for (int s = 0; s < c; ++s)
      for (int t = s + 1; t < c; ++t)
        for (int a : block_columns[s])
          for (int b : block_columns[t]) pairs.push_back({i, a, b});
  return pairs;
}

double augmented_objective(const Matrix& lambda, const Vector& psi,
                           const std::vector<std::vector<int>>& block_columns,
                           const Vector& beta, double c_pen,
                           const Matrix& offset, const Matrix& sample,
                           double n) {
  const int m = static_cast<int>(lambda.rows());
  const auto pairs = make_pair_terms(m, block_columns);
  if (beta.size() != static_cast<Index>(pairs.size()))
    throw StructuralError("augmented_objective: multiplier size mismatch");
  detail::FitProblem problem(
      BoolMatrix::Constant(lambda.rows(), lambda.cols(), true), sample, n,
      offset.size() > 0 ? &offset : nullptr);
  problem.set_pair_terms(&pairs, &beta, c_pen);
  Vector grad;
  return problem(problem.pack(lambda, psi), grad);
}

ALMStart random_alm_start(int m, int c, int d, const Matrix& sample,
                          std::uint64_t seed) {
  Rng rng(seed);
  ALMStart start;
  start.lambda.resize(m, 1 + c * d);
  // Column-major draw order, pinned for reproducibility.
  for (Index col = 0; col < start.lambda.cols(); ++col)
    for (Index row = 0; row < start.lambda.rows(); ++row)
      start.lambda(row, col) = rng.uniform(-1.0, 1.0);
  start.psi.resize(m);
  for (int j = 0; j < m; ++j)
    start.psi[j] = std::sqrt(std::max(sample(j, j) / 2.0, 0.05));
  return start;
}

namespace {

double max_row_h(const Matrix& lambda,
                 const std::vector<std::vector<int>>& block_columns) {
  const int c = static_cast<int>(block_columns.size());
  double worst = 0.0;
  Vector block_max(c);
  for (Index i = 0; i < lambda.rows(); ++i) {
    for (int s = 0; s < c; ++s) {
      double mag = 0.0;
      for (int col : block_columns[s])
        mag = std::max(mag, std::abs(lambda(i, col)));
      block_max[s] = mag;
    }
    worst = std::max(worst, h_second_largest(block_max));
  }
  return worst;
}

}  // namespace

ALMSolution alm_run(int c, int d, const Matrix& offset, const Matrix& sample,
                    double n, const ALMStart& start, const ALMConfig& config) {
  if (c < 2) throw StructuralError("alm_run: need at least two blocks");
  if (d < 1) throw StructuralError("alm_run: block width must be positive");
  const int m = static_cast<int>(sample.rows());
  if (start.lambda.rows() != m || start.lambda.cols() != 1 + c * d ||
      start.psi.size() != m)
    throw StructuralError("alm_run: start shape mismatch");

  const auto block_cols = uniform_block_columns(c, d);
  const auto pairs = make_pair_terms(m, block_cols);
  detail::FitProblem problem(BoolMatrix::Constant(m, 1 + c * d, true), sample,
                             n, offset.size() > 0 ? &offset : nullptr);

  BoxOptimOptions inner;
  inner.max_iterations = config.inner_max_iterations;
  inner.rel_f_tol = config.inner_rel_f_tol;
  const Vector lo = problem.lower_bounds(config.tau);
  const Vector hi = problem.upper_bounds(config.tau);

  Vector beta = Vector::Zero(static_cast<Index>(pairs.size()));
  double c_pen = config.initial_penalty;
  Vector x = problem.pack(start.lambda, start.psi);
  const double denom = std::sqrt(static_cast<double>(m) * (2.0 + d));

  ALMSolution sol;
  problem.set_pair_terms(&pairs, &beta, c_pen);
  double g_prev_norm = problem.pair_products(x).norm();

  Matrix lambda;
  Vector psi;
  for (int pass = 0;; ++pass) {
    for (int outer = 1; outer <= config.max_outer; ++outer) {
      ++sol.outer_iterations;
      problem.set_pair_terms(&pairs, &beta, c_pen);
      inner.grad_tol = outer <= config.early_outer ? config.inner_grad_tol_early
                                                   : config.inner_grad_tol;
      BoxOptimResult res = minimize_box(problem, x, lo, hi, inner);

      const Vector g = problem.pair_products(res.x);
      const double g_norm = g.norm();
      beta += c_pen * g;

      const double param_change = (res.x - x).norm() / denom;
      problem.unpack(res.x, lambda, psi);
      const double h_max = max_row_h(lambda, block_cols);
      x = std::move(res.x);
      sol.constraint_norm = g_norm;
      sol.h_max = h_max;

      if (param_change < config.delta1 && h_max < config.delta2) {
        sol.converged = true;
        break;
      }
      if (g_norm > config.c_theta * g_prev_norm) c_pen *= config.c_sigma;
      g_prev_norm = g_norm;
    }
    if (sol.converged || pass >= config.max_restarts) break;
    // Warm restart: multipliers reset, escalated penalty retained.
    beta.setZero();
    ++sol.restarts_used;
  }

  problem.unpack(x, sol.loadings, sol.psi);
  sol.objective = problem.discrepancy_at(x);

  const PartitionScan scan =
      scan_partition(sol.loadings, block_cols, config.delta2);
  sol.ambiguous_rows = scan.ambiguous_rows;
  sol.rows_per_block =
      scan.ok() ? scan.rows_per_block
                : resolve_ambiguous_by_max(sol.loadings, block_cols, scan);
  sol.partition = make_partition(sol.rows_per_block);
  sol.admissible = true;
  for (const auto& rows : sol.rows_per_block)
    if (static_cast<int>(rows.size()) < 3) sol.admissible = false;
  return sol;
}

std::string MultiStartLog::to_string() const {
  std::ostringstream os;
  os << "batches=" << batches << " runs=" << total_runs
     << " converged=" << converged << " admissible=" << admissible
     << (degraded ? " degraded" : "");
  return os.str();
}

ALMSolution multi_start_solve(int c, int d, const Matrix& offset,
                              const Matrix& sample, double n,
                              const ALMConfig& config, std::uint64_t seed,
                              MultiStartLog* log) {
  const int m = static_cast<int>(sample.rows());
  MultiStartLog local;
  MultiStartLog& lg = log ? *log : local;
  lg = {};

  ALMSolution best_admissible, best_converged;
  bool have_admissible = false, have_converged = false;

  for (int batch = 0; batch < config.max_batches; ++batch) {
    ++lg.batches;
    std::vector<ALMSolution> batch_solutions(
        static_cast<std::size_t>(config.num_starts));
    detail::parallel_for(config.num_starts, config.threads, [&](int i) {
      const std::uint64_t run_seed = derive_seed(
          seed, static_cast<std::uint64_t>(batch) * config.num_starts + i);
      const ALMStart start = random_alm_start(m, c, d, sample, run_seed);
      batch_solutions[static_cast<std::size_t>(i)] =
          alm_run(c, d, offset, sample, n, start, config);
    });

    for (auto& sol : batch_solutions) {
      ++lg.total_runs;
      if (!sol.converged) continue;
      ++lg.converged;
      lg.max_h_converged = std::max(lg.max_h_converged, sol.h_max);
      if (!have_converged || sol.objective < best_converged.objective) {
        best_converged = sol;
        have_converged = true;
      }
      if (!sol.admissible) continue;
      ++lg.admissible;
      if (!have_admissible || sol.objective < best_admissible.objective) {
        best_admissible = sol;
        have_admissible = true;
      }
    }
    if (lg.admissible >= config.min_admissible) break;
  }

  if (have_admissible) return best_admissible;
  lg.degraded = true;
  if (have_converged) return best_converged;
  throw SolverFailure("augmented Lagrangian search produced no converged "
                      "solution: " + lg.to_string());
}

}  // namespace hfa
