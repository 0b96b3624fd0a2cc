#include "hfa/driver.hpp"

#include <algorithm>
#include <cmath>

#include "hfa/rng.hpp"

namespace hfa {

Matrix accumulate_offset(const std::vector<Vector>& columns,
                         const std::vector<int>& variables) {
  const int m = static_cast<int>(variables.size());
  Matrix offset = Matrix::Zero(m, m);
  Vector local(m);
  for (const Vector& col : columns) {
    for (int a = 0; a < m; ++a)
      local[a] = col[variables[static_cast<std::size_t>(a)] - 1];
    offset.noalias() += local * local.transpose();
  }
  return offset;
}

FitResult fit_hierarchical(const SampleCovariance& sample,
                           const FitConfig& config) {
  const int j = static_cast<int>(sample.dim());

  ICBConfig icb = config.icb;
  icb.alm.threads = config.threads;

  // Factor store in label order; labels are assigned sequentially layer by
  // layer, parents in label order, children in smallest-variable order, which
  // is exactly the canonical labelling.
  std::vector<std::vector<int>> factor_vars;
  std::vector<Vector> columns;  // learned leading column per factor
  std::vector<FactorDiagnostics> log;

  std::vector<int> all(j);
  for (int v = 0; v < j; ++v) all[static_cast<std::size_t>(v)] = v + 1;
  factor_vars.push_back(all);

  std::vector<std::vector<int>> layers{{1}};
  std::vector<int> labels_through_layer{1};  // cumulative factor count

  for (int t = 2;; ++t) {
    const std::vector<int>& parents = layers.back();
    std::vector<int> next_layer;

    // Offset columns come from layers 1..t-2.
    const int cutoff =
        t >= 3 ? labels_through_layer[static_cast<std::size_t>(t - 3)] : 0;
    const std::vector<Vector> shallow(columns.begin(),
                                      columns.begin() + cutoff);

    for (int k : parents) {
      // By value: appending children below reallocates factor_vars.
      const std::vector<int> vars = factor_vars[static_cast<std::size_t>(k - 1)];
      const Matrix offset = accumulate_offset(shallow, vars);
      ICBOutcome outcome =
          learn_children(vars, offset, sample, t, icb,
                         derive_seed(config.seed, static_cast<std::uint64_t>(k)));
      columns.push_back(outcome.column);

      for (const auto& child : outcome.child_variables) {
        factor_vars.push_back(child);
        next_layer.push_back(static_cast<int>(factor_vars.size()));
      }
      log.push_back({k, vars, std::move(outcome)});
    }

    if (next_layer.empty()) break;
    layers.push_back(std::move(next_layer));
    labels_through_layer.push_back(static_cast<int>(factor_vars.size()));
  }

  FitResult result;
  result.tree = tree_from_variable_sets(j, factor_vars);
  result.layers = layers;
  result.factor_log = std::move(log);

  const ValidationReport report = validate_tree(result.tree);
  if (!report.ok())
    throw SolverFailure("learned hierarchy violates structural rules:\n" +
                        report.to_string());

  // Final constrained refit over the complete pattern, warm-started from the
  // learned columns.
  const LoadingPattern pattern = pattern_from_tree(result.tree);
  ModelStart warm;
  warm.loadings.setZero(j, result.tree.size());
  for (int k = 0; k < result.tree.size(); ++k)
    warm.loadings.col(k) = columns[static_cast<std::size_t>(k)];
  warm.psi.resize(j);
  const Vector row_norms = warm.loadings.rowwise().squaredNorm();
  for (int v = 0; v < j; ++v)
    warm.psi[v] = std::sqrt(std::max(sample.S(v, v) - row_norms[v], 0.05));

  RefitOptions final_options = config.final_refit;
  final_options.seed = derive_seed(config.seed, 0xf17ULL);
  const RefitResult fit =
      refit_mle(pattern, sample, final_options, nullptr, &warm);

  result.loadings = fit.loadings;
  result.psi2 = fit.psi2;
  result.discrepancy = fit.discrepancy;
  result.refit_converged = fit.converged;
  result.num_free_params = pattern.count_free() + j;
  result.bic_value = bic(fit.discrepancy, result.num_free_params, sample.N);
  return result;
}

double max_h_converged(const FitResult& fit) {
  double worst = 0.0;
  for (const FactorDiagnostics& diag : fit.factor_log)
    for (const ChildCandidate& cand : diag.outcome.candidates)
      worst = std::max(worst, cand.alm_log.max_h_converged);
  return worst;
}

}  // namespace hfa
