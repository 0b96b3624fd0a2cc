#include "hfa/icb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hfa/rng.hpp"

namespace hfa {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

BoolMatrix tilde_mask(int m, const BlockPartition& partition,
                      const std::vector<int>& d) {
  int total = 1;
  for (int w : d) total += w;
  BoolMatrix mask = BoolMatrix::Constant(m, total, false);
  mask.col(0).setConstant(true);
  int col = 1;
  for (std::size_t s = 0; s < partition.blocks.size(); ++s) {
    for (int row : partition.blocks[s])
      for (int w = 0; w < d[s]; ++w) mask(row - 1, col + w) = true;
    col += d[s];
  }
  return mask;
}

}  // namespace

HyperParams hyperparam_schedule(int layer, int m, const ICBConfig& config) {
  if (layer < 2) throw StructuralError("children cannot sit above layer 2");
  HyperParams hp;
  const int cap = config.c_max_rule == ICBConfig::CMaxRule::cap4 ? 4 : 6;
  hp.c_max = m >= 7 ? std::min(cap, m / 3) : 0;
  hp.d = std::max(1, std::min(m, config.d_max + 2 - layer));
  return hp;
}

double penalty_p(const std::vector<int>& block_sizes, const std::vector<int>& d) {
  if (block_sizes.size() != d.size())
    throw StructuralError("penalty_p: size/width count mismatch");
  double p = 0.0;
  for (std::size_t s = 0; s < d.size(); ++s) {
    if (d[s] < 1) throw StructuralError("penalty_p: width below 1");
    if (d[s] > block_sizes[s]) return kInf;
    p += static_cast<double>(block_sizes[s]) * d[s] -
         static_cast<double>(d[s]) * (d[s] - 1) / 2.0;
  }
  return p;
}

LocalFit ic_zero_children(const Matrix& offset, const Matrix& sample,
                          std::int64_t n, const ICBConfig& config,
                          std::uint64_t seed) {
  const int m = static_cast<int>(sample.rows());
  RefitOptions options = config.refit;
  options.seed = seed;
  const LoadingPattern pattern =
      LoadingPattern::from_mask(BoolMatrix::Constant(m, 1, true));
  const RefitResult fit =
      refit_mle(pattern, SampleCovariance{sample, n}, options,
                offset.size() > 0 ? &offset : nullptr);
  LocalFit out;
  out.ic = fit.discrepancy;  // no penalty: the baseline every split must beat
  out.fit_discrepancy = fit.discrepancy;
  out.penalty = 0.0;
  out.loadings = fit.loadings;
  out.psi2 = fit.psi2;
  out.converged = fit.converged;
  return out;
}

LocalFit tilde_ic(const BlockPartition& partition, const std::vector<int>& d,
                  const Matrix& offset, const Matrix& sample, std::int64_t n,
                  const ICBConfig& config, std::uint64_t seed) {
  const int m = static_cast<int>(sample.rows());
  if (partition.total() != m)
    throw StructuralError("tilde_ic: partition does not cover all rows");

  LocalFit out;
  out.penalty = penalty_p(partition.sizes(), d);
  if (!std::isfinite(out.penalty)) {
    out.ic = kInf;
    out.fit_discrepancy = kInf;
    return out;
  }

  RefitOptions options = config.refit;
  options.seed = seed;
  const LoadingPattern pattern =
      LoadingPattern::from_mask(tilde_mask(m, partition, d));
  const RefitResult fit =
      refit_mle(pattern, SampleCovariance{sample, n}, options,
                offset.size() > 0 ? &offset : nullptr);
  out.fit_discrepancy = fit.discrepancy;
  out.ic = fit.discrepancy + out.penalty * std::log(static_cast<double>(n));
  out.loadings = fit.loadings;
  out.psi2 = fit.psi2;
  out.converged = fit.converged;
  return out;
}

GreedyDResult greedy_d_search(const BlockPartition& partition, int d_cap,
                              const Matrix& offset, const Matrix& sample,
                              std::int64_t n, const ICBConfig& config,
                              std::uint64_t seed) {
  const auto sizes = partition.sizes();
  const int c = static_cast<int>(sizes.size());
  if (c < 1) throw StructuralError("greedy_d_search: empty partition");

  std::vector<int> widths(static_cast<std::size_t>(c));
  for (int s = 0; s < c; ++s)
    widths[static_cast<std::size_t>(s)] = std::min(sizes[static_cast<std::size_t>(s)], d_cap);

  GreedyDResult result;
  for (int s = 0; s < c; ++s) {
    const int cap_s = std::min(sizes[static_cast<std::size_t>(s)], d_cap);
    double best_ic = kInf;
    int best_width = 1;
    LocalFit best_fit;
    for (int trial = 1; trial <= cap_s; ++trial) {
      widths[static_cast<std::size_t>(s)] = trial;
      const LocalFit fit = tilde_ic(partition, widths, offset, sample, n,
                                    config, derive_seed(seed, s, trial));
      if (fit.ic < best_ic) {
        best_ic = fit.ic;
        best_width = trial;
        best_fit = fit;
      }
    }
    widths[static_cast<std::size_t>(s)] = best_width;
    result.step_ics.push_back(best_ic);
    if (s == c - 1) result.fit = best_fit;
  }
  result.d = widths;
  return result;
}

ICBOutcome learn_children(const std::vector<int>& variables,
                          const Matrix& offset, const SampleCovariance& sample,
                          int layer, const ICBConfig& config,
                          std::uint64_t seed) {
  const int m = static_cast<int>(variables.size());
  const int j = static_cast<int>(sample.dim());
  if (m < 1) throw StructuralError("learn_children: no variables");
  if (!std::is_sorted(variables.begin(), variables.end()))
    throw StructuralError("learn_children: variables must be sorted");
  if (variables.front() < 1 || variables.back() > j)
    throw StructuralError("learn_children: variable label out of range");
  if (offset.size() > 0 && (offset.rows() != m || offset.cols() != m))
    throw StructuralError("learn_children: offset shape mismatch");

  Matrix s_local(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      s_local(a, b) = sample.S(variables[static_cast<std::size_t>(a)] - 1,
                               variables[static_cast<std::size_t>(b)] - 1);

  ICBOutcome outcome;
  outcome.schedule = hyperparam_schedule(layer, m, config);

  ChildCandidate leaf;
  leaf.c = 0;
  const LocalFit fit0 =
      ic_zero_children(offset, s_local, sample.N, config, derive_seed(seed, 0));
  leaf.ic = fit0.ic;
  leaf.usable = true;
  outcome.candidates.push_back(leaf);

  int best_c = 0;
  double best_ic = fit0.ic;
  LocalFit best_fit = fit0;
  BlockPartition best_partition;
  std::vector<int> best_d;

  ALMConfig alm_config = config.alm;
  alm_config.tau = config.refit.tau;

  for (int c = 2; c <= outcome.schedule.c_max; ++c) {
    ChildCandidate cand;
    cand.c = c;
    cand.ic = kInf;
    const std::uint64_t c_seed = derive_seed(seed, static_cast<std::uint64_t>(c));
    ALMSolution sol;
    try {
      sol = multi_start_solve(c, outcome.schedule.d, offset, s_local,
                              static_cast<double>(sample.N), alm_config, c_seed,
                              &cand.alm_log);
    } catch (const SolverFailure& e) {
      cand.note = e.what();
      outcome.candidates.push_back(std::move(cand));
      continue;
    }
    if (!sol.admissible) {
      cand.note = "no block structure with at least 3 variables per child";
      outcome.candidates.push_back(std::move(cand));
      continue;
    }

    cand.partition = sol.partition;
    const GreedyDResult greedy =
        greedy_d_search(sol.partition, outcome.schedule.d, offset, s_local,
                        sample.N, config, derive_seed(c_seed, 1));
    cand.d = greedy.d;
    cand.ic = greedy.fit.ic;
    cand.usable = true;

    if (cand.ic < best_ic) {  // ties keep the smaller child count
      best_ic = cand.ic;
      best_c = c;
      best_fit = greedy.fit;
      best_partition = cand.partition;
      best_d = cand.d;
    }
    outcome.candidates.push_back(std::move(cand));
  }

  outcome.child_count = best_c;
  outcome.ic = best_ic;
  outcome.psi2 = best_fit.psi2;
  outcome.selected_d = best_d;
  outcome.local_column = best_fit.loadings.col(0);
  outcome.column = Vector::Zero(j);
  for (int a = 0; a < m; ++a)
    outcome.column[variables[static_cast<std::size_t>(a)] - 1] =
        outcome.local_column[a];
  if (best_c > 0)
    for (const auto& block : best_partition.blocks) {
      std::vector<int> child;
      child.reserve(block.size());
      for (int row : block)
        child.push_back(variables[static_cast<std::size_t>(row) - 1]);
      outcome.child_variables.push_back(std::move(child));
    }
  return outcome;
}

}  // namespace hfa
