#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hfa/alm.hpp"
#include "hfa/block_partition.hpp"
#include "hfa/covariance.hpp"
#include "hfa/objective.hpp"
#include "hfa/types.hpp"

namespace hfa {

// Child-structure search for one factor: candidate child counts c are scored
// by a penalized minimum discrepancy; c = 0 (no children) competes with an
// unpenalized one-factor fit. For each c >= 2 the block structure comes from
// the augmented Lagrangian search and the per-block column counts from a
// greedy sequential search.

struct ICBConfig {
  enum class CMaxRule {
    cap4,  // candidate child counts up to min(4, m/3); none below 7 variables
    cap6,  // wider cap used for exploratory fits on real data
  };
  CMaxRule c_max_rule = CMaxRule::cap4;
  int d_max = 6;
  ALMConfig alm;
  RefitOptions refit;
};

struct HyperParams {
  int c_max = 0;  // 0 = the factor may not split
  int d = 1;      // uniform block width for the ALM stage, depth-discounted
};

/// Schedule for a factor with m variables whose children would sit at
/// `layer` (the root's children sit at layer 2).
HyperParams hyperparam_schedule(int layer, int m, const ICBConfig& config);

/// Parameter count of a blocked pattern: sum over blocks of
/// |block| * d_s - d_s (d_s - 1) / 2, infinite when some d_s exceeds its
/// block size. (The leading column and unique variances are common to every
/// candidate and are left out.)
double penalty_p(const std::vector<int>& block_sizes, const std::vector<int>& d);

struct LocalFit {
  double ic = 0.0;               // penalized criterion value
  double fit_discrepancy = 0.0;  // unpenalized part
  double penalty = 0.0;          // parameter count (penalty_p)
  Matrix loadings;               // m x (1 + sum d_s)
  Vector psi2;
  bool converged = false;
};

/// Unpenalized one-factor criterion for "no children".
LocalFit ic_zero_children(const Matrix& offset, const Matrix& sample,
                          std::int64_t n, const ICBConfig& config,
                          std::uint64_t seed);

/// Penalized criterion for a fixed partition and per-block widths d: a
/// patterned refit (leading dense column, block s rows on its d_s columns)
/// plus penalty_p(sizes, d) * log(n). Infinite penalty short-circuits the fit.
LocalFit tilde_ic(const BlockPartition& partition, const std::vector<int>& d,
                  const Matrix& offset, const Matrix& sample, std::int64_t n,
                  const ICBConfig& config, std::uint64_t seed);

struct GreedyDResult {
  std::vector<int> d;            // chosen width per block
  LocalFit fit;                  // fit at the chosen widths
  std::vector<double> step_ics;  // winning criterion value after each slot
};

/// Chooses block widths one slot at a time: slot s scans 1..min(|v_s|, d_cap)
/// with undecided later slots held at their caps; ties prefer the smaller
/// width. The criterion value of the final slot is the candidate's score.
GreedyDResult greedy_d_search(const BlockPartition& partition, int d_cap,
                              const Matrix& offset, const Matrix& sample,
                              std::int64_t n, const ICBConfig& config,
                              std::uint64_t seed);

struct ChildCandidate {
  int c = 0;
  double ic = 0.0;
  bool usable = false;
  std::string note;  // skip/degradation reason when not usable
  MultiStartLog alm_log;
  std::vector<int> d;
  BlockPartition partition;  // local rows (1..m)
};

struct ICBOutcome {
  int child_count = 0;  // 0 = leaf
  double ic = 0.0;
  std::vector<std::vector<int>> child_variables;  // global variable labels
  Vector column;        // winning leading column embedded into length J
  Vector local_column;  // the same, length m
  Vector psi2;          // local unique variances at the winning fit
  std::vector<int> selected_d;
  std::vector<ChildCandidate> candidates;  // c = 0 first, then each c tried
  HyperParams schedule;
};

/// Runs the full child search for the factor over `variables` (sorted global
/// labels). `offset` is the m x m restriction of the accumulated structure
/// from shallower layers; `layer` is where the children would sit.
ICBOutcome learn_children(const std::vector<int>& variables,
                          const Matrix& offset, const SampleCovariance& sample,
                          int layer, const ICBConfig& config,
                          std::uint64_t seed);

}  // namespace hfa
