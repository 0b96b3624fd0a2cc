#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hfa/covariance.hpp"
#include "hfa/driver.hpp"
#include "hfa/factor_tree.hpp"
#include "hfa/rng.hpp"
#include "hfa/types.hpp"

namespace hfa {

/// Ground-truth generator settings. Loadings are drawn on the tree's support:
/// magnitudes Uniform(loading_min, loading_max); every entry outside the
/// leading column flips sign with probability flip_probability; the leading
/// column stays positive. Unique variances are constant.
struct TruthSpec {
  FactorTree tree;
  double loading_min = 0.5;
  double loading_max = 2.0;
  double flip_probability = 0.5;
  double unique_variance = 1.0;
};

struct Truth {
  Matrix loadings;  // J x K on the tree's pattern
  Vector psi2;
  Matrix sigma;     // loadings * loadings^T + diag(psi2)
};

/// Draw order: factors in label order, variables ascending within a factor;
/// magnitude first, then the sign flip.
Truth generate_truth(const TruthSpec& spec, Rng& rng);

/// Four-layer, ten-factor benchmark hierarchy; requires j divisible by 18.
/// Sizes scale with j: the root splits 1/3 : 2/3, the first branch splits in
/// half, the second into 2/9 : 2/9 : 2/9 of j, and the first of those splits
/// in half again.
FactorTree default_benchmark_tree(int j);

struct SampleOptions {
  bool center = false;    // subtract the sample mean first (draws are already
                          // mean zero, so this is off by default)
  bool unbiased = false;  // divide by n - 1 instead of n
};

/// Gaussian sample covariance: n draws from N(0, sigma), second moments with
/// divisor n unless the options say otherwise.
SampleCovariance sample_covariance(const Matrix& sigma, std::int64_t n,
                                   Rng& rng, const SampleOptions& options = {});

/// Infinite-sample surrogate: returns sigma itself as the "sample", with n
/// kept only as the discrepancy scale.
SampleCovariance exact_covariance(const Matrix& sigma, std::int64_t n);

/// Structure and estimate recovery relative to a known truth. Trees are
/// compared after canonical relabelling. Mean squared errors are reported
/// only on exact structure matches; the loading error is minimized over
/// per-column sign flips.
struct RecoveryScore {
  bool exact_match = false;
  std::vector<int> layer_match;         // per truth layer t >= 2: sets equal
  std::vector<int> fitted_layer_sizes;  // |L_t| of the fitted tree
  int fitted_factors = 0;
  int fitted_layers = 0;
  std::optional<double> mse_loadings;
  std::optional<double> mse_psi;
};

RecoveryScore score_recovery(const FactorTree& fitted,
                             const Matrix& fitted_loadings,
                             const Vector& fitted_psi2,
                             const FactorTree& truth,
                             const Matrix& true_loadings,
                             const Vector& true_psi2);

struct BenchmarkSetting {
  int j = 18;
  std::int64_t n = 1000;
  int reps = 1;
};

struct ReplicationRecord {
  int setting = 0;
  int rep = 0;
  bool failed = false;
  std::string error;
  RecoveryScore score;
  double max_h_converged = 0.0;  // worst constraint slack among this rep's
                                 // converged solver runs
};

struct SettingSummary {
  BenchmarkSetting setting;
  int completed = 0;
  int failures = 0;
  double exact_match_rate = 0.0;
  int exact_matches = 0;
  double mean_factors = 0.0;
  double mean_layers = 0.0;
  std::vector<double> layer_match_rate;  // truth layers t = 2..T
  std::vector<double> mean_layer_size;   // fitted |L_t|, t = 2..T
  std::optional<double> mean_mse_loadings;  // over exact matches
  std::optional<double> mean_mse_psi;
};

struct BenchmarkResult {
  std::vector<ReplicationRecord> replications;
  std::vector<SettingSummary> summaries;
  std::string summary_text;  // deterministic table, byte-stable across reruns
};

/// Runs `reps` independent fits per setting. The truth is fixed per variable
/// count (derived from `seed` and j only), so every setting with the same j
/// shares its loading matrix. Replications are independent streams; results
/// do not depend on `threads`.
BenchmarkResult run_benchmark(const std::vector<BenchmarkSetting>& settings,
                              const FitConfig& base_config, std::uint64_t seed,
                              int threads);

}  // namespace hfa
