#include "hfa/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "hfa/detail/parallel.hpp"

namespace hfa {

Truth generate_truth(const TruthSpec& spec, Rng& rng) {
  const ValidationReport report = validate_tree(spec.tree);
  if (!report.ok())
    throw StructuralError("truth tree is invalid:\n" + report.to_string());
  if (!(spec.loading_min > 0.0) || spec.loading_max < spec.loading_min)
    throw StructuralError("invalid loading magnitude range");
  if (spec.unique_variance <= 0.0)
    throw StructuralError("unique variance must be positive");

  const int j = spec.tree.num_variables;
  const int k = spec.tree.size();
  Truth truth;
  truth.loadings.setZero(j, k);
  for (const auto& f : spec.tree.factors) {
    for (int v : f.variables) {
      const double mag = rng.uniform(spec.loading_min, spec.loading_max);
      const bool flip =
          f.label != 1 && rng.bernoulli(spec.flip_probability);
      truth.loadings(v - 1, f.label - 1) = flip ? -mag : mag;
    }
  }
  truth.psi2 = Vector::Constant(j, spec.unique_variance);
  truth.sigma = truth.loadings * truth.loadings.transpose();
  truth.sigma.diagonal() += truth.psi2;
  return truth;
}

FactorTree default_benchmark_tree(int j) {
  if (j < 18 || j % 18 != 0)
    throw StructuralError("benchmark tree needs j divisible by 18");
  auto range = [](int lo, int hi) {
    std::vector<int> v(static_cast<std::size_t>(hi - lo + 1));
    for (int i = lo; i <= hi; ++i) v[static_cast<std::size_t>(i - lo)] = i;
    return v;
  };
  return tree_from_variable_sets(
      j, {range(1, j),
          range(1, j / 3),
          range(j / 3 + 1, j),
          range(1, j / 6),
          range(j / 6 + 1, j / 3),
          range(j / 3 + 1, 5 * j / 9),
          range(5 * j / 9 + 1, 7 * j / 9),
          range(7 * j / 9 + 1, j),
          range(j / 3 + 1, 4 * j / 9),
          range(4 * j / 9 + 1, 5 * j / 9)});
}

SampleCovariance sample_covariance(const Matrix& sigma, std::int64_t n,
                                   Rng& rng, const SampleOptions& options) {
  const int j = static_cast<int>(sigma.rows());
  if (n < 2) throw StructuralError("sample size must be at least 2");
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("population covariance is not PD");
  const Matrix chol = llt.matrixL();

  Matrix sum = Matrix::Zero(j, j);
  Vector mean = Vector::Zero(j);
  Vector z(j), x(j);
  for (std::int64_t i = 0; i < n; ++i) {
    for (int v = 0; v < j; ++v) z[v] = rng.normal();
    x.noalias() = chol * z;
    sum.noalias() += x * x.transpose();
    mean += x;
  }
  const double divisor = static_cast<double>(options.unbiased ? n - 1 : n);
  Matrix s = sum / divisor;
  if (options.center) {
    mean /= static_cast<double>(n);
    s -= (static_cast<double>(n) / divisor) * mean * mean.transpose();
  }
  s = ((s + s.transpose()) / 2.0).eval();
  return SampleCovariance::checked(std::move(s), n);
}

SampleCovariance exact_covariance(const Matrix& sigma, std::int64_t n) {
  if (n < 2) throw StructuralError("sample size must be at least 2");
  return SampleCovariance::checked(sigma, n);
}

RecoveryScore score_recovery(const FactorTree& fitted,
                             const Matrix& fitted_loadings,
                             const Vector& fitted_psi2,
                             const FactorTree& truth,
                             const Matrix& true_loadings,
                             const Vector& true_psi2) {
  if (fitted.num_variables != truth.num_variables)
    throw StructuralError("score_recovery: variable count mismatch");

  const FactorTree fit_tree = canonical_relabel(fitted);
  const FactorTree true_tree = canonical_relabel(truth);
  const auto fit_layers = compute_layers(fit_tree);
  const auto true_layers = compute_layers(true_tree);

  RecoveryScore score;
  score.fitted_factors = fit_tree.size();
  score.fitted_layers = static_cast<int>(fit_layers.size());
  for (const auto& layer : fit_layers)
    score.fitted_layer_sizes.push_back(static_cast<int>(layer.size()));

  // Exact match: same factor count and identical variable sets label by
  // label (canonical labels make this well defined).
  score.exact_match = fit_tree.size() == true_tree.size();
  if (score.exact_match)
    for (int i = 0; i < fit_tree.size(); ++i)
      if (fit_tree.factors[static_cast<std::size_t>(i)].variables !=
          true_tree.factors[static_cast<std::size_t>(i)].variables) {
        score.exact_match = false;
        break;
      }

  // Layer match for t >= 2: the multisets of variable sets agree.
  for (std::size_t t = 1; t < true_layers.size(); ++t) {
    int match = 0;
    if (t < fit_layers.size()) {
      std::multiset<std::vector<int>> a, b;
      for (int l : true_layers[t]) a.insert(true_tree.at(l).variables);
      for (int l : fit_layers[t]) b.insert(fit_tree.at(l).variables);
      match = a == b ? 1 : 0;
    }
    score.layer_match.push_back(match);
  }

  if (score.exact_match) {
    const int j = truth.num_variables;
    const int k = true_tree.size();
    double sq = 0.0;
    for (int c = 0; c < k; ++c) {
      const double plus = (fitted_loadings.col(c) - true_loadings.col(c)).squaredNorm();
      const double minus = (fitted_loadings.col(c) + true_loadings.col(c)).squaredNorm();
      sq += std::min(plus, minus);
    }
    score.mse_loadings = sq / (static_cast<double>(j) * k);
    score.mse_psi = (fitted_psi2 - true_psi2).squaredNorm() / static_cast<double>(j);
  }
  return score;
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::defaultfloat << v;
  return os.str();
}

}  // namespace

BenchmarkResult run_benchmark(const std::vector<BenchmarkSetting>& settings,
                              const FitConfig& base_config, std::uint64_t seed,
                              int threads) {
  BenchmarkResult result;

  struct Job {
    int setting;
    int rep;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    if (settings[s].reps < 1)
      throw StructuralError("benchmark setting needs at least one replication");
    for (int r = 0; r < settings[s].reps; ++r)
      jobs.push_back({static_cast<int>(s), r});
  }

  // One truth per variable count, independent of the setting order.
  std::vector<Truth> truths(settings.size());
  std::vector<FactorTree> trees;
  trees.reserve(settings.size());
  for (std::size_t s = 0; s < settings.size(); ++s) {
    trees.push_back(default_benchmark_tree(settings[s].j));
    TruthSpec spec;
    spec.tree = trees.back();
    Rng rng(derive_seed(seed, 0x7a67b1ULL, static_cast<std::uint64_t>(settings[s].j)));
    truths[s] = generate_truth(spec, rng);
  }

  std::vector<ReplicationRecord> records(jobs.size());
  detail::parallel_for(static_cast<int>(jobs.size()), threads, [&](int idx) {
    const Job& job = jobs[static_cast<std::size_t>(idx)];
    const BenchmarkSetting& setting = settings[static_cast<std::size_t>(job.setting)];
    ReplicationRecord rec;
    rec.setting = job.setting;
    rec.rep = job.rep;
    const std::uint64_t rep_seed =
        derive_seed(seed, static_cast<std::uint64_t>(job.setting),
                    static_cast<std::uint64_t>(job.rep));
    try {
      Rng rng(derive_seed(rep_seed, 1));
      const SampleCovariance sample =
          sample_covariance(truths[static_cast<std::size_t>(job.setting)].sigma,
                            setting.n, rng);
      FitConfig config = base_config;
      config.seed = derive_seed(rep_seed, 2);
      config.threads = 1;  // parallelism lives at the replication level here
      const FitResult fit = fit_hierarchical(sample, config);
      rec.max_h_converged = max_h_converged(fit);
      rec.score = score_recovery(
          fit.tree, fit.loadings, fit.psi2,
          trees[static_cast<std::size_t>(job.setting)],
          truths[static_cast<std::size_t>(job.setting)].loadings,
          truths[static_cast<std::size_t>(job.setting)].psi2);
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    records[static_cast<std::size_t>(idx)] = std::move(rec);
  });
  result.replications = std::move(records);

  // Aggregate in deterministic (setting, rep) order.
  std::ostringstream table;
  table << "j\tn\treps\tfailures\texact_match_rate\tmean_factors\tmean_layers";
  std::size_t max_depth = 0;
  for (std::size_t s = 0; s < settings.size(); ++s)
    max_depth = std::max(max_depth,
                         compute_layers(trees[s]).size());
  for (std::size_t t = 2; t <= max_depth; ++t)
    table << "\tlayer" << t << "_match_rate\tlayer" << t << "_mean_size";
  table << "\tmean_mse_loadings\tmean_mse_psi\n";

  for (std::size_t s = 0; s < settings.size(); ++s) {
    SettingSummary sum;
    sum.setting = settings[s];
    const std::size_t depth = compute_layers(trees[s]).size();
    std::vector<double> match_acc(depth - 1, 0.0), size_acc(depth - 1, 0.0);
    double mse_l = 0.0, mse_p = 0.0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].setting != static_cast<int>(s)) continue;
      const ReplicationRecord& rec = result.replications[i];
      if (rec.failed) {
        ++sum.failures;
        continue;
      }
      ++sum.completed;
      sum.mean_factors += rec.score.fitted_factors;
      sum.mean_layers += rec.score.fitted_layers;
      if (rec.score.exact_match) {
        ++sum.exact_matches;
        mse_l += *rec.score.mse_loadings;
        mse_p += *rec.score.mse_psi;
      }
      for (std::size_t t = 0; t + 1 < depth; ++t) {
        if (t < rec.score.layer_match.size())
          match_acc[t] += rec.score.layer_match[t];
        if (t + 1 < rec.score.fitted_layer_sizes.size())
          size_acc[t] += rec.score.fitted_layer_sizes[t + 1];
      }
    }
    const double denom = std::max(1, sum.completed);
    sum.exact_match_rate = sum.exact_matches / denom;
    sum.mean_factors /= denom;
    sum.mean_layers /= denom;
    for (std::size_t t = 0; t + 1 < depth; ++t) {
      sum.layer_match_rate.push_back(match_acc[t] / denom);
      sum.mean_layer_size.push_back(size_acc[t] / denom);
    }
    if (sum.exact_matches > 0) {
      sum.mean_mse_loadings = mse_l / sum.exact_matches;
      sum.mean_mse_psi = mse_p / sum.exact_matches;
    }

    table << settings[s].j << '\t' << settings[s].n << '\t' << settings[s].reps
          << '\t' << sum.failures << '\t' << format_double(sum.exact_match_rate)
          << '\t' << format_double(sum.mean_factors) << '\t'
          << format_double(sum.mean_layers);
    for (std::size_t t = 0; t + 1 < max_depth; ++t) {
      if (t < sum.layer_match_rate.size())
        table << '\t' << format_double(sum.layer_match_rate[t]) << '\t'
              << format_double(sum.mean_layer_size[t]);
      else
        table << "\t-\t-";
    }
    table << '\t'
          << (sum.mean_mse_loadings ? format_double(*sum.mean_mse_loadings) : "-")
          << '\t'
          << (sum.mean_mse_psi ? format_double(*sum.mean_mse_psi) : "-")
          << '\n';
    result.summaries.push_back(std::move(sum));
  }
  result.summary_text = table.str();
  return result;
}

}  // namespace hfa
