#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hfa/conditions.hpp"
#include "hfa/driver.hpp"
#include "hfa/error.hpp"
#include "hfa/io.hpp"
#include "hfa/simulate.hpp"
#include "hfa/version.hpp"

using namespace hfa;

namespace {

struct Options {
  std::string input;
  std::string kind = "covariance";
  std::int64_t n = 0;
  std::uint64_t seed = 1;
  int dmax = 6;
  ICBConfig::CMaxRule cmax_rule = ICBConfig::CMaxRule::cap4;
  double ridge = 0.0;
  int starts = 100;
  int threads = 0;
  std::string out;

  std::vector<int> js{36};
  std::vector<std::int64_t> ns{1000};
  int reps = 20;

  std::string tree_path;
  double tol = 1e-8;
  long budget = kWitnessPairBudget;
};

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

const char* rule_name(ICBConfig::CMaxRule rule) {
  return rule == ICBConfig::CMaxRule::cap4 ? "sim" : "real";
}

Meta solver_meta(const Options& o, const char* command) {
  return {{"tool", std::string("hfa ") + kVersion},
          {"command", command},
          {"seed", std::to_string(o.seed)},
          {"dmax", std::to_string(o.dmax)},
          {"cmax_rule", rule_name(o.cmax_rule)},
          {"starts", std::to_string(o.starts)},
          {"threads", std::to_string(o.threads)}};
}

FitConfig make_config(const Options& o) {
  FitConfig config;
  config.seed = o.seed;
  config.threads = o.threads;
  config.icb.d_max = o.dmax;
  config.icb.c_max_rule = o.cmax_rule;
  config.icb.alm.num_starts = o.starts;
  config.icb.alm.threads = o.threads;
  return config;
}

SampleCovariance load_sample(const Options& o) {
  const Matrix m = read_matrix_file(o.input);
  if (o.kind == "covariance") {
    if (o.n < 2)
      throw IoError("--kind covariance needs --n, the sample size behind the "
                    "matrix (at least 2)");
    try {
      return SampleCovariance::checked(m, o.n, o.ridge);
    } catch (const NotPositiveDefinite& e) {
      if (o.ridge == 0.0)
        throw NotPositiveDefinite(std::string(e.what()) +
                                  "; a small --ridge can repair borderline "
                                  "input");
      throw;
    }
  }
  if (o.n != 0)
    throw IoError("--n is taken from the row count when --kind data");
  return covariance_from_data(m, o.ridge);
}

void write_failure(const std::string& dir, const Meta& meta,
                   const std::string& message) {
  std::filesystem::create_directories(dir);
  nlohmann::json root;
  root["format"] = "hfa-error/1";
  for (const auto& [key, value] : meta) root["meta"][key] = value;
  root["error"] = message;
  std::ofstream out(std::filesystem::path(dir) / "error.json");
  out << root.dump(2) << '\n';
}

int cmd_fit(const Options& o) {
  const SampleCovariance sample = load_sample(o);
  Meta meta = solver_meta(o, "fit");
  meta.emplace_back("input", o.input);
  meta.emplace_back("kind", o.kind);
  meta.emplace_back("n", std::to_string(sample.N));
  meta.emplace_back("ridge", fmt_g(o.ridge));

  FitResult fit;
  try {
    fit = fit_hierarchical(sample, make_config(o));
  } catch (const Error& e) {
    write_failure(o.out, meta, e.what());
    std::cerr << "solver failure: " << e.what() << "\n"
              << "diagnostics written to " << o.out << "/error.json\n";
    return 3;
  }
  write_fit_bundle(o.out, fit, sample.N, meta);

  std::cout << "factors: " << fit.num_factors()
            << "  layers: " << fit.num_layers()
            << "  free parameters: " << fit.num_free_params << '\n'
            << "discrepancy: " << fmt_g(fit.discrepancy)
            << "  bic: " << fmt_g(fit.bic_value) << '\n';
  for (std::size_t t = 0; t < fit.layers.size(); ++t) {
    std::cout << "layer " << t + 1 << ':';
    for (int label : fit.layers[t])
      std::cout << ' ' << label << '('
                << fit.tree.at(label).variables.size() << ')';
    std::cout << '\n';
  }
  std::cout << "wrote tree.json loadings.tsv psi2.tsv fit.json to " << o.out
            << '\n';
  return 0;
}

int cmd_simulate(const Options& o) {
  std::vector<BenchmarkSetting> settings;
  for (int j : o.js)
    for (std::int64_t n : o.ns) settings.push_back({j, n, o.reps});

  const BenchmarkResult result =
      run_benchmark(settings, make_config(o), o.seed, o.threads);

  Meta meta = solver_meta(o, "simulate");
  meta.emplace_back("j", join(o.js));
  meta.emplace_back("n", join(o.ns));
  meta.emplace_back("reps", std::to_string(o.reps));
  write_benchmark(o.out, result, meta);

  std::cout << result.summary_text;
  int failures = 0;
  for (const SettingSummary& s : result.summaries) failures += s.failures;
  if (failures > 0)
    std::cerr << "warning: " << failures
              << " replication(s) failed; see replications.tsv\n";
  std::cout << "wrote summary.tsv replications.tsv benchmark.json to " << o.out
            << '\n';
  return 0;
}

int cmd_check(const Options& o) {
  const Matrix loadings = read_matrix_file(o.input);
  const FactorTree tree = read_tree_file(o.tree_path);
  const ConditionReport report =
      check_conditions(loadings, tree, o.tol, o.budget);

  if (!o.out.empty()) {
    Meta meta = {{"tool", std::string("hfa ") + kVersion},
                 {"command", "check"},
                 {"loadings", o.input},
                 {"tree", o.tree_path},
                 {"tol", fmt_g(o.tol)},
                 {"budget", std::to_string(o.budget)}};
    write_condition_report(o.out, report, meta);
  }
  std::cout << report.to_string();
  if (report.overall() == ConditionStatus::inconclusive)
    std::cerr << "warning: the witness-search budget ran out before a "
                 "verdict; raise --budget\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "hierarchical factor analysis: learns a tree of latent factors with "
      "nested zero constraints from a covariance matrix"};
  app.set_version_flag("--version", std::string("hfa ") + kVersion);
  app.require_subcommand(1);
  Options o;

  const std::map<std::string, ICBConfig::CMaxRule> rules{
      {"sim", ICBConfig::CMaxRule::cap4}, {"real", ICBConfig::CMaxRule::cap6}};

  const auto add_solver_flags = [&](CLI::App* cmd) {
    cmd->add_option("--seed", o.seed, "random seed recorded in every output")
        ->capture_default_str();
    cmd->add_option("--dmax", o.dmax,
                    "cap on child column counts (10 suits exploratory fits)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--cmax-rule", o.cmax_rule,
                    "child-count cap rule: sim (up to 4) or real (up to 6)")
        ->transform(CLI::CheckedTransformer(rules, CLI::ignore_case))
        ->default_str("sim");
    cmd->add_option("--starts", o.starts, "random starts per search batch")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
  };

  CLI::App* fit = app.add_subcommand(
      "fit", "learn a hierarchy from a covariance or raw data matrix");
  fit->add_option("--input", o.input,
                  "matrix file: delimiter-separated numbers, optional header")
      ->required()
      ->check(CLI::ExistingFile);
  fit->add_option("--kind", o.kind, "what the input holds")
      ->check(CLI::IsMember({"covariance", "data"}))
      ->capture_default_str();
  fit->add_option("--n", o.n,
                  "sample size behind a covariance input (rows imply it for "
                  "data input)");
  fit->add_option("--ridge", o.ridge,
                  "value added to the covariance diagonal before fitting")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  add_solver_flags(fit);
  fit->add_option("--out", o.out, "output directory")->required();

  CLI::App* simulate = app.add_subcommand(
      "simulate", "benchmark structure recovery on synthetic data");
  simulate
      ->add_option("--j", o.js,
                   "variable counts, each divisible by 18 (repeat or "
                   "comma-separate for a grid)")
      ->delimiter(',')
      ->capture_default_str();
  simulate
      ->add_option("--n", o.ns, "sample sizes (repeat or comma-separate)")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--reps", o.reps, "replications per setting")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_solver_flags(simulate);
  simulate->add_option("--out", o.out, "output directory")->required();

  CLI::App* check = app.add_subcommand(
      "check", "test a loading matrix and tree against the identifiability "
               "conditions");
  check->add_option("--input", o.input, "loading matrix file")
      ->required()
      ->check(CLI::ExistingFile);
  check->add_option("--tree", o.tree_path, "tree file (json)")
      ->required()
      ->check(CLI::ExistingFile);
  check->add_option("--tol", o.tol, "relative rank tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  check
      ->add_option("--budget", o.budget,
                   "witness-search pairs per clause instance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  check->add_option("--out", o.out,
                    "optional directory for check.txt and check.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are input errors
  }

  try {
    if (fit->parsed()) return cmd_fit(o);
    if (simulate->parsed()) return cmd_simulate(o);
    return cmd_check(o);
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  } catch (const AmbiguousPartition& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
