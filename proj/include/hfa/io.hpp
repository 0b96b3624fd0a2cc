#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "hfa/conditions.hpp"
#include "hfa/covariance.hpp"
#include "hfa/driver.hpp"
#include "hfa/factor_tree.hpp"
#include "hfa/simulate.hpp"
#include "hfa/types.hpp"

namespace hfa {

// File formats. Matrices travel as delimiter-separated numeric text ('#'
// comments, optional header row, delimiter sniffed from the first line);
// trees and reports as JSON with a "format" tag. Writers embed a caller
// supplied key/value block in every file so outputs carry their own
// provenance (tool version, seed, configuration).

using Meta = std::vector<std::pair<std::string, std::string>>;

/// Parses numeric text: '#' lines and blank lines are skipped, the delimiter
/// (tab, comma, semicolon, or whitespace) is detected from the first content
/// line, and a leading non-numeric row is treated as a header. Rows must be
/// rectangular and all values finite; anything else raises IoError. `name`
/// labels error messages.
Matrix read_matrix(std::istream& in, const std::string& name = "<stream>");
Matrix read_matrix_file(const std::string& path);

/// Tab-separated values at full round-trip precision (%.17g). `meta` is
/// written first as '# key: value' comment lines.
void write_matrix(std::ostream& out, const Matrix& m, const Meta& meta = {});
void write_matrix_file(const std::string& path, const Matrix& m,
                       const Meta& meta = {});

/// Tree files: {"format": "hfa-tree/1", "num_variables": J, "factors":
/// [{"label", "variables", "parent", "children"}, ...]}. The reader derives
/// parent/child links from the variable sets and cross-checks any declared
/// ones; labels may be any distinct ints.
FactorTree read_tree(std::istream& in, const std::string& name = "<stream>");
FactorTree read_tree_file(const std::string& path);
void write_tree(std::ostream& out, const FactorTree& tree,
                const Meta& meta = {});
void write_tree_file(const std::string& path, const FactorTree& tree,
                     const Meta& meta = {});

/// Centered maximum-likelihood covariance (divisor N) of a row-per-
/// observation data matrix; requires more rows than columns. `ridge` is
/// added to the diagonal before the definiteness check.
SampleCovariance covariance_from_data(const Matrix& data, double ridge = 0.0);

/// Writes tree.json, loadings.tsv, psi2.tsv, and fit.json (estimates plus
/// the per-factor search diagnostics) into `dir`, creating it if needed.
void write_fit_bundle(const std::string& dir, const FitResult& fit,
                      std::int64_t n, const Meta& meta);

/// Writes summary.tsv (per-setting aggregates), replications.tsv (one row
/// per replication), and benchmark.json into `dir`.
void write_benchmark(const std::string& dir, const BenchmarkResult& result,
                     const Meta& meta);

/// Writes check.txt (human-readable clause table) and check.json into `dir`.
void write_condition_report(const std::string& dir,
                            const ConditionReport& report, const Meta& meta);

}  // namespace hfa
