#include "hfa/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hfa/error.hpp"

namespace hfa {
namespace {

using nlohmann::json;

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool parse_double(const std::string& token, double* out) {
  const char* begin = token.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') return false;
  *out = v;
  return true;
}

std::string trimmed(const std::string& s) {
  std::size_t lo = 0, hi = s.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
  return s.substr(lo, hi - lo);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::istringstream is(line);
    std::string token;
    while (is >> token) out.push_back(token);
    return out;
  }
  std::string current;
  for (char ch : line) {
    if (ch == delim) {
      out.push_back(trimmed(current));
      current.clear();
    } else {
      current += ch;
    }
  }
  out.push_back(trimmed(current));
  return out;
}

void write_meta_comments(std::ostream& out, const Meta& meta) {
  for (const auto& [key, value] : meta) out << "# " << key << ": " << value << '\n';
}

json meta_to_json(const Meta& meta) {
  json out = json::object();
  for (const auto& [key, value] : meta) out[key] = value;
  return out;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

void finish_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out.good()) throw IoError("write failed for " + path);
}

void write_json_file(const std::string& path, const json& value) {
  std::ofstream out = open_output(path);
  out << value.dump(2) << '\n';
  finish_output(out, path);
}

std::string sanitized(std::string text) {
  for (char& ch : text)
    if (ch == '\t' || ch == '\n' || ch == '\r') ch = ' ';
  return text;
}

const json& require_field(const json& node, const char* key,
                          const std::string& name) {
  const auto it = node.find(key);
  if (it == node.end())
    throw IoError(name + ": missing field \"" + key + "\"");
  return *it;
}

}  // namespace

Matrix read_matrix(std::istream& in, const std::string& name) {
  std::vector<std::vector<double>> rows;
  std::string line;
  char delim = 0;
  bool saw_content = false;
  int lineno = 0;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string content = trimmed(line);
    if (content.empty() || content[0] == '#') continue;

    if (!saw_content) {
      // Delimiter sniffing happens once, on the first content line (which
      // may still turn out to be a header).
      if (content.find('\t') != std::string::npos) delim = '\t';
      else if (content.find(',') != std::string::npos) delim = ',';
      else if (content.find(';') != std::string::npos) delim = ';';
      else delim = ' ';
    }

    const std::vector<std::string> tokens = split_line(content, delim);
    std::vector<double> values(tokens.size());
    bool numeric = true;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].empty())
        throw IoError(name + ":" + std::to_string(lineno) + ": empty field");
      if (!parse_double(tokens[i], &values[i])) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (!saw_content) {
        saw_content = true;  // header row
        continue;
      }
      throw IoError(name + ":" + std::to_string(lineno) +
                    ": non-numeric value");
    }
    saw_content = true;
    for (double v : values)
      if (!std::isfinite(v))
        throw IoError(name + ":" + std::to_string(lineno) +
                      ": non-finite value");
    if (!rows.empty() && values.size() != rows.front().size())
      throw IoError(name + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(rows.front().size()) + " columns, got " +
                    std::to_string(values.size()));
    rows.push_back(std::move(values));
  }

  if (rows.empty()) throw IoError(name + ": no numeric rows");
  Matrix m(static_cast<Index>(rows.size()),
           static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows.front().size(); ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return m;
}

Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return read_matrix(in, path);
}

void write_matrix(std::ostream& out, const Matrix& m, const Meta& meta) {
  write_meta_comments(out, meta);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out << '\t';
      out << format_full(m(r, c));
    }
    out << '\n';
  }
}

void write_matrix_file(const std::string& path, const Matrix& m,
                       const Meta& meta) {
  std::ofstream out = open_output(path);
  write_matrix(out, m, meta);
  finish_output(out, path);
}

namespace {

json tree_to_json(const FactorTree& tree, const Meta& meta) {
  json factors = json::array();
  for (const FactorNode& f : tree.factors) {
    json node;
    node["label"] = f.label;
    node["variables"] = f.variables;
    node["parent"] = f.parent ? json(*f.parent) : json(nullptr);
    node["children"] = f.children;
    factors.push_back(std::move(node));
  }
  json root;
  root["format"] = "hfa-tree/1";
  if (!meta.empty()) root["meta"] = meta_to_json(meta);
  root["num_variables"] = tree.num_variables;
  root["factors"] = std::move(factors);
  return root;
}

FactorTree tree_from_json(const json& root, const std::string& name) {
  if (!root.is_object()) throw IoError(name + ": expected a JSON object");
  const json& format = require_field(root, "format", name);
  if (!format.is_string() || format.get<std::string>() != "hfa-tree/1")
    throw IoError(name + ": format tag is not \"hfa-tree/1\"");
  const json& jn = require_field(root, "num_variables", name);
  if (!jn.is_number_integer() || jn.get<int>() < 1)
    throw IoError(name + ": num_variables must be a positive integer");
  const json& jf = require_field(root, "factors", name);
  if (!jf.is_array() || jf.empty())
    throw IoError(name + ": factors must be a nonempty array");

  struct Declared {
    int label;
    std::vector<int> variables;
    std::optional<int> parent;
    bool parent_given = false;
    std::vector<int> children;
    bool children_given = false;
  };
  std::vector<Declared> declared;
  for (const json& node : jf) {
    if (!node.is_object()) throw IoError(name + ": factor entries must be objects");
    Declared d;
    const json& label = require_field(node, "label", name);
    if (!label.is_number_integer())
      throw IoError(name + ": factor label must be an integer");
    d.label = label.get<int>();
    const json& vars = require_field(node, "variables", name);
    if (!vars.is_array() || vars.empty())
      throw IoError(name + ": factor " + std::to_string(d.label) +
                    ": variables must be a nonempty array");
    for (const json& v : vars) {
      if (!v.is_number_integer())
        throw IoError(name + ": factor " + std::to_string(d.label) +
                      ": variables must be integers");
      d.variables.push_back(v.get<int>());
    }
    if (const auto it = node.find("parent"); it != node.end()) {
      d.parent_given = true;
      if (!it->is_null()) {
        if (!it->is_number_integer())
          throw IoError(name + ": factor " + std::to_string(d.label) +
                        ": parent must be an integer or null");
        d.parent = it->get<int>();
      }
    }
    if (const auto it = node.find("children"); it != node.end()) {
      d.children_given = true;
      if (!it->is_array())
        throw IoError(name + ": factor " + std::to_string(d.label) +
                      ": children must be an array");
      for (const json& c : *it) {
        if (!c.is_number_integer())
          throw IoError(name + ": factor " + std::to_string(d.label) +
                        ": children must be integers");
        d.children.push_back(c.get<int>());
      }
    }
    declared.push_back(std::move(d));
  }

  std::sort(declared.begin(), declared.end(),
            [](const Declared& a, const Declared& b) { return a.label < b.label; });
  for (std::size_t i = 1; i < declared.size(); ++i)
    if (declared[i].label == declared[i - 1].label)
      throw IoError(name + ": duplicate factor label " +
                    std::to_string(declared[i].label));

  // Derive the links from set containment in label-position space, then map
  // positions back to the file's labels.
  std::vector<std::vector<int>> sets;
  sets.reserve(declared.size());
  for (const Declared& d : declared) sets.push_back(d.variables);
  const FactorTree derived = tree_from_variable_sets(jn.get<int>(), sets);

  // The sets must form a hierarchy whose containment agrees with the label
  // order, or the label-to-column correspondence is ambiguous. Anything else
  // (coverage, child counts, sizes) is a model property, not a file defect,
  // and stays readable so the dedicated checkers can report it.
  for (const RuleViolation& v : validate_tree(derived).violations)
    if (v.rule == TreeRule::nested_or_disjoint)
      throw StructuralError(
          name + ": factor " +
          std::to_string(declared[static_cast<std::size_t>(v.factor_label - 1)]
                             .label) +
          ": variable sets overlap or nest against the label order");

  FactorTree tree;
  tree.num_variables = derived.num_variables;
  for (const FactorNode& node : derived.factors) {
    FactorNode f;
    f.label = declared[static_cast<std::size_t>(node.label - 1)].label;
    f.variables = node.variables;
    if (node.parent)
      f.parent = declared[static_cast<std::size_t>(*node.parent - 1)].label;
    for (int c : node.children)
      f.children.push_back(declared[static_cast<std::size_t>(c - 1)].label);
    tree.factors.push_back(std::move(f));
  }

  // Declared links are advisory but must not contradict the sets.
  for (std::size_t i = 0; i < declared.size(); ++i) {
    const Declared& d = declared[i];
    const FactorNode& f = tree.factors[i];
    if (d.parent_given && d.parent != f.parent)
      throw IoError(name + ": factor " + std::to_string(d.label) +
                    ": declared parent does not match set containment");
    if (d.children_given) {
      std::vector<int> a = d.children, b = f.children;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b)
        throw IoError(name + ": factor " + std::to_string(d.label) +
                      ": declared children do not match set containment");
    }
  }
  return tree;
}

}  // namespace

FactorTree read_tree(std::istream& in, const std::string& name) {
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(name + ": " + e.what());
  }
  return tree_from_json(root, name);
}

FactorTree read_tree_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return read_tree(in, path);
}

void write_tree(std::ostream& out, const FactorTree& tree, const Meta& meta) {
  out << tree_to_json(tree, meta).dump(2) << '\n';
}

void write_tree_file(const std::string& path, const FactorTree& tree,
                     const Meta& meta) {
  std::ofstream out = open_output(path);
  write_tree(out, tree, meta);
  finish_output(out, path);
}

SampleCovariance covariance_from_data(const Matrix& data, double ridge) {
  const Index n = data.rows();
  const Index j = data.cols();
  if (n <= j)
    throw StructuralError("need more observations than variables, got " +
                          std::to_string(n) + " x " + std::to_string(j));
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Matrix centered = data.rowwise() - mean;
  Matrix s = (centered.transpose() * centered) / static_cast<double>(n);
  s = ((s + s.transpose()) / 2.0).eval();
  return SampleCovariance::checked(std::move(s), n, ridge);
}

namespace {

json alm_log_to_json(const MultiStartLog& log) {
  json out;
  out["batches"] = log.batches;
  out["total_runs"] = log.total_runs;
  out["converged"] = log.converged;
  out["admissible"] = log.admissible;
  out["degraded"] = log.degraded;
  out["max_h_converged"] = log.max_h_converged;
  return out;
}

json fit_to_json(const FitResult& fit, std::int64_t n, const Meta& meta) {
  json root;
  root["format"] = "hfa-fit/1";
  if (!meta.empty()) root["meta"] = meta_to_json(meta);
  root["data"] = {{"variables", fit.tree.num_variables}, {"sample_size", n}};

  json est;
  est["factors"] = fit.num_factors();
  est["layers"] = fit.layers;
  est["discrepancy"] = fit.discrepancy;
  est["bic"] = fit.bic_value;
  est["free_parameters"] = fit.num_free_params;
  est["refit_converged"] = fit.refit_converged;
  root["estimates"] = std::move(est);

  json search = json::array();
  for (const FactorDiagnostics& diag : fit.factor_log) {
    json entry;
    entry["factor"] = diag.label;
    entry["variables"] = diag.variables;
    entry["selected_children"] = diag.outcome.child_count;
    entry["criterion"] = diag.outcome.ic;
    entry["widths"] = diag.outcome.selected_d;
    entry["schedule"] = {{"c_max", diag.outcome.schedule.c_max},
                         {"d", diag.outcome.schedule.d}};
    json candidates = json::array();
    for (const ChildCandidate& cand : diag.outcome.candidates) {
      json jc;
      jc["children"] = cand.c;
      jc["criterion"] = cand.ic;
      jc["usable"] = cand.usable;
      if (!cand.note.empty()) jc["note"] = cand.note;
      if (cand.c > 0) {
        jc["widths"] = cand.d;
        jc["blocks"] = cand.partition.blocks;
        jc["alm"] = alm_log_to_json(cand.alm_log);
      }
      candidates.push_back(std::move(jc));
    }
    entry["candidates"] = std::move(candidates);
    search.push_back(std::move(entry));
  }
  root["factor_search"] = std::move(search);
  return root;
}

}  // namespace

void write_fit_bundle(const std::string& dir, const FitResult& fit,
                      std::int64_t n, const Meta& meta) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_tree_file((base / "tree.json").string(), fit.tree, meta);
  write_matrix_file((base / "loadings.tsv").string(), fit.loadings, meta);
  write_matrix_file((base / "psi2.tsv").string(), fit.psi2, meta);
  write_json_file((base / "fit.json").string(), fit_to_json(fit, n, meta));
}

namespace {

json score_to_json(const RecoveryScore& score) {
  json out;
  out["exact_match"] = score.exact_match;
  out["layer_match"] = score.layer_match;
  out["fitted_factors"] = score.fitted_factors;
  out["fitted_layers"] = score.fitted_layers;
  out["fitted_layer_sizes"] = score.fitted_layer_sizes;
  if (score.mse_loadings) out["mse_loadings"] = *score.mse_loadings;
  if (score.mse_psi) out["mse_psi"] = *score.mse_psi;
  return out;
}

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out.empty() ? "-" : out;
}

}  // namespace

void write_benchmark(const std::string& dir, const BenchmarkResult& result,
                     const Meta& meta) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);

  {
    const std::string path = (base / "summary.tsv").string();
    std::ofstream out = open_output(path);
    write_meta_comments(out, meta);
    out << result.summary_text;
    finish_output(out, path);
  }

  {
    const std::string path = (base / "replications.tsv").string();
    std::ofstream out = open_output(path);
    write_meta_comments(out, meta);
    out << "setting\tj\tn\trep\tfailed\texact_match\tfitted_factors"
           "\tfitted_layers\tfitted_layer_sizes\tlayer_match"
           "\tmse_loadings\tmse_psi\tmax_h\terror\n";
    for (const ReplicationRecord& rec : result.replications) {
      const BenchmarkSetting& setting =
          result.summaries[static_cast<std::size_t>(rec.setting)].setting;
      out << rec.setting << '\t' << setting.j << '\t' << setting.n << '\t'
          << rec.rep << '\t' << (rec.failed ? 1 : 0) << '\t'
          << (rec.score.exact_match ? 1 : 0) << '\t'
          << rec.score.fitted_factors << '\t' << rec.score.fitted_layers
          << '\t' << join_ints(rec.score.fitted_layer_sizes) << '\t'
          << join_ints(rec.score.layer_match) << '\t'
          << (rec.score.mse_loadings ? format_full(*rec.score.mse_loadings)
                                     : "-")
          << '\t'
          << (rec.score.mse_psi ? format_full(*rec.score.mse_psi) : "-")
          << '\t' << format_full(rec.max_h_converged) << '\t'
          << (rec.error.empty() ? "-" : sanitized(rec.error)) << '\n';
    }
    finish_output(out, path);
  }

  json root;
  root["format"] = "hfa-benchmark/1";
  if (!meta.empty()) root["meta"] = meta_to_json(meta);
  json summaries = json::array();
  for (const SettingSummary& s : result.summaries) {
    json js;
    js["j"] = s.setting.j;
    js["n"] = s.setting.n;
    js["reps"] = s.setting.reps;
    js["completed"] = s.completed;
    js["failures"] = s.failures;
    js["exact_match_rate"] = s.exact_match_rate;
    js["exact_matches"] = s.exact_matches;
    js["mean_factors"] = s.mean_factors;
    js["mean_layers"] = s.mean_layers;
    js["layer_match_rate"] = s.layer_match_rate;
    js["mean_layer_size"] = s.mean_layer_size;
    if (s.mean_mse_loadings) js["mean_mse_loadings"] = *s.mean_mse_loadings;
    if (s.mean_mse_psi) js["mean_mse_psi"] = *s.mean_mse_psi;
    summaries.push_back(std::move(js));
  }
  root["summaries"] = std::move(summaries);
  json reps = json::array();
  for (const ReplicationRecord& rec : result.replications) {
    json jr;
    jr["setting"] = rec.setting;
    jr["rep"] = rec.rep;
    jr["failed"] = rec.failed;
    jr["max_h_converged"] = rec.max_h_converged;
    if (!rec.error.empty()) jr["error"] = rec.error;
    jr["score"] = score_to_json(rec.score);
    reps.push_back(std::move(jr));
  }
  root["replications"] = std::move(reps);
  write_json_file((base / "benchmark.json").string(), root);
}

void write_condition_report(const std::string& dir,
                            const ConditionReport& report, const Meta& meta) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);

  {
    const std::string path = (base / "check.txt").string();
    std::ofstream out = open_output(path);
    write_meta_comments(out, meta);
    out << report.to_string();
    finish_output(out, path);
  }

  json root;
  root["format"] = "hfa-conditions/1";
  if (!meta.empty()) root["meta"] = meta_to_json(meta);
  root["overall"] = to_string(report.overall());
  json clauses = json::array();
  for (const ClauseResult& c : report.clauses) {
    json jc;
    jc["clause"] = c.clause;
    jc["status"] = to_string(c.status);
    jc["checked"] = c.checked;
    jc["failed"] = c.failed;
    jc["undecided"] = c.undecided;
    if (!c.detail.empty()) jc["detail"] = c.detail;
    clauses.push_back(std::move(jc));
  }
  root["clauses"] = std::move(clauses);
  write_json_file((base / "check.json").string(), root);
}

}  // namespace hfa
