#include "hfa/conditions.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <utility>

#include <Eigen/SVD>

#include "hfa/error.hpp"
#include "hfa/rng.hpp"

namespace hfa {
namespace {

// Witness searches must not depend on ambient state; every instance derives
// its stream from this constant plus the clause tag and factor labels.
constexpr std::uint64_t kWitnessSearchSeed = 0xe1e2ULL;

Index rank_of(const Matrix& a, double rel_tol) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& sv = svd.singularValues();
  if (!(sv(0) > 0.0)) return 0;
  const double cutoff = rel_tol * sv(0);
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return rank;
}

/// Rows are 1-based variable labels, columns 1-based factor labels.
Matrix submatrix(const Matrix& loadings, const std::vector<int>& variables,
                 const std::vector<int>& factors) {
  Matrix out(static_cast<Index>(variables.size()),
             static_cast<Index>(factors.size()));
  for (std::size_t r = 0; r < variables.size(); ++r)
    for (std::size_t c = 0; c < factors.size(); ++c)
      out(static_cast<Index>(r), static_cast<Index>(c)) =
          loadings(variables[r] - 1, factors[c] - 1);
  return out;
}

std::vector<int> descendants(const FactorTree& tree, int label) {
  std::vector<int> out;
  std::vector<int> work(tree.at(label).children);
  while (!work.empty()) {
    const int l = work.back();
    work.pop_back();
    out.push_back(l);
    if (out.size() > tree.factors.size())
      throw StructuralError("factor links contain a cycle");
    const FactorNode& node = tree.at(l);
    work.insert(work.end(), node.children.begin(), node.children.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> sorted_union(std::vector<int> head, const std::vector<int>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  std::sort(head.begin(), head.end());
  return head;
}

class Clause {
 public:
  explicit Clause(std::string name) { result_.clause = std::move(name); }

  void pass() { ++result_.checked; }
  void fail(const std::string& what) {
    ++result_.checked;
    ++result_.failed;
    note(what);
  }
  void undecided(const std::string& what) {
    ++result_.checked;
    ++result_.undecided;
    note(what);
  }

  ClauseResult take() {
    result_.status = result_.failed > 0 ? ConditionStatus::fail
                     : result_.undecided > 0 ? ConditionStatus::inconclusive
                                             : ConditionStatus::pass;
    const int unreported = result_.failed + result_.undecided - noted_;
    if (unreported > 0)
      result_.detail += "; +" + std::to_string(unreported) + " more";
    return std::move(result_);
  }

 private:
  void note(const std::string& what) {
    if (noted_ >= 3) return;
    if (!result_.detail.empty()) result_.detail += "; ";
    result_.detail += what;
    ++noted_;
  }

  ClauseResult result_;
  int noted_ = 0;
};

// -------- witness-pair search --------
//
// Looks for disjoint row sets E1, E2 of the candidate pool such that the E1
// rows of pool1 and the E2 rows of pool2 are both of full rank. A greedy pass
// picks rows that grow the rank, first for E1 then for E2 from the leftovers;
// when greed fails the search enumerates every pair if the pair space fits
// the budget (definitive), otherwise probes with reshuffled greedy passes and
// plain random draws until the budget runs out (undecided).

enum class SearchOutcome { found, absent, undecided };

bool rows_full_rank(const Matrix& pool, const int* rows, int count, double tol) {
  Matrix sub(count, pool.cols());
  for (int i = 0; i < count; ++i) sub.row(i) = pool.row(rows[i]);
  return rank_of(sub, tol) == std::min<Index>(count, pool.cols());
}

bool greedy_pick(const Matrix& pool, const std::vector<int>& order,
                 const std::vector<char>& taken, int want, double tol,
                 std::vector<int>* chosen) {
  chosen->clear();
  Matrix sub(want, pool.cols());
  for (int pos : order) {
    if (taken[static_cast<std::size_t>(pos)]) continue;
    const Index have = static_cast<Index>(chosen->size());
    sub.row(have) = pool.row(pos);
    if (rank_of(sub.topRows(have + 1), tol) == have + 1) {
      chosen->push_back(pos);
      if (static_cast<int>(chosen->size()) == want) return true;
    }
  }
  return false;
}

bool greedy_witness(const Matrix& pool1, const Matrix& pool2, int r1, int r2,
                    double tol, const std::vector<int>& order) {
  std::vector<int> e1, e2;
  std::vector<char> taken(static_cast<std::size_t>(pool1.rows()), 0);
  if (!greedy_pick(pool1, order, taken, r1, tol, &e1)) return false;
  for (int pos : e1) taken[static_cast<std::size_t>(pos)] = 1;
  return greedy_pick(pool2, order, taken, r2, tol, &e2);
}

/// Combinations as strictly increasing positions in [0, n).
bool next_combination(std::vector<int>& c, int n) {
  const int k = static_cast<int>(c.size());
  for (int i = k - 1; i >= 0; --i) {
    if (c[static_cast<std::size_t>(i)] < n - k + i) {
      ++c[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j)
        c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
      return true;
    }
  }
  return false;
}

/// Number of ordered disjoint pairs (E1, E2), saturating just past `cap`.
double pair_space(int n, int r1, int r2, double cap) {
  double total = 1.0;
  auto multiply_choose = [&total, cap](int nn, int rr) {
    for (int i = 1; i <= rr; ++i) {
      total *= static_cast<double>(nn - rr + i);
      total /= static_cast<double>(i);
      if (total > cap) return false;
    }
    return true;
  };
  if (!multiply_choose(n, r1)) return cap + 1.0;
  if (!multiply_choose(n - r1, r2)) return cap + 1.0;
  return total;
}

SearchOutcome exhaustive_search(const Matrix& pool1, const Matrix& pool2,
                                int r1, int r2, double tol) {
  const int n = static_cast<int>(pool1.rows());
  std::vector<int> e1(static_cast<std::size_t>(r1));
  std::iota(e1.begin(), e1.end(), 0);
  std::vector<char> in1(static_cast<std::size_t>(n));
  do {
    if (!rows_full_rank(pool1, e1.data(), r1, tol)) continue;
    std::fill(in1.begin(), in1.end(), 0);
    for (int pos : e1) in1[static_cast<std::size_t>(pos)] = 1;
    std::vector<int> rest;
    rest.reserve(static_cast<std::size_t>(n - r1));
    for (int pos = 0; pos < n; ++pos)
      if (!in1[static_cast<std::size_t>(pos)]) rest.push_back(pos);
    std::vector<int> sel(static_cast<std::size_t>(r2));
    std::iota(sel.begin(), sel.end(), 0);
    std::vector<int> e2(static_cast<std::size_t>(r2));
    do {
      for (int t = 0; t < r2; ++t)
        e2[static_cast<std::size_t>(t)] =
            rest[static_cast<std::size_t>(sel[static_cast<std::size_t>(t)])];
      if (rows_full_rank(pool2, e2.data(), r2, tol)) return SearchOutcome::found;
    } while (next_combination(sel, static_cast<int>(rest.size())));
  } while (next_combination(e1, n));
  return SearchOutcome::absent;
}

int below(Rng& rng, int n) { return static_cast<int>(rng.uniform01() * n); }

void shuffle(std::vector<int>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
    std::swap(v[static_cast<std::size_t>(i)],
              v[static_cast<std::size_t>(below(rng, i + 1))]);
}

SearchOutcome search_witness_pair(const Matrix& pool1, const Matrix& pool2,
                                  int r1, int r2, double tol,
                                  std::uint64_t seed, long budget) {
  const int n = static_cast<int>(pool1.rows());
  if (n < r1 + r2) return SearchOutcome::absent;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  long attempts = 1;
  if (greedy_witness(pool1, pool2, r1, r2, tol, order))
    return SearchOutcome::found;

  if (pair_space(n, r1, r2, static_cast<double>(budget)) <=
      static_cast<double>(budget))
    return exhaustive_search(pool1, pool2, r1, r2, tol);

  Rng rng(seed);
  const long shuffled = std::min<long>(budget, 512);
  for (; attempts < shuffled; ++attempts) {
    shuffle(order, rng);
    if (greedy_witness(pool1, pool2, r1, r2, tol, order))
      return SearchOutcome::found;
  }
  for (; attempts < budget; ++attempts) {
    // Partial Fisher-Yates: the first r1 + r2 slots become a random draw of
    // distinct positions; swaps keep `order` a permutation.
    for (int i = 0; i < r1 + r2; ++i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(i + below(rng, n - i))]);
    if (rows_full_rank(pool1, order.data(), r1, tol) &&
        rows_full_rank(pool2, order.data() + r1, r2, tol))
      return SearchOutcome::found;
  }
  return SearchOutcome::undecided;
}

std::string join_labels(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

const char* to_string(ConditionStatus status) {
  switch (status) {
    case ConditionStatus::pass: return "pass";
    case ConditionStatus::fail: return "fail";
    case ConditionStatus::inconclusive: return "inconclusive";
  }
  return "?";
}

ConditionStatus ConditionReport::overall() const {
  ConditionStatus worst = ConditionStatus::pass;
  for (const ClauseResult& c : clauses) {
    if (c.status == ConditionStatus::fail) return ConditionStatus::fail;
    if (c.status == ConditionStatus::inconclusive)
      worst = ConditionStatus::inconclusive;
  }
  return worst;
}

const ClauseResult* ConditionReport::find(const std::string& clause) const {
  for (const ClauseResult& c : clauses)
    if (c.clause == clause) return &c;
  return nullptr;
}

std::string ConditionReport::to_string() const {
  std::ostringstream os;
  for (const ClauseResult& c : clauses) {
    os << c.clause;
    for (std::size_t i = c.clause.size(); i < 24; ++i) os << ' ';
    os << hfa::to_string(c.status);
    for (std::size_t i = std::string(hfa::to_string(c.status)).size(); i < 14;
         ++i)
      os << ' ';
    os << "checked " << c.checked;
    if (c.failed > 0) os << ", failed " << c.failed;
    if (c.undecided > 0) os << ", undecided " << c.undecided;
    if (!c.detail.empty()) os << "  [" << c.detail << "]";
    os << '\n';
  }
  os << "overall: " << hfa::to_string(overall()) << '\n';
  return os.str();
}

ConditionReport check_conditions(const Matrix& loadings, const FactorTree& tree,
                                 double rel_rank_tol, long pair_budget) {
  const int j = tree.num_variables;
  const int k = tree.size();
  if (loadings.rows() != j || loadings.cols() != k)
    throw StructuralError(
        "loading matrix is " + std::to_string(loadings.rows()) + "x" +
        std::to_string(loadings.cols()) + " but the tree needs " +
        std::to_string(j) + "x" + std::to_string(k));
  if (!(rel_rank_tol > 0.0))
    throw StructuralError("rank tolerance must be positive");
  if (pair_budget < 1) throw StructuralError("pair budget must be positive");

  const LoadingPattern pattern = pattern_from_tree(tree);
  for (Index r = 0; r < loadings.rows(); ++r)
    for (Index c = 0; c < loadings.cols(); ++c)
      if (!pattern.mask(r, c) && loadings(r, c) != 0.0)
        throw StructuralError("loading outside the tree support at variable " +
                              std::to_string(r + 1) + ", factor " +
                              std::to_string(c + 1));

  const ValidationReport validation = validate_tree(tree);

  ConditionReport report;

  // Containment and labelling rules; sizes get their own clauses below.
  {
    Clause clause("structure-rules");
    constexpr TreeRule rules[] = {
        TreeRule::general_factor_coverage, TreeRule::nested_or_disjoint,
        TreeRule::child_count,             TreeRule::children_partition,
        TreeRule::sibling_label_order,     TreeRule::parent_label_order};
    for (TreeRule rule : rules) {
      std::string first;
      int count = 0;
      for (const RuleViolation& v : validation.violations) {
        if (v.rule != rule) continue;
        if (count == 0) first = hfa::to_string(rule) + ": " + v.detail;
        ++count;
      }
      if (count == 0)
        clause.pass();
      else
        clause.fail(count == 1 ? first
                               : first + " (x" + std::to_string(count) + ")");
    }
    report.clauses.push_back(clause.take());
  }

  // The K columns must carry K independent directions.
  {
    Clause clause("loading-rank");
    const Index r = rank_of(loadings, rel_rank_tol);
    if (r == k)
      clause.pass();
    else
      clause.fail("rank " + std::to_string(r) + " of " + std::to_string(k) +
                  " columns");
    report.clauses.push_back(clause.take());
  }

  // Search-space floor: >= 3 variables, >= 7 when the factor splits.
  {
    Clause clause("factor-sizes");
    for (const FactorNode& f : tree.factors) {
      const int size = static_cast<int>(f.variables.size());
      const bool splits = f.children.size() >= 2;
      if (size < 3)
        clause.fail("factor " + std::to_string(f.label) + ": " +
                    std::to_string(size) + " variables (needs 3)");
      else if (splits && size < 7)
        clause.fail("factor " + std::to_string(f.label) + ": splits with " +
                    std::to_string(size) + " variables (needs 7)");
      else
        clause.pass();
    }
    report.clauses.push_back(clause.take());
  }

  // Below these sizes the covariance provably admits a second
  // loading/uniqueness decomposition on the same structure.
  {
    Clause clause("decomposition-sizes");
    for (const FactorNode& f : tree.factors) {
      const int size = static_cast<int>(f.variables.size());
      const bool splits = f.children.size() >= 2;
      if (size <= 2)
        clause.fail("factor " + std::to_string(f.label) + ": " +
                    std::to_string(size) + " variables");
      else if (splits && size <= 6)
        clause.fail("factor " + std::to_string(f.label) +
                    ": splits with only " + std::to_string(size) +
                    " variables");
      else
        clause.pass();
    }
    report.clauses.push_back(clause.take());
  }

  // Parent-child edges in label order; every remaining clause quantifies
  // over these.
  std::vector<std::pair<int, int>> edges;
  for (const FactorNode& f : tree.factors)
    for (int child : f.children) edges.emplace_back(f.label, child);

  // Any two variables of a child must load independently on the
  // (parent, child) column pair.
  {
    Clause clause("pairwise-row-rank");
    for (const auto& [parent, child] : edges) {
      const std::vector<int> cols = {std::min(parent, child),
                                     std::max(parent, child)};
      const std::vector<int>& vars = tree.at(child).variables;
      for (std::size_t a = 0; a < vars.size(); ++a)
        for (std::size_t b = a + 1; b < vars.size(); ++b) {
          const Matrix sub = submatrix(loadings, {vars[a], vars[b]}, cols);
          if (rank_of(sub, rel_rank_tol) == 2)
            clause.pass();
          else
            clause.fail("variables " + std::to_string(vars[a]) + "," +
                        std::to_string(vars[b]) + " under factor " +
                        std::to_string(child));
        }
    }
    report.clauses.push_back(clause.take());
  }

  // The child's (parent, child, descendants) columns must keep full column
  // rank after deleting any single variable.
  {
    Clause clause("leave-one-out-rank");
    for (const auto& [parent, child] : edges) {
      const std::vector<int> cols =
          sorted_union({parent, child}, descendants(tree, child));
      const std::vector<int>& vars = tree.at(child).variables;
      for (int removed : vars) {
        std::vector<int> rows;
        rows.reserve(vars.size() - 1);
        for (int v : vars)
          if (v != removed) rows.push_back(v);
        const Matrix sub = submatrix(loadings, rows, cols);
        if (rank_of(sub, rel_rank_tol) == static_cast<Index>(cols.size()))
          clause.pass();
        else
          clause.fail("factor " + std::to_string(child) + " minus variable " +
                      std::to_string(removed));
      }
    }
    report.clauses.push_back(clause.take());
  }

  // Two variables from each of two sibling children span the
  // (grandparent, parent, sibling, sibling) columns.
  {
    Clause clause("grandchild-quad-rank");
    for (const auto& [parent, child] : edges) {
      const std::vector<int>& siblings = tree.at(child).children;
      if (siblings.size() < 2) continue;
      for (std::size_t s1 = 0; s1 < siblings.size(); ++s1)
        for (std::size_t s2 = s1 + 1; s2 < siblings.size(); ++s2) {
          const std::vector<int> cols =
              sorted_union({parent, child}, {siblings[s1], siblings[s2]});
          const std::vector<int>& va = tree.at(siblings[s1]).variables;
          const std::vector<int>& vb = tree.at(siblings[s2]).variables;
          for (std::size_t a1 = 0; a1 < va.size(); ++a1)
            for (std::size_t a2 = a1 + 1; a2 < va.size(); ++a2)
              for (std::size_t b1 = 0; b1 < vb.size(); ++b1)
                for (std::size_t b2 = b1 + 1; b2 < vb.size(); ++b2) {
                  const std::vector<int> rows = {va[a1], va[a2], vb[b1],
                                                 vb[b2]};
                  const Matrix sub = submatrix(loadings, rows, cols);
                  if (rank_of(sub, rel_rank_tol) == 4)
                    clause.pass();
                  else
                    clause.fail("variables " + join_labels(rows) +
                                " over factors " + join_labels(cols));
                }
        }
    }
    report.clauses.push_back(clause.take());
  }

  // For every variable of a split factor, the rest of its variables must
  // contain two disjoint sets that are each a basis for the factor's own
  // (self + descendants) columns.
  {
    Clause clause("parent-witness-sets");
    for (const FactorNode& f : tree.factors) {
      if (f.children.empty()) continue;
      const std::vector<int> cols = sorted_union({f.label},
                                                 descendants(tree, f.label));
      const int r = static_cast<int>(cols.size());
      for (int excluded : f.variables) {
        std::vector<int> candidates;
        candidates.reserve(f.variables.size() - 1);
        for (int v : f.variables)
          if (v != excluded) candidates.push_back(v);
        const std::string where = "factor " + std::to_string(f.label) +
                                  " excluding variable " +
                                  std::to_string(excluded);
        if (static_cast<int>(candidates.size()) < 2 * r) {
          clause.fail(where + ": needs " + std::to_string(2 * r + 1) +
                      " variables");
          continue;
        }
        const Matrix pool = submatrix(loadings, candidates, cols);
        const std::uint64_t seed = derive_seed(
            kWitnessSearchSeed,
            (4ULL << 32) | static_cast<std::uint64_t>(f.label),
            static_cast<std::uint64_t>(excluded));
        switch (search_witness_pair(pool, pool, r, r, rel_rank_tol, seed,
                                    pair_budget)) {
          case SearchOutcome::found: clause.pass(); break;
          case SearchOutcome::absent:
            clause.fail(where + ": no disjoint basis pair");
            break;
          case SearchOutcome::undecided:
            clause.undecided(where + ": budget of " +
                             std::to_string(pair_budget) + " pairs exhausted");
            break;
        }
      }
    }
    report.clauses.push_back(clause.take());
  }

  // Each child must carry disjoint variable sets that pin down, first, the
  // (parent, child, descendants) columns and, second, the (child,
  // descendants) columns.
  {
    Clause clause("child-witness-sets");
    for (const auto& [parent, child] : edges) {
      const std::vector<int> desc = descendants(tree, child);
      const std::vector<int> cols1 = sorted_union({parent, child}, desc);
      const std::vector<int> cols2 = sorted_union({child}, desc);
      const int r1 = static_cast<int>(cols1.size());
      const int r2 = static_cast<int>(cols2.size());
      const std::vector<int>& vars = tree.at(child).variables;
      const std::string where =
          "factor " + std::to_string(child) + " under " +
          std::to_string(parent);
      if (static_cast<int>(vars.size()) < r1 + r2) {
        clause.fail(where + ": needs " + std::to_string(r1 + r2) +
                    " variables");
        continue;
      }
      const Matrix pool1 = submatrix(loadings, vars, cols1);
      const Matrix pool2 = submatrix(loadings, vars, cols2);
      const std::uint64_t seed = derive_seed(
          kWitnessSearchSeed,
          (5ULL << 32) | static_cast<std::uint64_t>(parent),
          static_cast<std::uint64_t>(child));
      switch (search_witness_pair(pool1, pool2, r1, r2, rel_rank_tol, seed,
                                  pair_budget)) {
        case SearchOutcome::found: clause.pass(); break;
        case SearchOutcome::absent:
          clause.fail(where + ": no disjoint witness sets");
          break;
        case SearchOutcome::undecided:
          clause.undecided(where + ": budget of " +
                           std::to_string(pair_budget) + " pairs exhausted");
          break;
      }
    }
    report.clauses.push_back(clause.take());
  }

  return report;
}

}  // namespace hfa
