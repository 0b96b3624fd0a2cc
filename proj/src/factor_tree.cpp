#include "hfa/factor_tree.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace hfa {

namespace {

std::string set_to_string(const std::vector<int>& v) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << '}';
  return os.str();
}

// a strictly contains b
bool strictly_contains(const std::vector<int>& a, const std::vector<int>& b) {
  return a.size() > b.size() && std::includes(a.begin(), a.end(), b.begin(), b.end());
}

bool disjoint(const std::vector<int>& a, const std::vector<int>& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib)
      ++ia;
    else if (*ib < *ia)
      ++ib;
    else
      return false;
  }
  return true;
}

void check_well_formed(const FactorTree& tree) {
  if (tree.num_variables < 1)
    throw StructuralError("tree has no observed variables");
  if (tree.factors.empty()) throw StructuralError("tree has no factors");
  std::set<int> labels;
  for (const auto& f : tree.factors) {
    if (!labels.insert(f.label).second)
      throw StructuralError("duplicate factor label " + std::to_string(f.label));
    if (f.variables.empty())
      throw StructuralError("factor " + std::to_string(f.label) +
                            " loads no variables");
    if (!std::is_sorted(f.variables.begin(), f.variables.end()))
      throw StructuralError("factor " + std::to_string(f.label) +
                            " has unsorted variable list");
    if (std::adjacent_find(f.variables.begin(), f.variables.end()) !=
        f.variables.end())
      throw StructuralError("factor " + std::to_string(f.label) +
                            " lists a variable twice");
    if (f.variables.front() < 1 || f.variables.back() > tree.num_variables)
      throw StructuralError("factor " + std::to_string(f.label) +
                            " references a variable outside 1.." +
                            std::to_string(tree.num_variables));
  }
}

// Derives parent/child links from set containment: the parent of a set is
// its minimal strict superset. Overlapping (non-nested, non-disjoint) sets
// yield no link; validate_tree reports those separately.
void derive_links(FactorTree& tree) {
  const int k = tree.size();
  for (auto& f : tree.factors) {
    f.parent.reset();
    f.children.clear();
  }
  for (int i = 0; i < k; ++i) {
    int best = -1;
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      if (!strictly_contains(tree.factors[j].variables, tree.factors[i].variables))
        continue;
      if (best < 0 ||
          tree.factors[j].variables.size() < tree.factors[best].variables.size())
        best = j;
    }
    if (best >= 0) tree.factors[i].parent = tree.factors[best].label;
  }
  for (int i = 0; i < k; ++i) {
    if (!tree.factors[i].parent) continue;
    for (auto& f : tree.factors)
      if (f.label == *tree.factors[i].parent) f.children.push_back(tree.factors[i].label);
  }
  // Sibling order: smallest loaded variable first.
  for (auto& f : tree.factors) {
    std::sort(f.children.begin(), f.children.end(), [&](int a, int b) {
      return tree.at(a).variables.front() < tree.at(b).variables.front();
    });
  }
}

}  // namespace

const FactorNode* FactorTree::find(int label) const {
  auto it = std::lower_bound(
      factors.begin(), factors.end(), label,
      [](const FactorNode& f, int l) { return f.label < l; });
  return (it != factors.end() && it->label == label) ? &*it : nullptr;
}

const FactorNode& FactorTree::at(int label) const {
  const FactorNode* f = find(label);
  if (!f)
    throw StructuralError("no factor with label " + std::to_string(label));
  return *f;
}

FactorTree tree_from_variable_sets(int num_variables,
                                   const std::vector<std::vector<int>>& sets) {
  FactorTree tree;
  tree.num_variables = num_variables;
  tree.factors.reserve(sets.size());
  int label = 1;
  for (auto vars : sets) {
    std::sort(vars.begin(), vars.end());
    FactorNode f;
    f.label = label++;
    f.variables = std::move(vars);
    tree.factors.push_back(std::move(f));
  }
  check_well_formed(tree);
  derive_links(tree);
  return tree;
}

FactorTree tree_from_nodes(int num_variables, std::vector<FactorNode> nodes) {
  FactorTree tree;
  tree.num_variables = num_variables;
  tree.factors = std::move(nodes);
  std::sort(tree.factors.begin(), tree.factors.end(),
            [](const FactorNode& a, const FactorNode& b) { return a.label < b.label; });
  for (auto& f : tree.factors) std::sort(f.variables.begin(), f.variables.end());
  check_well_formed(tree);

  const auto declared = tree.factors;
  derive_links(tree);
  for (std::size_t i = 0; i < declared.size(); ++i) {
    const auto& d = declared[i];
    const auto& g = tree.factors[i];
    if (d.parent != g.parent)
      throw StructuralError("factor " + std::to_string(d.label) +
                            ": declared parent does not match set containment");
    if (!d.children.empty()) {
      auto a = d.children;
      auto b = g.children;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b)
        throw StructuralError("factor " + std::to_string(d.label) +
                              ": declared children do not match set containment");
    }
  }
  return tree;
}

std::string to_string(TreeRule rule) {
  switch (rule) {
    case TreeRule::general_factor_coverage: return "general_factor_coverage";
    case TreeRule::nested_or_disjoint: return "nested_or_disjoint";
    case TreeRule::child_count: return "child_count";
    case TreeRule::children_partition: return "children_partition";
    case TreeRule::sibling_label_order: return "sibling_label_order";
    case TreeRule::parent_label_order: return "parent_label_order";
    case TreeRule::min_variables: return "min_variables";
  }
  return "?";
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& v : violations)
    os << hfa::to_string(v.rule) << " at factor " << v.factor_label << ": "
       << v.detail << '\n';
  return os.str();
}

ValidationReport validate_tree(const FactorTree& tree) {
  check_well_formed(tree);
  ValidationReport report;
  auto add = [&](TreeRule rule, int label, std::string detail) {
    report.violations.push_back({rule, label, std::move(detail)});
  };

  const FactorNode* root = tree.find(1);
  if (!root || static_cast<int>(root->variables.size()) != tree.num_variables) {
    add(TreeRule::general_factor_coverage, 1,
        root ? "factor 1 loads " + std::to_string(root->variables.size()) +
                   " of " + std::to_string(tree.num_variables) + " variables"
             : "factor 1 is missing");
  }

  const int k = tree.size();
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const auto& a = tree.factors[i];  // smaller label
      const auto& b = tree.factors[j];
      if (!strictly_contains(a.variables, b.variables) &&
          !disjoint(a.variables, b.variables))
        add(TreeRule::nested_or_disjoint, a.label,
            "sets of factors " + std::to_string(a.label) + " and " +
                std::to_string(b.label) + " overlap without nesting");
    }
  }

  for (const auto& f : tree.factors) {
    if (f.children.size() == 1)
      add(TreeRule::child_count, f.label, "exactly one child");

    if (!f.children.empty()) {
      std::vector<int> merged;
      for (int c : f.children) {
        const auto& cv = tree.at(c).variables;
        merged.insert(merged.end(), cv.begin(), cv.end());
      }
      std::sort(merged.begin(), merged.end());
      bool dup = std::adjacent_find(merged.begin(), merged.end()) != merged.end();
      if (dup || merged != f.variables)
        add(TreeRule::children_partition, f.label,
            dup ? "children overlap"
                : "children cover " + set_to_string(merged) + " instead of " +
                      set_to_string(f.variables));
      // Sibling order by smallest variable, labels ascending along it.
      for (std::size_t s = 0; s + 1 < f.children.size(); ++s) {
        const auto& u = tree.at(f.children[s]);
        const auto& v = tree.at(f.children[s + 1]);
        if ((u.variables.front() < v.variables.front()) != (u.label < v.label))
          add(TreeRule::sibling_label_order, std::min(u.label, v.label),
              "siblings " + std::to_string(u.label) + " and " +
                  std::to_string(v.label) + " are not labelled by smallest variable");
      }
    }

    const int m = static_cast<int>(f.variables.size());
    if (m < 3)
      add(TreeRule::min_variables, f.label,
          "loads " + std::to_string(m) + " variables (minimum 3)");
    else if (f.children.size() >= 2 && m < 7)
      add(TreeRule::min_variables, f.label,
          "splits with only " + std::to_string(m) + " variables (minimum 7)");
  }

  // Factors under smaller-labelled parents must carry smaller labels.
  for (const auto& a : tree.factors) {
    if (!a.parent) continue;
    for (const auto& b : tree.factors) {
      if (!b.parent || a.label == b.label) continue;
      if (*a.parent < *b.parent && a.label > b.label) {
        add(TreeRule::parent_label_order, std::min(a.label, b.label),
            "factor " + std::to_string(a.label) + " (parent " +
                std::to_string(*a.parent) + ") must precede factor " +
                std::to_string(b.label) + " (parent " + std::to_string(*b.parent) +
                ")");
      }
    }
  }

  return report;
}

std::vector<std::vector<int>> compute_layers(const FactorTree& tree) {
  check_well_formed(tree);
  if (!tree.find(1)) throw StructuralError("factor 1 is missing");
  std::vector<std::vector<int>> layers;
  std::vector<int> current{1};
  std::size_t seen = 0;
  while (!current.empty()) {
    std::sort(current.begin(), current.end());
    seen += current.size();
    layers.push_back(current);
    std::vector<int> next;
    for (int l : current) {
      const auto& ch = tree.at(l).children;
      next.insert(next.end(), ch.begin(), ch.end());
    }
    current = std::move(next);
  }
  if (seen != tree.factors.size())
    throw StructuralError("tree links do not reach every factor from factor 1");
  return layers;
}

FactorTree canonical_relabel(const FactorTree& tree) {
  check_well_formed(tree);

  // Work from containment structure so arbitrary labels are acceptable.
  FactorTree linked = tree;
  derive_links(linked);

  // Roots (factors with no parent) first; a valid tree has exactly one, but
  // relabelling tolerates forests by ordering roots by smallest variable.
  std::vector<int> order;
  std::vector<int> frontier;
  for (const auto& f : linked.factors)
    if (!f.parent) frontier.push_back(f.label);
  std::sort(frontier.begin(), frontier.end(), [&](int a, int b) {
    return linked.at(a).variables.front() < linked.at(b).variables.front();
  });
  while (!frontier.empty()) {
    // frontier is already grouped by parent (in new-label order) and sorted
    // by smallest variable within each group.
    order.insert(order.end(), frontier.begin(), frontier.end());
    std::vector<int> next;
    for (int l : frontier) {
      const auto& ch = linked.at(l).children;  // sorted by smallest variable
      next.insert(next.end(), ch.begin(), ch.end());
    }
    frontier = std::move(next);
  }
  if (order.size() != linked.factors.size())
    throw StructuralError("containment structure is not a forest");

  std::map<int, int> new_label;
  for (std::size_t i = 0; i < order.size(); ++i)
    new_label[order[i]] = static_cast<int>(i) + 1;

  FactorTree out;
  out.num_variables = tree.num_variables;
  out.factors.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const FactorNode& src = linked.at(order[i]);
    FactorNode f;
    f.label = static_cast<int>(i) + 1;
    f.variables = src.variables;
    if (src.parent) f.parent = new_label.at(*src.parent);
    for (int c : src.children) f.children.push_back(new_label.at(c));
    std::sort(f.children.begin(), f.children.end());
    out.factors[i] = std::move(f);
  }
  return out;
}

int LoadingPattern::count_free() const {
  return static_cast<int>(mask.cast<int>().sum());
}

LoadingPattern LoadingPattern::from_mask(BoolMatrix m) {
  return LoadingPattern{std::move(m)};
}

LoadingPattern pattern_from_tree(const FactorTree& tree) {
  check_well_formed(tree);
  const int k = tree.size();
  for (int l = 1; l <= k; ++l)
    if (!tree.find(l))
      throw StructuralError("pattern requires labels 1.." + std::to_string(k));
  BoolMatrix mask = BoolMatrix::Constant(tree.num_variables, k, false);
  for (const auto& f : tree.factors)
    for (int v : f.variables) mask(v - 1, f.label - 1) = true;
  return LoadingPattern{std::move(mask)};
}

FactorTree tree_from_supports(int num_variables,
                              const std::vector<std::vector<int>>& supports) {
  return canonical_relabel(tree_from_variable_sets(num_variables, supports));
}

}  // namespace hfa
