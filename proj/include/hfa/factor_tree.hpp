#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hfa/error.hpp"
#include "hfa/types.hpp"

namespace hfa {

/// One factor in a hierarchy. `variables` holds 1-based labels of the
/// observed variables the factor loads on, sorted ascending. `children`
/// holds factor labels in sibling order (smallest loaded variable first).
struct FactorNode {
  int label = 0;
  std::vector<int> variables;
  std::optional<int> parent;
  std::vector<int> children;
};

/// A hierarchy of factors over `num_variables` observed variables.
/// Trees are immutable by convention: every transform returns a new value.
/// Factors are stored sorted by label.
struct FactorTree {
  int num_variables = 0;
  std::vector<FactorNode> factors;

  int size() const { return static_cast<int>(factors.size()); }
  const FactorNode* find(int label) const;
  /// Throws StructuralError when the label is absent.
  const FactorNode& at(int label) const;
};

/// Builds a tree from variable sets; the k-th set gets label k. Parent and
/// child links are derived from strict set containment (the minimal strict
/// superset is the parent). Throws StructuralError on empty sets,
/// out-of-range or duplicate variables.
FactorTree tree_from_variable_sets(int num_variables,
                                   const std::vector<std::vector<int>>& sets);

/// Builds a tree from explicit nodes (deserialization path). Links are
/// re-derived from the variable sets and must agree with the declared ones.
FactorTree tree_from_nodes(int num_variables, std::vector<FactorNode> nodes);

/// Structural rules a well-formed hierarchy must satisfy.
enum class TreeRule {
  general_factor_coverage,  // factor 1 loads every variable
  nested_or_disjoint,       // any two variable sets are nested or disjoint,
                            // and the nested set belongs to the larger label
  child_count,              // a factor has zero or at least two children
  children_partition,       // children's sets partition the parent's set
  sibling_label_order,      // siblings are labelled by smallest variable
  parent_label_order,       // factors of smaller-labelled parents come first
  min_variables,            // >= 3 variables; >= 7 when the factor splits
};

std::string to_string(TreeRule rule);

struct RuleViolation {
  TreeRule rule;
  int factor_label;  // the smaller label for pairwise rules
  std::string detail;
};

struct ValidationReport {
  std::vector<RuleViolation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

/// Checks every structural rule and reports all violations. Malformed input
/// (duplicate labels, variables outside 1..J) throws StructuralError instead
/// of being reported, so a clean report certifies a usable hierarchy.
ValidationReport validate_tree(const FactorTree& tree);

/// Labels grouped by depth: element 0 is {1}, element t-1 holds the labels
/// at depth t in label order. Requires a tree whose links reach every factor
/// from factor 1; throws StructuralError otherwise.
std::vector<std::vector<int>> compute_layers(const FactorTree& tree);

/// Relabels factors into canonical order: breadth first by depth, within a
/// depth grouped by parent label, within a group by smallest loaded
/// variable. Works from the link structure, so the input labels may be
/// arbitrary unique ints. Canonically labelled trees are fixed points.
FactorTree canonical_relabel(const FactorTree& tree);

/// Zero pattern of a loading matrix: mask(j, k) is true when variable j+1
/// may load on factor k+1.
struct LoadingPattern {
  BoolMatrix mask;

  Index rows() const { return mask.rows(); }
  Index cols() const { return mask.cols(); }
  int count_free() const;
  /// Raw-mask constructor for hand-built patterns (no tree semantics).
  static LoadingPattern from_mask(BoolMatrix mask);
};

/// Pattern whose column k-1 is the indicator of factor k's variable set.
/// Requires labels to be exactly 1..K (canonical trees qualify).
LoadingPattern pattern_from_tree(const FactorTree& tree);

/// Rebuilds a canonical tree from per-factor variable supports (the inverse
/// of pattern_from_tree up to relabelling).
FactorTree tree_from_supports(int num_variables,
                              const std::vector<std::vector<int>>& supports);

}  // namespace hfa
