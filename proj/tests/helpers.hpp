#pragma once

#include <numeric>
#include <vector>

#include "hfa/factor_tree.hpp"

// Shared fixtures for the test suite.

inline std::vector<int> var_range(int lo, int hi) {
  std::vector<int> v(hi - lo + 1);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

// 16-variable, three-layer example hierarchy: a general factor, one splitting
// child over variables 1-8 and two leaf children, then two leaves below the
// split.
inline hfa::FactorTree tree16() {
  return hfa::tree_from_variable_sets(
      16, {var_range(1, 16), var_range(1, 8), var_range(9, 12),
           var_range(13, 16), var_range(1, 4), var_range(5, 8)});
}

// Variable sets of the four-layer, ten-factor benchmark hierarchy for J
// divisible by 18 (see hfa::default_benchmark_tree).
inline std::vector<std::vector<int>> benchmark_sets(int j) {
  return {var_range(1, j),
          var_range(1, j / 3),
          var_range(j / 3 + 1, j),
          var_range(1, j / 6),
          var_range(j / 6 + 1, j / 3),
          var_range(j / 3 + 1, 5 * j / 9),
          var_range(5 * j / 9 + 1, 7 * j / 9),
          var_range(7 * j / 9 + 1, j),
          var_range(j / 3 + 1, 4 * j / 9),
          var_range(4 * j / 9 + 1, 5 * j / 9)};
}

inline bool trees_equal(const hfa::FactorTree& a, const hfa::FactorTree& b) {
  if (a.num_variables != b.num_variables || a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i) {
    const auto& fa = a.factors[i];
    const auto& fb = b.factors[i];
    if (fa.label != fb.label || fa.variables != fb.variables ||
        fa.parent != fb.parent || fa.children != fb.children)
      return false;
  }
  return true;
}
