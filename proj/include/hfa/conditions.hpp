#pragma once

#include <string>
#include <vector>

#include "hfa/factor_tree.hpp"
#include "hfa/types.hpp"

namespace hfa {

// Identifiability audit for a known loading matrix on a hierarchy. Each
// clause probes one requirement for the structure to be recoverable from the
// population covariance alone: minimum factor sizes, rank conditions on
// blocks of the loading matrix, and the existence of disjoint variable
// subsets that each pin down a factor's column space. Clauses never throw on
// a failing model; they throw only when the inputs are not a loading matrix
// on the given tree.

enum class ConditionStatus { pass, fail, inconclusive };

const char* to_string(ConditionStatus status);

struct ClauseResult {
  std::string clause;
  ConditionStatus status = ConditionStatus::pass;
  int checked = 0;    // primitive checks run (pairs, deletions, searches)
  int failed = 0;     // checks that failed outright
  int undecided = 0;  // searches abandoned at the budget
  std::string detail; // first offending instances, empty when clean
};

struct ConditionReport {
  std::vector<ClauseResult> clauses;

  ConditionStatus overall() const;
  bool all_pass() const { return overall() == ConditionStatus::pass; }
  const ClauseResult* find(const std::string& clause) const;
  std::string to_string() const;
};

/// Budget for each witness-set search: candidate (E1, E2) pairs examined
/// before a clause instance is declared undecided.
inline constexpr long kWitnessPairBudget = 100000;

/// Audits `loadings` (J x K, zero off the tree's support) against the tree.
/// Rank decisions count singular values above rel_rank_tol times the largest
/// one. Witness searches are deterministic: a greedy pass, then exhaustive
/// enumeration when the pair space fits the budget, otherwise seeded random
/// probing; an unproven absence is reported inconclusive, never as a pass.
ConditionReport check_conditions(const Matrix& loadings, const FactorTree& tree,
                                 double rel_rank_tol = 1e-8,
                                 long pair_budget = kWitnessPairBudget);

}  // namespace hfa
