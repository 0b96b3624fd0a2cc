#include "hfa/conditions.hpp"

#include <doctest.h>

#include "hfa/rng.hpp"
#include "hfa/simulate.hpp"
#include "helpers.hpp"

using namespace hfa;

TEST_SUITE_BEGIN("conditions");

namespace {

Truth truth16(std::uint64_t seed) {
  TruthSpec spec;
  spec.tree = tree16();
  Rng rng(seed);
  return generate_truth(spec, rng);
}

}  // namespace

TEST_CASE("generated truths pass every clause") {
  // Continuously drawn loadings are generically full rank, so the audit
  // should come back clean across seeds and at both test tree sizes.
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    const Truth truth = truth16(seed);
    const ConditionReport report = check_conditions(truth.loadings, tree16());
    CAPTURE(seed);
    CAPTURE(report.to_string());
    CHECK(report.all_pass());
  }

  const FactorTree tree36 = default_benchmark_tree(36);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    TruthSpec spec;
    spec.tree = tree36;
    Rng rng(seed);
    const Truth truth = generate_truth(spec, rng);
    const ConditionReport report = check_conditions(truth.loadings, tree36);
    CAPTURE(seed);
    CAPTURE(report.to_string());
    CHECK(report.all_pass());
  }
}

TEST_CASE("report is deterministic") {
  const Truth truth = truth16(9);
  const ConditionReport a = check_conditions(truth.loadings, tree16());
  const ConditionReport b = check_conditions(truth.loadings, tree16());
  CHECK(a.to_string() == b.to_string());
  CHECK(a.overall() == ConditionStatus::pass);
}

TEST_CASE("two-variable factor trips both size clauses") {
  // Root splits into a 2-variable factor and a 4-variable factor. The tree
  // itself is buildable; only the audit should object.
  const FactorTree tree = tree_from_variable_sets(
      6, {var_range(1, 6), {1, 2}, var_range(3, 6)});
  Matrix lam = Matrix::Zero(6, 3);
  Rng rng(3);
  for (int r = 0; r < 6; ++r) lam(r, 0) = rng.uniform(0.5, 2.0);
  for (int r : {0, 1}) lam(r, 1) = rng.uniform(0.5, 2.0);
  for (int r : {2, 3, 4, 5}) lam(r, 2) = rng.uniform(0.5, 2.0);

  const ConditionReport report = check_conditions(lam, tree);
  CHECK(!report.all_pass());
  CHECK(report.overall() == ConditionStatus::fail);

  const ClauseResult* sizes = report.find("factor-sizes");
  REQUIRE(sizes != nullptr);
  CHECK(sizes->status == ConditionStatus::fail);
  CHECK(sizes->detail.find("factor 2") != std::string::npos);

  // 2 variables admit another loading/uniqueness split, and the root splits
  // with fewer than 7 variables.
  const ClauseResult* decomp = report.find("decomposition-sizes");
  REQUIRE(decomp != nullptr);
  CHECK(decomp->status == ConditionStatus::fail);
  CHECK(decomp->failed == 2);

  // Structure rules are about containment and labels, not sizes.
  const ClauseResult* structure = report.find("structure-rules");
  REQUIRE(structure != nullptr);
  CHECK(structure->status == ConditionStatus::pass);
}

TEST_CASE("proportional rows in a child block fail the pairwise clause") {
  Truth truth = truth16(4);
  // Rows 1 and 2 over the (root, factor 2) columns become multiples.
  truth.loadings(0, 0) = 1.0;
  truth.loadings(0, 1) = 1.0;
  truth.loadings(1, 0) = 2.0;
  truth.loadings(1, 1) = 2.0;

  const ConditionReport report = check_conditions(truth.loadings, tree16());
  const ClauseResult* pairwise = report.find("pairwise-row-rank");
  REQUIRE(pairwise != nullptr);
  CHECK(pairwise->status == ConditionStatus::fail);
  CHECK(pairwise->detail.find("variables 1,2 under factor 2") !=
        std::string::npos);
}

TEST_CASE("rank tolerance separates near-dependence from noise") {
  // Rows (1, 0) and (1, eps): the singular value ratio is about eps / 2, so
  // the default 1e-8 relative cutoff keeps eps = 1e-7 independent and
  // collapses eps = 1e-9.
  Truth truth = truth16(5);
  truth.loadings(0, 0) = 1.0;
  truth.loadings(0, 1) = 0.0;
  truth.loadings(1, 0) = 1.0;

  truth.loadings(1, 1) = 1e-7;
  CHECK(check_conditions(truth.loadings, tree16())
            .find("pairwise-row-rank")
            ->status == ConditionStatus::pass);

  truth.loadings(1, 1) = 1e-9;
  CHECK(check_conditions(truth.loadings, tree16())
            .find("pairwise-row-rank")
            ->status == ConditionStatus::fail);
}

TEST_CASE("a zeroed descendant column fails rank and leave-one-out clauses") {
  Truth truth = truth16(6);
  truth.loadings.col(4).setZero();  // factor 5, support variables 1..4

  const ConditionReport report = check_conditions(truth.loadings, tree16());
  CHECK(report.find("loading-rank")->status == ConditionStatus::fail);
  // Edge root -> factor 2 carries columns {1,2,5,6}; with column 5 dead the
  // submatrix cannot reach full column rank whichever of the 8 variables is
  // removed. Edge 2 -> 5 (columns {2,5}) fails all 4 removals the same way.
  const ClauseResult* loo = report.find("leave-one-out-rank");
  CHECK(loo->status == ConditionStatus::fail);
  CHECK(loo->failed == 12);
}

TEST_CASE("cross-sibling collinearity fails only the quad clause") {
  Truth truth = truth16(7);
  // Factors 5 ({1..4}) and 6 ({5..8}) are siblings under factor 2. Align
  // variables 1, 2 on the factor-5 column, then build row 6 from rows 5, 1,
  // 2 so the quadruple (1,2,5,6) over factors {1,2,5,6} is singular while
  // every pair of rows stays independent.
  truth.loadings(0, 4) = 1.0;
  truth.loadings(1, 4) = 1.0;
  truth.loadings(5, 0) =
      truth.loadings(4, 0) + truth.loadings(0, 0) - truth.loadings(1, 0);
  truth.loadings(5, 1) =
      truth.loadings(4, 1) + truth.loadings(0, 1) - truth.loadings(1, 1);
  truth.loadings(5, 5) = truth.loadings(4, 5);

  const ConditionReport report = check_conditions(truth.loadings, tree16());
  const ClauseResult* quad = report.find("grandchild-quad-rank");
  REQUIRE(quad != nullptr);
  CHECK(quad->status == ConditionStatus::fail);
  CHECK(quad->detail.find("variables 1,2,5,6 over factors 1,2,5,6") !=
        std::string::npos);
  CHECK(report.find("pairwise-row-rank")->status == ConditionStatus::pass);
  CHECK(report.find("loading-rank")->status == ConditionStatus::pass);
}

TEST_CASE("witness search proves absence by exhaustion on small factors") {
  // Column 1 equals column 2 plus column 3 entrywise, so the three columns
  // span only two directions and no size-3 basis subset exists. With 6
  // candidate rows the pair space (20) is fully enumerable: definitive fail,
  // not inconclusive.
  const FactorTree tree = tree_from_variable_sets(
      7, {var_range(1, 7), {1, 2, 3}, var_range(4, 7)});
  Matrix lam = Matrix::Zero(7, 3);
  Rng rng(11);
  for (int r = 0; r < 3; ++r) {
    lam(r, 1) = rng.uniform(0.5, 2.0);
    lam(r, 0) = lam(r, 1);
  }
  for (int r = 3; r < 7; ++r) {
    lam(r, 2) = rng.uniform(0.5, 2.0);
    lam(r, 0) = lam(r, 2);
  }

  const ConditionReport report = check_conditions(lam, tree);
  const ClauseResult* parent = report.find("parent-witness-sets");
  REQUIRE(parent != nullptr);
  CHECK(parent->status == ConditionStatus::fail);
  CHECK(parent->checked == 7);
  CHECK(parent->failed == 7);
  CHECK(parent->undecided == 0);
}

TEST_CASE("witness search under budget reports inconclusive, not failure") {
  // Factor 3's rows come in three proportional classes over (root, factor 3):
  // {3,4}, {5,6}, {7}. A size-3 basis of columns {1,2,3} needs a factor-2 row
  // plus two cross-class factor-3 rows, so excluding a factor-2 variable
  // leaves no disjoint basis pair; excluding a factor-3 variable leaves
  // exactly one split, which ascending greed misses but shuffled probing
  // finds. A budget of 19 keeps every instance below the exhaustive
  // threshold (pair space 20).
  const FactorTree tree = tree_from_variable_sets(
      7, {var_range(1, 7), {1, 2}, var_range(3, 7)});
  Matrix lam = Matrix::Zero(7, 3);
  lam(0, 0) = 0.9;
  lam(0, 1) = 1.3;
  lam(1, 0) = 1.1;
  lam(1, 1) = 0.7;
  const double cls[5][2] = {
      {1.0, 1.0}, {1.4, 1.4}, {1.0, 2.0}, {0.6, 1.2}, {0.5, 1.5}};
  for (int i = 0; i < 5; ++i) {
    lam(2 + i, 0) = cls[i][0];
    lam(2 + i, 2) = cls[i][1];
  }

  const ConditionReport report = check_conditions(lam, tree, 1e-8, 19);
  const ClauseResult* parent = report.find("parent-witness-sets");
  REQUIRE(parent != nullptr);
  CHECK(parent->checked == 7);
  CHECK(parent->failed == 0);
  CHECK(parent->undecided == 2);
  CHECK(parent->status == ConditionStatus::inconclusive);
  CHECK(parent->detail.find("budget of 19 pairs exhausted") !=
        std::string::npos);
  CHECK(report.overall() == ConditionStatus::fail);  // size clauses still fire

  // Child witnesses: the 2-variable factor cannot host disjoint sets of
  // sizes 2 and 1; factor 3 can.
  const ClauseResult* child = report.find("child-witness-sets");
  REQUIRE(child != nullptr);
  CHECK(child->checked == 2);
  CHECK(child->failed == 1);
}

TEST_CASE("default budget matches the documented cap") {
  CHECK(kWitnessPairBudget == 100000);
}

TEST_CASE("input validation") {
  const Truth truth = truth16(8);

  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(check_conditions(truth.loadings.leftCols(5), tree16()),
                    StructuralError);
  }
  SUBCASE("support violation") {
    Matrix lam = truth.loadings;
    lam(15, 1) = 0.4;  // variable 16 does not load on factor 2
    CHECK_THROWS_AS(check_conditions(lam, tree16()), StructuralError);
  }
  SUBCASE("bad tolerance or budget") {
    CHECK_THROWS_AS(check_conditions(truth.loadings, tree16(), 0.0),
                    StructuralError);
    CHECK_THROWS_AS(check_conditions(truth.loadings, tree16(), 1e-8, 0),
                    StructuralError);
  }
}

TEST_SUITE_END();
