#include <doctest.h>

#include <cmath>

#include "hfa/alm.hpp"
#include "hfa/objective.hpp"
#include "hfa/rng.hpp"

using namespace hfa;

TEST_SUITE_BEGIN("alm");

namespace {

// Exact two-block population covariance over 8 variables: a dense leading
// column, rows 1-4 on one group factor, rows 5-8 on another, unit noise.
Matrix two_block_sigma() {
  Vector lead(8), b1(8), b2(8);
  lead << 1.0, 0.9, 1.1, 0.8, 1.2, 0.7, 1.0, 0.9;
  b1 << 0.9, -0.8, 1.0, 0.7, 0.0, 0.0, 0.0, 0.0;
  b2 << 0.0, 0.0, 0.0, 0.0, 0.8, 1.1, -0.9, 0.6;
  Matrix sigma = lead * lead.transpose() + b1 * b1.transpose() +
                 b2 * b2.transpose();
  sigma.diagonal().array() += 1.0;
  return sigma;
}

ALMConfig quick_config() {
  ALMConfig config;
  config.num_starts = 24;
  config.min_admissible = 12;
  config.max_batches = 3;
  config.threads = 2;
  return config;
}

}  // namespace

TEST_CASE("second largest") {
  Vector v(3);
  v << 3.0, 1.0, 2.0;
  CHECK(h_second_largest(v) == 2.0);
  Vector one(1);
  one << 5.0;
  CHECK(h_second_largest(one) == 5.0);
  Vector tie(4);
  tie << 2.0, 7.0, 7.0, 1.0;
  CHECK(h_second_largest(tie) == 7.0);
}

TEST_CASE("pair terms enumerate cross-block products once per unordered pair") {
  const auto cols = uniform_block_columns(2, 2);
  const auto pairs = make_pair_terms(3, cols);
  // 3 rows x (2x2 cross products) = 12
  REQUIRE(pairs.size() == 12);
  CHECK(pairs[0].row == 0);
  CHECK(pairs[0].col_a == 1);
  CHECK(pairs[0].col_b == 3);
  // No duplicated unordered pair
  for (std::size_t i = 0; i < pairs.size(); ++i)
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      const bool same = pairs[i].row == pairs[j].row &&
                        pairs[i].col_a == pairs[j].col_a &&
                        pairs[i].col_b == pairs[j].col_b;
      CHECK_FALSE(same);
    }
}

TEST_CASE("augmented objective equals discrepancy plus penalty terms") {
  // One row, two blocks of one column each (no leading column): the only
  // coupling is lambda(0,0) * lambda(0,1).
  Matrix lambda(1, 2);
  lambda << 0.7, -0.4;
  Vector psi(1);
  psi << 0.9;
  Matrix sample(1, 1);
  sample << 2.0;
  const double n = 37.0;

  const double a = 0.7, b = -0.4, beta0 = 0.3, c_pen = 5.0;
  Vector beta(1);
  beta << beta0;

  Matrix sigma(1, 1);
  sigma << a * a + b * b + 0.81;
  const double expected = discrepancy(sigma, sample, n) + beta0 * (a * b) +
                          0.5 * c_pen * (a * b) * (a * b);

  const double got = augmented_objective(lambda, psi, {{0}, {1}}, beta, c_pen,
                                         Matrix(), sample, n);
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("multi-start recovers an exact two-block structure") {
  const Matrix sigma = two_block_sigma();
  const ALMConfig config = quick_config();

  MultiStartLog log;
  const ALMSolution sol =
      multi_start_solve(2, 2, Matrix(), sigma, 500.0, config, 99, &log);

  CHECK(sol.converged);
  CHECK(sol.admissible);
  CHECK(sol.h_max < config.delta2);
  REQUIRE(sol.partition.blocks.size() == 2);
  CHECK(sol.partition.blocks[0] == std::vector<int>{1, 2, 3, 4});
  CHECK(sol.partition.blocks[1] == std::vector<int>{5, 6, 7, 8});
  // The exact structure fits perfectly.
  CHECK(sol.objective < 1e-3);
  CHECK(log.admissible >= config.min_admissible);
}

TEST_CASE("multi-start is deterministic for a fixed seed") {
  const Matrix sigma = two_block_sigma();
  ALMConfig config = quick_config();
  config.num_starts = 8;
  config.min_admissible = 4;

  MultiStartLog log_a, log_b;
  const ALMSolution a =
      multi_start_solve(2, 1, Matrix(), sigma, 300.0, config, 7, &log_a);
  config.threads = 1;  // thread count must not change the outcome
  const ALMSolution b =
      multi_start_solve(2, 1, Matrix(), sigma, 300.0, config, 7, &log_b);

  CHECK(a.objective == b.objective);
  CHECK(a.loadings == b.loadings);
  CHECK(a.psi == b.psi);
  CHECK(log_a.to_string() == log_b.to_string());
}

TEST_CASE("offset carries the shallow structure") {
  // Remove the leading factor from the model by passing it as offset: the
  // remaining structure is the two group factors alone.
  Vector lead(8);
  lead << 1.0, 0.9, 1.1, 0.8, 1.2, 0.7, 1.0, 0.9;
  const Matrix sigma = two_block_sigma();
  const Matrix offset = lead * lead.transpose();

  ALMConfig config = quick_config();
  const ALMSolution sol =
      multi_start_solve(2, 1, offset, sigma, 400.0, config, 3, nullptr);
  CHECK(sol.converged);
  CHECK(sol.admissible);
  CHECK(sol.partition.blocks[0] == std::vector<int>{1, 2, 3, 4});
  CHECK(sol.partition.blocks[1] == std::vector<int>{5, 6, 7, 8});
}

TEST_CASE("converged solutions satisfy the off-block criterion") {
  const Matrix sigma = two_block_sigma();
  ALMConfig config = quick_config();
  config.num_starts = 16;
  config.min_admissible = 1000;  // force a full batch sweep
  config.max_batches = 1;

  for (int i = 0; i < 16; ++i) {
    const ALMStart start =
        random_alm_start(8, 2, 2, sigma, derive_seed(42, i));
    const ALMSolution sol =
        alm_run(2, 2, Matrix(), sigma, 500.0, start, config);
    if (sol.converged) CHECK(sol.h_max < config.delta2);
  }
}

TEST_SUITE_END();
