#include <gtest/gtest.h>

#include <random>

#include "walklab/chain.hpp"

using namespace walklab;

namespace {

Matrix two_state(double a, double b) {
  Matrix P(2, 2);
  P << 1 - a, a, b, 1 - b;
  return P;
}

Matrix directed_cycle(int n) {
  Matrix P = Matrix::Zero(n, n);
  for (int x = 0; x < n; ++x) P(x, (x + 1) % n) = 1.0;
  return P;
}

// Symmetric weights; pi is proportional to the row sums.
std::pair<Matrix, Vector> weighted_graph(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix Wt(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) Wt(i, j) = Wt(j, i) = u(rng) + 0.01;
  Vector deg = Wt.rowwise().sum();
  Matrix P = deg.cwiseInverse().asDiagonal() * Wt;
  return {P, deg / deg.sum()};
}

}  // namespace

TEST(Chain, TwoStateStationaryClosedForm) {
  auto c = validate_chain(two_state(0.1, 0.2));
  EXPECT_NEAR(c.stationary()[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(c.stationary()[1], 1.0 / 3.0, 1e-12);
  EXPECT_TRUE(c.flags().reversible);
  EXPECT_TRUE(c.flags().has_self_loops);
  EXPECT_TRUE(c.is_ergodic());
}

TEST(Chain, RejectsNonStochasticRow) {
  Matrix P(2, 2);
  P << 0.5, 0.4, 0.5, 0.5;
  try {
    validate_chain(P);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_stochastic_row);
  }
}

TEST(Chain, RejectsNegativeEntry) {
  Matrix P(2, 2);
  P << 1.2, -0.2, 0.5, 0.5;
  EXPECT_THROW(validate_chain(P), Error);
}

TEST(Chain, RejectsReducible) {
  Matrix P = Matrix::Identity(3, 3);
  try {
    validate_chain(P);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_irreducible);
  }
}

TEST(Chain, DirectedCyclePeriodic) {
  auto c = validate_chain(directed_cycle(5));
  EXPECT_TRUE(c.flags().irreducible);
  EXPECT_FALSE(c.flags().aperiodic);
  EXPECT_EQ(chain_period(c.transition()), 5);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(c.stationary()[i], 0.2, 1e-12);
  EXPECT_FALSE(c.flags().reversible);
}

TEST(Chain, WeightedGraphStationaryMatchesDegrees) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto [P, pi] = weighted_graph(7, seed);
    auto c = validate_chain(P);
    EXPECT_LT((c.stationary() - pi).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE(is_reversible(c));
  }
}

TEST(Chain, TimeReversalOfNonReversible) {
  Matrix P(3, 3);
  P << 0.1, 0.6, 0.3, 0.2, 0.2, 0.6, 0.7, 0.1, 0.2;
  auto c = validate_chain(P);
  EXPECT_FALSE(c.flags().reversible);
  auto r = time_reversal(c);
  const Vector& pi = c.stationary();
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y) EXPECT_NEAR(pi[y] * r(y, x), pi[x] * P(x, y), 1e-12);
  EXPECT_LT((r.stationary() - pi).cwiseAbs().maxCoeff(), 1e-10);
  auto rr = time_reversal(r);
  EXPECT_LT((rr.transition() - P).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Chain, EigenvalueGapComplete) {
  const int n = 10;
  auto c = validate_chain(Matrix::Constant(n, n, 1.0 / n));
  EXPECT_NEAR(eigenvalue_gap(c), 1.0, 1e-10);
}

TEST(Chain, EigenvalueGapTwoState) {
  // eigenvalues 1 and 1 - a - b
  auto c = validate_chain(two_state(0.1, 0.2));
  EXPECT_NEAR(eigenvalue_gap(c), 0.3, 1e-12);
}

TEST(Chain, LazifyKeepsPiAndAddsLoops) {
  auto c = validate_chain(directed_cycle(4));
  auto l = lazify(c, 0.5);
  EXPECT_TRUE(l.flags().has_self_loops);
  EXPECT_TRUE(l.is_ergodic());
  EXPECT_LT((l.stationary() - c.stationary()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(lazify(c, 0.0), Error);
  EXPECT_THROW(lazify(c, 1.0), Error);
  try {
    lazify(c, 1.5);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::alpha_out_of_range);
  }
}

TEST(Chain, MarkedEpsilon) {
  auto c = validate_chain(two_state(0.1, 0.2));
  auto m = make_marked(c, {1, 1});
  EXPECT_EQ(m.members.size(), 1u);
  EXPECT_NEAR(m.epsilon, 1.0 / 3.0, 1e-12);
  EXPECT_THROW(make_marked(c, {2}), Error);
}

TEST(Chain, ClassicalSearchFindsImmediatelyWhenAllMarked) {
  auto c = validate_chain(Matrix::Constant(4, 4, 0.25));
  auto m = make_marked(c, {0, 1, 2, 3});
  auto st = classical_search_1(c, m, 3, 5, 42);
  ASSERT_TRUE(st.found.has_value());
  EXPECT_EQ(st.check_count, 1);
  EXPECT_EQ(st.steps_taken, 0);
  EXPECT_EQ(st.setup_count, 1);
}

TEST(Chain, ClassicalSearchBudgetAndDeterminism) {
  auto c = validate_chain(Matrix::Constant(8, 8, 1.0 / 8));
  auto m = make_marked(c, {3});
  auto a = classical_search_1(c, m, 2, 6, 9);
  auto b = classical_search_1(c, m, 2, 6, 9);
  EXPECT_EQ(a.found, b.found);
  EXPECT_EQ(a.steps_taken, b.steps_taken);
  EXPECT_LE(a.check_count, 6);
  if (!a.found) {
    EXPECT_EQ(a.update_count, 12);
  }
  EXPECT_THROW(classical_search_1(c, m, 0, 3, 1), Error);
}

TEST(Chain, Algorithm2GeometricMean) {
  // On the complete graph each check hits with probability eps independently.
  auto c = validate_chain(Matrix::Constant(8, 8, 1.0 / 8));
  auto m = make_marked(c, {0});
  auto sum = run_classical_trials(c, m, 0, 100000, 20000, 5);
  EXPECT_NEAR(sum.success_rate, 1.0, 1e-12);
  EXPECT_NEAR(sum.mean_checks, 8.0, 0.3);
}

TEST(Chain, TrialsIndependentOfThreadCount) {
  auto c = validate_chain(Matrix::Constant(6, 6, 1.0 / 6));
  auto m = make_marked(c, {2});
  setenv("WALKLAB_THREADS", "1", 1);
  auto a = run_classical_trials(c, m, 1, 10, 500, 3);
  setenv("WALKLAB_THREADS", "3", 1);
  auto b = run_classical_trials(c, m, 1, 10, 500, 3);
  unsetenv("WALKLAB_THREADS");
  EXPECT_EQ(a.success_rate, b.success_rate);
  EXPECT_EQ(a.mean_steps, b.mean_steps);
}
