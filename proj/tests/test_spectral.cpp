#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "walklab/spectral.hpp"

using namespace walklab;

namespace {

Matrix random_stochastic(int n, std::uint64_t seed, bool symmetric) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix W(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) W(i, j) = u(rng) + 0.01;
  if (symmetric) W = (W + W.transpose()).eval();
  return W.rowwise().sum().cwiseInverse().asDiagonal() * W;
}

Matrix directed_cycle(int n) {
  Matrix P = Matrix::Zero(n, n);
  for (int x = 0; x < n; ++x) P(x, (x + 1) % n) = 1.0;
  return P;
}

// Singular values as square roots of the eigenvalues of D^T D.
std::vector<double> gram_singular_values(const Matrix& D) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(D.transpose() * D);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(std::sqrt(std::max(0.0, es.eigenvalues()[i])));
  std::sort(out.rbegin(), out.rend());
  return out;
}

}  // namespace

TEST(Spectral, UniformTwoState) {
  auto c = validate_chain(Matrix::Constant(2, 2, 0.5));
  auto d = build_discriminant(c);
  EXPECT_NEAR(d.singular_values[0], 1.0, 1e-12);
  EXPECT_NEAR(d.singular_values[1], 0.0, 1e-12);
  EXPECT_NEAR(phase_gap(d), kPi, 1e-12);
  EXPECT_NEAR(singular_value_gap(d), 1.0, 1e-12);
}

TEST(Spectral, TwoStateReversible) {
  Matrix P(2, 2);
  P << 0.9, 0.1, 0.2, 0.8;
  auto c = validate_chain(P);
  auto d = build_discriminant(c);
  // Reversible: singular values are |eigenvalues| = {1, 0.7}.
  EXPECT_NEAR(d.singular_values[1], 0.7, 1e-12);
  EXPECT_NEAR(phase_gap(d), 2.0 * std::acos(0.7), 1e-12);
  EXPECT_EQ(check_unit_multiplicity(d, c), 1);
}

TEST(Spectral, DirectedCycleDegenerate) {
  auto c = validate_chain(directed_cycle(6));
  auto d = build_discriminant(c);
  EXPECT_EQ(check_unit_multiplicity(d, c), 6);
  EXPECT_FALSE(d.phase_gap_defined);
  EXPECT_DOUBLE_EQ(d.sv_gap, 0.0);
  try {
    phase_gap(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_spectrum);
  }
}

TEST(Spectral, LazyCycleSingleUnit) {
  auto c = lazify(validate_chain(directed_cycle(6)), 0.3);
  auto d = build_discriminant(c);
  EXPECT_EQ(check_unit_multiplicity(d, c), 1);
  EXPECT_TRUE(d.phase_gap_defined);
}

TEST(Spectral, SingularValuesMatchGramOracle) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto c = validate_chain(random_stochastic(5 + static_cast<int>(seed % 4), seed, false));
    auto d = build_discriminant(c);
    auto oracle = gram_singular_values(d.D);
    for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_NEAR(d.singular_values[static_cast<Eigen::Index>(i)], oracle[i], 1e-9);
    EXPECT_LE(d.singular_values.maxCoeff(), 1.0 + 1e-10);
    EXPECT_GE(d.singular_values.minCoeff(), -1e-10);
  }
}

TEST(Spectral, SqrtPiIsUnitSingularVector) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto c = validate_chain(random_stochastic(6, seed, false));
    auto d = build_discriminant(c);
    Vector v = c.stationary().cwiseSqrt();
    EXPECT_LT((d.D.transpose() * v - v).norm(), 1e-9);
    EXPECT_LT((d.D * v - v).norm(), 1e-9);
  }
}

TEST(Spectral, ReversibleSingularValuesAreAbsEigenvalues) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto c = validate_chain(random_stochastic(6, seed, true));
    auto d = build_discriminant(c);
    CVector ev = chain_eigenvalues(c);
    std::vector<double> mags;
    for (Eigen::Index i = 0; i < ev.size(); ++i) mags.push_back(std::abs(ev[i]));
    std::sort(mags.rbegin(), mags.rend());
    for (std::size_t i = 0; i < mags.size(); ++i) EXPECT_NEAR(d.singular_values[static_cast<Eigen::Index>(i)], mags[i], 1e-9);
  }
}

TEST(Spectral, PhaseGapBoundOnReversibleChains) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto c = lazify(validate_chain(random_stochastic(7, seed, true)), 0.2);
    auto d = build_discriminant(c);
    EXPECT_GE(phase_gap(d), 2.0 * std::sqrt(eigenvalue_gap(c)) - 1e-10);
  }
}

TEST(Spectral, PositiveDiagonalHasOneUnitValue) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto c = lazify(validate_chain(random_stochastic(6, seed, seed % 2 == 0)), 0.1);
    auto d = build_discriminant(c);
    EXPECT_EQ(check_unit_multiplicity(d, c), 1);
  }
}

TEST(Spectral, PhaseGapFromZeroSingularValue) {
  Vector sv(3);
  sv << 1.0, 0.0, 0.0;
  EXPECT_NEAR(phase_gap_of(sv), kPi, 1e-15);
}
