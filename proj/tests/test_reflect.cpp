#include <gtest/gtest.h>

#include <random>

#include "walklab/reflect.hpp"

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

EdgeState random_state(std::size_t n, std::size_t anc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  EdgeState s = EdgeState::zeros(n, anc);
  for (Eigen::Index i = 0; i < s.amplitudes.size(); ++i) s.amplitudes[i] = Complex(g(rng), g(rng));
  s.amplitudes.normalize();
  return s;
}

// Direct sum over t, no closed form.
CVector kernel_by_sum(double phi, int s) {
  const int N = 1 << s;
  CVector a = CVector::Zero(N);
  for (int j = 0; j < N; ++j)
    for (int t = 0; t < N; ++t) a[j] += std::polar(1.0 / N, t * (phi - 2.0 * kPi * j / N));
  return a;
}

struct Fixture {
  MarkovChain chain;
  Discriminant disc;
  WalkOperator walk;
  explicit Fixture(const Matrix& P) : chain(validate_chain(P)), disc(build_discriminant(chain)), walk(build_walk(chain)) {}
};

}  // namespace

TEST(Kernel, ZeroPhase) {
  CVector a = pe_kernel(0.0, 3);
  EXPECT_DOUBLE_EQ(a[0].real(), 1.0);
  for (int j = 1; j < 8; ++j) EXPECT_LT(std::abs(a[j]), 1e-15);
}

TEST(Kernel, GridPhase) {
  CVector a = pe_kernel(2.0 * kPi * 3 / 8, 3);
  EXPECT_NEAR(std::norm(a[3]), 1.0, 1e-14);
}

TEST(Kernel, QuarterTurnHasNoZeroOutcome) { EXPECT_LT(std::abs(pe_kernel(kPi / 2, 2)[0]), 1e-15); }

TEST(Kernel, MatchesDirectSumAndIsUnit) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int trial = 0; trial < 200; ++trial) {
    double phi = u(rng);
    int s = 1 + trial % 7;
    CVector a = pe_kernel(phi, s);
    EXPECT_NEAR(a.squaredNorm(), 1.0, 1e-12);
    EXPECT_LT((a - kernel_by_sum(phi, s)).norm(), 1e-11);
  }
  EXPECT_THROW(pe_kernel(0.1, 25), Error);
}

TEST(Kernel, RegisterUnitaryColumnZeroIsKernel) {
  for (int s = 1; s <= 5; ++s) {
    CMatrix C = register_unitary(0.77, s);
    EXPECT_LT((C.col(0) - pe_kernel(0.77, s)).norm(), 1e-12);
    EXPECT_LT((C.adjoint() * C - CMatrix::Identity(C.rows(), C.cols())).norm(), 1e-12);
  }
}

TEST(Kernel, AutoBits) {
  EXPECT_EQ(auto_bits(kPi), 2);
  EXPECT_EQ(auto_bits(2 * kPi / 3), 2);
  EXPECT_EQ(auto_bits(0.5), 4);
  EXPECT_EQ(auto_bits(0.3), 5);
  EXPECT_THROW(auto_bits(0.0), Error);
}

TEST(Kernel, ZeroOutcomeBoundAboveGap) {
  // 2^s >= 8 / Delta gives |alpha_0|^2 <= (2^s sin(phi/2))^-2 <= pi^2/64.
  for (double gap : {0.05, 0.1, 0.3, 1.0, 2.0, 3.0}) {
    int s = auto_bits(gap);
    for (int i = 0; i <= 400; ++i) {
      double phi = gap + (kPi - gap) * i / 400.0;
      EXPECT_LE(zero_outcome_probability(phi, s), 0.16) << gap << " " << phi;
    }
  }
}

TEST(Reflection, SpectralMatchesCircuit) {
  double worst = 0.0;
  for (int n = 2; n <= 4; ++n)
    for (int s = 1; s <= 4; ++s)
      for (int k = 1; k <= 2; ++k) {
        Fixture f(random_stochastic(n, 100 + n * 10 + s, false));
        PhaseEstimationSpec spec{s, k, ReflectionMode::spectral};
        Reflection rs(f.walk, spec);
        spec.mode = ReflectionMode::circuit;
        Reflection rc(f.walk, spec);
        EdgeState a = random_state(static_cast<std::size_t>(n), rs.ancilla_dim(), 7 + static_cast<std::uint64_t>(s * k));
        EdgeState b = a;
        CostMeter ma, mb;
        rs.apply(a, ma);
        rc.apply(b, mb);
        worst = std::max(worst, (a.amplitudes - b.amplitudes).norm());
        EXPECT_EQ(ma, mb);
        EXPECT_EQ(ma.cwalk_calls, 2LL * k * ((1LL << s) - 1));
        EXPECT_NEAR(a.norm(), 1.0, 1e-9);
      }
  EXPECT_LE(worst, 1e-9);
}

TEST(Reflection, FixesPiInAllModes) {
  Fixture f(random_stochastic(3, 9, false));
  for (auto mode : {ReflectionMode::exact, ReflectionMode::spectral, ReflectionMode::circuit}) {
    PhaseEstimationSpec spec = resolve_spec({0, 2, mode}, f.disc);
    Reflection r(f.walk, spec);
    EdgeState s = with_zero_ancilla(f.walk.pi_state().cast<Complex>(), 3, r.ancilla_dim());
    EdgeState before = s;
    CostMeter m;
    r.apply(s, m);
    EXPECT_LT((s.amplitudes - before.amplitudes).norm(), 1e-9) << to_string(mode);
  }
}

TEST(Reflection, GridPhaseNegatedExactly) {
  // Uniform two-state chain: the non-pi eigenvectors of W have phase pi.
  Fixture f(Matrix::Constant(2, 2, 0.5));
  Reflection r(f.walk, {1, 1, ReflectionMode::spectral});
  for (std::size_t m = 1; m < f.walk.eigenphases().size(); ++m) {
    EdgeState s = with_zero_ancilla(walk_eigenvector(f.walk, m), 2, r.ancilla_dim());
    EdgeState before = s;
    CostMeter meter;
    r.apply(s, meter);
    EXPECT_LT((s.amplitudes + before.amplitudes).norm(), 1e-12);
  }
}

TEST(Reflection, ExactModeIsReflectionOnSum) {
  Fixture f(random_stochastic(4, 2, false));
  Reflection r(f.walk, {0, 1, ReflectionMode::exact});
  auto d = f.walk.dense();
  CMatrix X = random_state(4, 1, 3).amplitudes;
  // Oracle: projector onto A+B from an SVD of [Pi_A | Pi_B].
  Matrix AB(16, 32);
  AB << d.proj_a, d.proj_b;
  Eigen::JacobiSVD<Matrix> svd(AB, Eigen::ComputeFullU);
  Matrix Q = svd.matrixU().leftCols((svd.singularValues().array() > 1e-8).count());
  Matrix proj = Q * Q.transpose();
  Vector pi = f.walk.pi_state();
  Matrix refl = 2.0 * pi * pi.transpose() - proj + (Matrix::Identity(16, 16) - proj);
  EdgeState s = EdgeState::zeros(4, 1);
  s.amplitudes = X.col(0);
  CostMeter m;
  r.apply(s, m);
  EXPECT_LT((s.amplitudes - refl.cast<Complex>() * X.col(0)).norm(), 1e-10);
  EXPECT_EQ(m.cwalk_calls, 0);
}

TEST(Reflection, AnalyticErrorMatchesSimulation) {
  Fixture f(random_stochastic(3, 21, true));
  for (int k = 1; k <= 3; ++k) {
    PhaseEstimationSpec spec = resolve_spec({0, k, ReflectionMode::spectral}, f.disc);
    Reflection r(f.walk, spec);
    for (std::size_t m = 1; m < f.walk.eigenphases().size(); ++m) {
      EdgeState s = with_zero_ancilla(walk_eigenvector(f.walk, m), 3, r.ancilla_dim());
      EdgeState before = s;
      CostMeter meter;
      r.apply(s, meter);
      double sim = (s.amplitudes + before.amplitudes).norm();
      EXPECT_NEAR(sim, r.phase_error(f.walk.eigenphases()[m]), 1e-10);
    }
  }
}

TEST(Reflection, DimensionChecks) {
  Fixture f(random_stochastic(3, 1, false));
  Reflection r(f.walk, {2, 2, ReflectionMode::spectral});
  EdgeState s = EdgeState::zeros(3, 4);
  CostMeter m;
  EXPECT_THROW(r.apply(s, m), Error);
  Fixture big(Matrix::Constant(40, 40, 1.0 / 40));
  try {
    Reflection c(big.walk, {6, 2, ReflectionMode::circuit});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_cap);
  }
}

TEST(ReflectionError, ExactModeZero) {
  Fixture f(random_stochastic(4, 5, true));
  auto rep = reflection_error(f.walk, f.disc, {0, 3, ReflectionMode::exact});
  EXPECT_DOUBLE_EQ(rep.max_error, 0.0);
  EXPECT_TRUE(std::isinf(rep.fitted_c));
}

TEST(ReflectionError, DecayAndFidelity) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Fixture f(lazify(validate_chain(random_stochastic(6, seed, true)), 0.2).transition());
    auto rep = reflection_error(f.walk, f.disc, {0, 1, ReflectionMode::spectral}, 8, seed, 6);
    EXPECT_NEAR(rep.pi_fidelity, 1.0, 1e-9);
    EXPECT_LE(rep.max_zero_probability, 0.16);
    EXPECT_LE(rep.random_max_error, rep.max_error + 1e-15);
    for (int k = 1; k <= 5; ++k) EXPECT_LE(rep.errors_by_k[k] / rep.errors_by_k[k - 1], 0.5);
    EXPECT_GT(rep.fitted_c, 1.0);
  }
}

TEST(ReflectionError, NonIncreasingInS) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Fixture f(lazify(validate_chain(random_stochastic(5, seed, true)), 0.2).transition());
    int s0 = auto_bits(f.disc.phase_gap);
    double prev = 3.0;
    for (int ds = 0; ds <= 2; ++ds) {
      auto rep = reflection_error(f.walk, f.disc, {s0 + ds, 2, ReflectionMode::spectral});
      EXPECT_LE(rep.max_error, prev + 1e-12);
      prev = rep.max_error;
    }
  }
}

TEST(ReflectionError, DegenerateSpectrum) {
  Matrix P = Matrix::Zero(3, 3);
  P(0, 1) = P(1, 2) = P(2, 0) = 1.0;
  Fixture f(P);
  try {
    reflection_error(f.walk, f.disc, {0, 1, ReflectionMode::spectral});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_spectrum);
  }
}

TEST(ReflectionError, DecayFit) {
  std::vector<int> ks{1, 2, 3};
  std::vector<double> es{0.5, 0.125, 0.03125};
  EXPECT_NEAR(fit_decay_constant(ks, es), 2.0, 1e-12);
  EXPECT_TRUE(std::isinf(fit_decay_constant(ks, {0.0, 0.0, 0.0})));
}
