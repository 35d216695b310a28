#pragma once

// Discriminant matrix D(P) = diag(pi)^{1/2} P diag(pi)^{-1/2} and the
// quantities read off its singular value decomposition.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/SVD>

#include "walklab/chain.hpp"

namespace walklab {

struct Discriminant {
  Matrix D;
  Vector singular_values;  // descending
  Matrix left;             // columns are left singular vectors
  Matrix right;
  double sv_gap = 0.0;
  double phase_gap = 0.0;  // 0 when undefined (all singular values are 1)
  bool phase_gap_defined = false;
  int unit_sv_multiplicity = 0;
  int zero_sv_multiplicity = 0;
};

/// Entry-wise sqrt(p_xy p*_yx); the second construction of D(P).
inline Matrix discriminant_from_reversal(const MarkovChain& chain) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  const Vector& pi = chain.stationary();
  const Matrix& P = chain.transition();
  Matrix D(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) {
      double reversed = pi[x] * P(x, y) / pi[y];  // p*_yx
      D(x, y) = std::sqrt(P(x, y) * reversed);
    }
  return D;
}

inline int count_unit_singular_values(const Vector& sv, const Tolerances& tol = default_tolerances()) {
  return static_cast<int>((sv.array() >= 1.0 - tol.unit_singular).count());
}

/// Phase gap 2*theta, theta the smallest angle with cos(theta) a singular
/// value strictly below 1. Throws DegenerateSpectrum when every singular
/// value is 1.
inline double phase_gap_of(const Vector& sv, const Tolerances& tol = default_tolerances()) {
  double best = -1.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    double s = sv[i];
    if (s >= 1.0 - tol.unit_singular) continue;
    best = std::max(best, s);
  }
  if (best < 0.0) throw Error(ErrorKind::degenerate_spectrum, "all singular values of D(P) equal 1; phase gap undefined");
  double theta = best <= tol.zero_singular ? kPi / 2.0 : std::acos(std::clamp(best, 0.0, 1.0));
  return 2.0 * theta;
}

inline Discriminant build_discriminant(const MarkovChain& chain, const Tolerances& tol = default_tolerances()) {
  Discriminant disc;
  const Vector root = chain.stationary().cwiseSqrt();
  disc.D = root.asDiagonal() * chain.transition() * root.cwiseInverse().asDiagonal();

  Matrix alt = discriminant_from_reversal(chain);
  double mismatch = (disc.D - alt).cwiseAbs().maxCoeff();
  if (mismatch > tol.structural * std::max(1.0, disc.D.cwiseAbs().maxCoeff()) * 10.0) {
    std::ostringstream os;
    os << "the two discriminant constructions differ by " << mismatch;
    throw Error(ErrorKind::proposition_violation, os.str());
  }

  Eigen::JacobiSVD<Matrix> svd(disc.D, Eigen::ComputeFullU | Eigen::ComputeFullV);
  disc.singular_values = svd.singularValues();
  disc.left = svd.matrixU();
  disc.right = svd.matrixV();
  disc.unit_sv_multiplicity = count_unit_singular_values(disc.singular_values, tol);
  disc.zero_sv_multiplicity = static_cast<int>((disc.singular_values.array() <= tol.zero_singular).count());

  const auto& sv = disc.singular_values;
  if (sv.size() < 2)
    disc.sv_gap = 1.0;
  else
    disc.sv_gap = sv[1] >= 1.0 - tol.unit_singular ? 0.0 : 1.0 - sv[1];

  try {
    disc.phase_gap = phase_gap_of(sv, tol);
    disc.phase_gap_defined = true;
  } catch (const Error&) {
    disc.phase_gap = 0.0;
    disc.phase_gap_defined = false;
  }
  return disc;
}

inline double singular_value_gap(const Discriminant& disc) { return disc.sv_gap; }

inline double phase_gap(const Discriminant& disc, const Tolerances& tol = default_tolerances()) {
  return phase_gap_of(disc.singular_values, tol);
}

/// Number of singular values equal to 1. Throws PropositionViolation if a
/// singular value exceeds 1, or if a chain with all p_xx > 0 has more than
/// one unit singular value.
inline int check_unit_multiplicity(const Discriminant& disc, const MarkovChain& chain,
                                   const Tolerances& tol = default_tolerances()) {
  const auto& sv = disc.singular_values;
  if (sv.size() > 0 && sv.maxCoeff() > 1.0 + tol.spectral_residual) {
    std::ostringstream os;
    os << "singular value " << sv.maxCoeff() << " exceeds 1";
    throw Error(ErrorKind::proposition_violation, os.str());
  }
  int count = count_unit_singular_values(sv, tol);
  if (chain.flags().has_self_loops && chain.flags().irreducible && count != 1) {
    throw Error(ErrorKind::proposition_violation,
                "chain with self-loops has " + std::to_string(count) + " unit singular values");
  }
  return count;
}

}  // namespace walklab
