#pragma once

// Quantum walk W(P) = ref(B) ref(A) on the edge space C^{X x X}.
//
// Basis ordering: edge (x, y) has index x * n + y; an EdgeState tensored with
// an ancilla of dimension d stores amplitude (x, y, a) at (x * n + y) * d + a.
//
// A = span{|x>|p_x>}, B = span{|p*_y>|y>}. Both spanning families are
// orthonormal with disjoint supports, so the reflections are applied in
// O(n^2) per edge vector without materializing any n^2 x n^2 matrix.

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "walklab/spectral.hpp"

namespace walklab {

struct EdgeState {
  std::size_t n = 0;
  std::size_t ancilla_dim = 1;
  CVector amplitudes;

  static EdgeState zeros(std::size_t n, std::size_t ancilla_dim = 1) {
    EdgeState s;
    s.n = n;
    s.ancilla_dim = ancilla_dim;
    s.amplitudes = CVector::Zero(static_cast<Eigen::Index>(n * n * ancilla_dim));
    return s;
  }

  std::size_t edge_dim() const { return n * n; }
  std::size_t size() const { return static_cast<std::size_t>(amplitudes.size()); }

  Eigen::Map<RowMajorCMatrix> as_matrix() {
    return {amplitudes.data(), static_cast<Eigen::Index>(edge_dim()), static_cast<Eigen::Index>(ancilla_dim)};
  }
  Eigen::Map<const RowMajorCMatrix> as_matrix() const {
    return {amplitudes.data(), static_cast<Eigen::Index>(edge_dim()), static_cast<Eigen::Index>(ancilla_dim)};
  }

  Complex& at(std::size_t x, std::size_t y, std::size_t a = 0) {
    return amplitudes[static_cast<Eigen::Index>((x * n + y) * ancilla_dim + a)];
  }
  Complex at(std::size_t x, std::size_t y, std::size_t a = 0) const {
    return amplitudes[static_cast<Eigen::Index>((x * n + y) * ancilla_dim + a)];
  }

  double norm() const { return amplitudes.norm(); }
};

/// Tensor an edge vector with |0> on an ancilla of dimension ancilla_dim.
inline EdgeState with_zero_ancilla(const CVector& edge, std::size_t n, std::size_t ancilla_dim) {
  EdgeState s = EdgeState::zeros(n, ancilla_dim);
  for (Eigen::Index e = 0; e < edge.size(); ++e) s.amplitudes[e * static_cast<Eigen::Index>(ancilla_dim)] = edge[e];
  return s;
}

struct EdgeVectors {
  Matrix forward;   // row x holds |p_x>
  Matrix backward;  // row y holds |p*_y>
};

inline EdgeVectors edge_vectors(const MarkovChain& chain) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  const Vector& pi = chain.stationary();
  const Matrix& P = chain.transition();
  EdgeVectors ev{P.cwiseSqrt(), Matrix(n, n)};
  for (Eigen::Index y = 0; y < n; ++y)
    for (Eigen::Index x = 0; x < n; ++x) ev.backward(y, x) = std::sqrt(pi[x] * P(x, y) / pi[y]);
  return ev;
}

struct WalkLimits {
  std::size_t dense_max_n = 64;      // dense n^2 x n^2 materialization cap
  std::size_t max_edge_dim = 65536;  // n^2 cap for quantum schemas
};

class WalkOperator {
 public:
  std::size_t n() const { return n_; }
  std::size_t edge_dim() const { return n_ * n_; }

  /// sqrt(p_xy): component of |x>|p_x> at edge (x, y).
  const Matrix& forward_amplitudes() const { return fwd_; }
  /// sqrt(p*_yx): component of |p*_y>|y> at edge (x, y).
  const Matrix& backward_amplitudes() const { return bwd_; }

  const Vector& stationary() const { return pi_; }
  const Vector& pi_state() const { return pi_state_; }

  /// Dimension of A + B and of A intersect B.
  std::size_t dim_sum() const { return static_cast<std::size_t>(basis_coeffs_.cols()); }
  std::size_t dim_intersection() const { return 2 * n_ - dim_sum(); }

  /// Eigenphases in (-pi, pi] of W restricted to A + B; index 0 is |pi>.
  const std::vector<double>& eigenphases() const { return phases_; }
  /// Column m holds the spanning-set coordinates of eigenvector m:
  /// |e_m> = sum_x c_x |x>|p_x> + sum_y c_{n+y} |p*_y>|y>.
  const CMatrix& eigen_coords() const { return eigen_coords_; }
  /// Coordinates of an orthonormal basis of A + B in the spanning set.
  const Matrix& basis_coeffs() const { return basis_coeffs_; }
  /// Gram matrix of the 2n spanning vectors.
  const Matrix& gram() const { return gram_; }

  // S: spanning coordinates (2n x k) -> edge vectors (n^2 x k), column-major.
  template <typename Derived>
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> span_apply(
      const Eigen::MatrixBase<Derived>& coords) const {
    using Scalar = typename Derived::Scalar;
    const auto n = static_cast<Eigen::Index>(n_);
    const auto k = coords.cols();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(n * n, k);
    for (Eigen::Index x = 0; x < n; ++x)
      out.block(x * n, 0, n, k) = fwd_.row(x).transpose().template cast<Scalar>() * coords.row(x) +
                                  bwd_.row(x).transpose().template cast<Scalar>().asDiagonal() * coords.bottomRows(n);
    return out;
  }

  // S^T: edge vectors (n^2 x k) -> spanning inner products (2n x k).
  template <typename Derived>
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> span_adjoint(
      const Eigen::MatrixBase<Derived>& edge) const {
    using Scalar = typename Derived::Scalar;
    const auto n = static_cast<Eigen::Index>(n_);
    const auto k = edge.cols();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(2 * n, k);
    for (Eigen::Index x = 0; x < n; ++x) {
      auto blk = edge.block(x * n, 0, n, k);
      out.row(x) = fwd_.row(x).template cast<Scalar>() * blk;
      out.bottomRows(n) += bwd_.row(x).transpose().template cast<Scalar>().asDiagonal() * blk;
    }
    return out;
  }

  /// In-place W (or W^dagger) on every column of an n^2 x k column-major block.
  template <typename Scalar>
  void walk_columns(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& X, bool inverse = false) const {
    if (inverse) {
      reflect_b(X);
      reflect_a(X);
    } else {
      reflect_a(X);
      reflect_b(X);
    }
  }

  template <typename Scalar>
  void reflect_a(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& X) const {
    const auto n = static_cast<Eigen::Index>(n_);
    const auto k = X.cols();
    for (Eigen::Index x = 0; x < n; ++x) {
      auto blk = X.block(x * n, 0, n, k);
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> c = fwd_.row(x).template cast<Scalar>() * blk;
      blk = Scalar(2) * (fwd_.row(x).transpose().template cast<Scalar>() * c) - blk;
    }
  }

  template <typename Scalar>
  void reflect_b(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& X) const {
    const auto n = static_cast<Eigen::Index>(n_);
    const auto k = X.cols();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> c = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, k);
    for (Eigen::Index x = 0; x < n; ++x)
      c += bwd_.row(x).transpose().template cast<Scalar>().asDiagonal() * X.block(x * n, 0, n, k);
    for (Eigen::Index x = 0; x < n; ++x) {
      auto blk = X.block(x * n, 0, n, k);
      blk = Scalar(2) * (bwd_.row(x).transpose().template cast<Scalar>().asDiagonal() * c) - blk;
    }
  }

  /// Projector onto A + B applied to columns of an n^2 x k block.
  CMatrix project_sum(const CMatrix& X) const {
    CMatrix coeffs = basis_coeffs_.transpose().cast<Complex>() * span_adjoint(X);
    return span_apply(basis_coeffs_.cast<Complex>() * coeffs);
  }

  /// Explicit n^2 x n^2 matrices; only for n <= dense_max_n.
  struct Dense {
    Matrix ref_a, ref_b, walk, proj_a, proj_b;
  };
  Dense dense(const WalkLimits& limits = {}) const {
    if (n_ > limits.dense_max_n)
      throw Error(ErrorKind::dimension_cap, "dense walk limited to n <= " + std::to_string(limits.dense_max_n));
    const auto n = static_cast<Eigen::Index>(n_);
    Matrix A = Matrix::Zero(n * n, n), B = Matrix::Zero(n * n, n);
    for (Eigen::Index x = 0; x < n; ++x)
      for (Eigen::Index y = 0; y < n; ++y) {
        A(x * n + y, x) = fwd_(x, y);
        B(x * n + y, y) = bwd_(x, y);
      }
    Dense d;
    d.proj_a = A * A.transpose();
    d.proj_b = B * B.transpose();
    const Matrix id = Matrix::Identity(n * n, n * n);
    d.ref_a = 2.0 * d.proj_a - id;
    d.ref_b = 2.0 * d.proj_b - id;
    d.walk = d.ref_b * d.ref_a;
    return d;
  }

 private:
  std::size_t n_ = 0;
  Matrix fwd_, bwd_;
  Vector pi_;
  Vector pi_state_;
  Matrix gram_;
  Matrix basis_coeffs_;
  std::vector<double> phases_;
  CMatrix eigen_coords_;

  friend WalkOperator build_walk(const MarkovChain&, const Tolerances&, const WalkLimits&);
};

/// |pi> = sum_x sqrt(pi_x)|x>|p_x>.
inline Vector pi_state(const MarkovChain& chain) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  const Vector& pi = chain.stationary();
  Vector v(n * n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) v[x * n + y] = std::sqrt(pi[x]) * std::sqrt(chain.transition()(x, y));
  return v;
}

/// The dual form sum_y sqrt(pi_y)|p*_y>|y>.
inline Vector pi_state_dual(const MarkovChain& chain) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  const Vector& pi = chain.stationary();
  EdgeVectors ev = edge_vectors(chain);
  Vector v(n * n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) v[x * n + y] = std::sqrt(pi[y]) * ev.backward(y, x);
  return v;
}

inline WalkOperator build_walk(const MarkovChain& chain, const Tolerances& tol = default_tolerances(),
                               const WalkLimits& limits = {}) {
  WalkOperator w;
  w.n_ = chain.size();
  if (w.n_ * w.n_ > limits.max_edge_dim)
    throw Error(ErrorKind::dimension_cap, "edge dimension " + std::to_string(w.n_ * w.n_) + " exceeds " +
                                              std::to_string(limits.max_edge_dim));
  const auto n = static_cast<Eigen::Index>(w.n_);
  EdgeVectors ev = edge_vectors(chain);
  w.fwd_ = ev.forward;
  w.bwd_ = ev.backward.transpose();  // bwd_(x, y) = sqrt(p*_yx)
  w.pi_ = chain.stationary();
  w.pi_state_ = pi_state(chain);

  // Gram matrix of [A | B] from the edge-space inner products.
  w.gram_ = Matrix::Zero(2 * n, 2 * n);
  for (Eigen::Index x = 0; x < n; ++x) {
    w.gram_(x, x) = w.fwd_.row(x).squaredNorm();
    w.gram_(n + x, n + x) = w.bwd_.col(x).squaredNorm();
  }
  Matrix cross = w.fwd_.cwiseProduct(w.bwd_);
  w.gram_.topRightCorner(n, n) = cross;
  w.gram_.bottomLeftCorner(n, n) = cross.transpose();

  Eigen::SelfAdjointEigenSolver<Matrix> gram_es(w.gram_);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < 2 * n; ++i)
    if (gram_es.eigenvalues()[i] > tol.rank) keep.push_back(i);
  const auto r = static_cast<Eigen::Index>(keep.size());
  w.basis_coeffs_.resize(2 * n, r);
  for (Eigen::Index j = 0; j < r; ++j)
    w.basis_coeffs_.col(j) = gram_es.eigenvectors().col(keep[j]) / std::sqrt(gram_es.eigenvalues()[keep[j]]);

  // H = S^T W S, by applying the walk to every spanning vector.
  Matrix H(2 * n, 2 * n);
  const Eigen::Index batch = 64;
  for (Eigen::Index c0 = 0; c0 < 2 * n; c0 += batch) {
    Eigen::Index cols = std::min(batch, 2 * n - c0);
    Matrix unit = Matrix::Zero(2 * n, cols);
    for (Eigen::Index j = 0; j < cols; ++j) unit(c0 + j, j) = 1.0;
    Matrix X = w.span_apply(unit);
    w.walk_columns(X);
    H.middleCols(c0, cols) = w.span_adjoint(X);
  }
  Matrix T = w.basis_coeffs_.transpose() * H * w.basis_coeffs_;

  // Deflate |pi> exactly; its complement in A + B is W-invariant.
  Vector pi_coords = Vector::Zero(2 * n);
  pi_coords.head(n) = w.pi_.cwiseSqrt();
  Vector q_pi = w.basis_coeffs_.transpose() * w.gram_ * pi_coords;
  q_pi.normalize();
  Eigen::HouseholderQR<Matrix> qr(q_pi);
  Matrix full_q = qr.householderQ() * Matrix::Identity(r, r);
  Matrix Z = full_q.rightCols(r - 1);
  Matrix Tz = Z.transpose() * T * Z;

  w.phases_.assign(1, 0.0);
  w.eigen_coords_.resize(2 * n, r);
  w.eigen_coords_.col(0) = pi_coords.cast<Complex>();
  if (r > 1) {
    Eigen::RealSchur<Matrix> schur(Tz);
    const Matrix& U = schur.matrixU();
    const Matrix& Tq = schur.matrixT();
    CMatrix local(r - 1, r - 1);
    std::vector<double> ph;
    Eigen::Index i = 0;
    while (i < r - 1) {
      if (i + 1 < r - 1 && Tq(i + 1, i) != 0.0) {
        Eigen::Matrix2cd blk = Tq.block(i, i, 2, 2).cast<Complex>();
        Eigen::ComplexEigenSolver<Eigen::Matrix2cd> ces(blk);
        Eigen::Vector2cd v1 = ces.eigenvectors().col(0).normalized();
        Eigen::Vector2cd v2 = ces.eigenvectors().col(1);
        v2 -= v1.dot(v2) * v1;
        v2.normalize();
        local.col(i) = U.middleCols(i, 2).cast<Complex>() * v1;
        local.col(i + 1) = U.middleCols(i, 2).cast<Complex>() * v2;
        ph.push_back(std::arg(ces.eigenvalues()[0]));
        ph.push_back(std::arg(ces.eigenvalues()[1]));
        i += 2;
      } else {
        local.col(i) = U.col(i).cast<Complex>();
        ph.push_back(Tq(i, i) >= 0.0 ? 0.0 : kPi);
        i += 1;
      }
    }
    w.eigen_coords_.rightCols(r - 1) = (w.basis_coeffs_ * Z).cast<Complex>() * local;
    w.phases_.insert(w.phases_.end(), ph.begin(), ph.end());
  }
  return w;
}

/// Materialize eigenvector m of W on A + B as an edge vector.
inline CVector walk_eigenvector(const WalkOperator& walk, std::size_t m) {
  return walk.span_apply(walk.eigen_coords().col(static_cast<Eigen::Index>(m)));
}

// --- Applying W to joint (edge x ancilla) states ----------------------------

namespace detail {

inline CMatrix gather_columns(const EdgeState& s, const std::vector<std::size_t>& cols) {
  auto M = s.as_matrix();
  CMatrix X(M.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) X.col(static_cast<Eigen::Index>(j)) = M.col(static_cast<Eigen::Index>(cols[j]));
  return X;
}

inline void scatter_columns(EdgeState& s, const std::vector<std::size_t>& cols, const CMatrix& X) {
  auto M = s.as_matrix();
  for (std::size_t j = 0; j < cols.size(); ++j) M.col(static_cast<Eigen::Index>(cols[j])) = X.col(static_cast<Eigen::Index>(j));
}

inline void check_dims(const WalkOperator& walk, const EdgeState& state) {
  if (state.n != walk.n() || state.size() != walk.edge_dim() * state.ancilla_dim)
    throw Error(ErrorKind::dimension_mismatch, "state does not live on this walk's edge space");
}

}  // namespace detail

/// W (or W^dagger) on the edge factor. Charges one walk call.
inline void apply_walk(const WalkOperator& walk, EdgeState& state, CostMeter& meter, bool inverse = false) {
  detail::check_dims(walk, state);
  std::vector<std::size_t> cols(state.ancilla_dim);
  for (std::size_t a = 0; a < cols.size(); ++a) cols[a] = a;
  CMatrix X = detail::gather_columns(state, cols);
  walk.walk_columns(X, inverse);
  detail::scatter_columns(state, cols, X);
  meter.charge_walk();
}

/// W (or W^dagger) on the ancilla sector where bit `control_bit` of the
/// ancilla index is 1; identity elsewhere. Charges one walk call.
inline void apply_controlled_walk(const WalkOperator& walk, EdgeState& state, std::size_t control_bit, CostMeter& meter,
                                  bool inverse = false) {
  detail::check_dims(walk, state);
  if (control_bit >= 63 || (std::size_t{1} << control_bit) >= state.ancilla_dim)
    throw Error(ErrorKind::dimension_mismatch, "control bit outside the ancilla register");
  std::vector<std::size_t> cols;
  for (std::size_t a = 0; a < state.ancilla_dim; ++a)
    if ((a >> control_bit) & 1u) cols.push_back(a);
  CMatrix X = detail::gather_columns(state, cols);
  walk.walk_columns(X, inverse);
  detail::scatter_columns(state, cols, X);
  meter.charge_walk();
}

// --- Spectral correspondence --------------------------------------------------

struct SpectralReport {
  std::size_t dim_sum = 0;           // dim(A + B)
  std::size_t dim_intersection = 0;  // dim(A cap B)
  int unit_multiplicity = 0;         // from the SVD of D(P)
  int zero_multiplicity = 0;
  std::size_t complex_pairs = 0;     // l
  double max_phase_deviation = 0.0;
  double minus_sector_residual = 0.0;  // max ||W v + v|| on A cap B^perp and A^perp cap B
  std::size_t minus_sector_dim = 0;
  double complement_residual = 0.0;    // max ||W v - v|| on (A + B)^perp samples
  std::vector<double> expected_phases;
  std::vector<double> measured_phases;
};

namespace detail {

inline double canonical_phase(double phi, double tol) {
  if (std::abs(phi + kPi) <= tol) return kPi;
  return phi;
}

inline Matrix null_space(const Matrix& M, double tol) {
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < M.cols(); ++i)
    if (i >= sv.size() || sv[i] <= tol) idx.push_back(i);
  Matrix N(M.cols(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) N.col(static_cast<Eigen::Index>(j)) = svd.matrixV().col(idx[j]);
  return N;
}

}  // namespace detail

/// Checks Szegedy's correspondence between the SVD of D(P) and the spectrum of
/// W(P) on A + B, plus the -Id and Id sectors. Throws CorrespondenceViolation.
inline SpectralReport verify_spectral_theorem(const WalkOperator& walk, const Discriminant& disc, double phase_tol = 1e-8,
                                              const Tolerances& tol = default_tolerances(), std::uint64_t seed = 7) {
  SpectralReport rep;
  const auto n = static_cast<Eigen::Index>(walk.n());
  rep.dim_sum = walk.dim_sum();
  rep.dim_intersection = walk.dim_intersection();
  rep.unit_multiplicity = disc.unit_sv_multiplicity;
  rep.zero_multiplicity = disc.zero_sv_multiplicity;

  for (Eigen::Index i = 0; i < disc.singular_values.size(); ++i) {
    double s = disc.singular_values[i];
    if (s >= 1.0 - tol.unit_singular) {
      rep.expected_phases.push_back(0.0);
    } else if (s <= tol.zero_singular) {
      rep.expected_phases.push_back(kPi);
      rep.expected_phases.push_back(kPi);
    } else {
      double th = std::acos(s);
      rep.expected_phases.push_back(2.0 * th);
      rep.expected_phases.push_back(-2.0 * th);
      ++rep.complex_pairs;
    }
  }
  for (double p : walk.eigenphases()) rep.measured_phases.push_back(detail::canonical_phase(p, 1e-6));
  std::sort(rep.expected_phases.begin(), rep.expected_phases.end());
  std::sort(rep.measured_phases.begin(), rep.measured_phases.end());

  if (rep.dim_intersection != static_cast<std::size_t>(rep.unit_multiplicity)) {
    std::ostringstream os;
    os << "dim(A cap B) = " << rep.dim_intersection << " but D(P) has " << rep.unit_multiplicity
       << " unit singular values";
    throw Error(ErrorKind::correspondence_violation, os.str());
  }
  if (rep.expected_phases.size() != rep.measured_phases.size()) {
    std::ostringstream os;
    os << "W has " << rep.measured_phases.size() << " eigenphases on A+B, expected " << rep.expected_phases.size();
    throw Error(ErrorKind::correspondence_violation, os.str());
  }
  for (std::size_t i = 0; i < rep.expected_phases.size(); ++i) {
    double d = std::abs(rep.expected_phases[i] - rep.measured_phases[i]);
    rep.max_phase_deviation = std::max(rep.max_phase_deviation, d);
    if (d > phase_tol) {
      std::ostringstream os;
      os.precision(17);
      os << "eigenphase " << rep.measured_phases[i] << " does not match " << rep.expected_phases[i];
      throw Error(ErrorKind::correspondence_violation, os.str());
    }
  }

  // -Id sectors: A c with (B^T A) c = 0, and B c with (A^T B) c = 0.
  const Matrix cross = walk.gram().topRightCorner(n, n);  // A^T B
  auto check_minus = [&](const Matrix& null, bool from_a) {
    for (Eigen::Index j = 0; j < null.cols(); ++j) {
      Matrix coords = Matrix::Zero(2 * n, 1);
      if (from_a)
        coords.block(0, 0, n, 1) = null.col(j);
      else
        coords.block(n, 0, n, 1) = null.col(j);
      Matrix v = walk.span_apply(coords);
      Matrix wv = v;
      walk.walk_columns(wv);
      rep.minus_sector_residual = std::max(rep.minus_sector_residual, (wv + v).norm() / v.norm());
    }
    rep.minus_sector_dim += static_cast<std::size_t>(null.cols());
  };
  check_minus(detail::null_space(cross.transpose(), tol.zero_singular), true);
  check_minus(detail::null_space(cross, tol.zero_singular), false);
  if (rep.minus_sector_dim != 2 * static_cast<std::size_t>(rep.zero_multiplicity) || rep.minus_sector_residual > phase_tol) {
    std::ostringstream os;
    os << "-Id sector: dimension " << rep.minus_sector_dim << " (expected " << 2 * rep.zero_multiplicity
       << "), residual " << rep.minus_sector_residual;
    throw Error(ErrorKind::correspondence_violation, os.str());
  }

  // Identity on (A + B)^perp.
  if (walk.edge_dim() > walk.dim_sum()) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 3; ++trial) {
      CMatrix v(static_cast<Eigen::Index>(walk.edge_dim()), 1);
      for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, 0) = Complex(gauss(rng), gauss(rng));
      v -= walk.project_sum(v);
      double nv = v.norm();
      if (nv < 1e-8) continue;
      v /= nv;
      CMatrix wv = v;
      walk.walk_columns(wv);
      rep.complement_residual = std::max(rep.complement_residual, (wv - v).norm());
    }
    if (rep.complement_residual > phase_tol) {
      std::ostringstream os;
      os << "W deviates from Id on (A+B)^perp by " << rep.complement_residual;
      throw Error(ErrorKind::correspondence_violation, os.str());
    }
  }
  return rep;
}

}  // namespace walklab
