#pragma once

// Phase estimation on W(P) and the approximate reflection R(P) about |pi>.
//
// Ancilla layout: k registers of s bits; register r occupies ancilla bits
// [r*s, (r+1)*s) and bit b of a register has weight 2^b.

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "walklab/walk.hpp"

namespace walklab {

enum class ReflectionMode { exact, spectral, circuit };
enum class VoteRule { any_nonzero, majority };

inline const char* to_string(ReflectionMode m) {
  switch (m) {
    case ReflectionMode::exact: return "exact";
    case ReflectionMode::spectral: return "spectral";
    case ReflectionMode::circuit: return "circuit";
  }
  return "unknown";
}

inline ReflectionMode parse_mode(const std::string& name) {
  if (name == "exact") return ReflectionMode::exact;
  if (name == "spectral") return ReflectionMode::spectral;
  if (name == "circuit") return ReflectionMode::circuit;
  throw Error(ErrorKind::param_error, "unknown reflection mode '" + name + "'");
}

inline const char* to_string(VoteRule v) { return v == VoteRule::any_nonzero ? "any_nonzero" : "majority"; }

inline VoteRule parse_vote(const std::string& name) {
  if (name == "any_nonzero") return VoteRule::any_nonzero;
  if (name == "majority") return VoteRule::majority;
  throw Error(ErrorKind::param_error, "unknown vote rule '" + name + "'");
}

struct PhaseEstimationSpec {
  int s = 0;  // bits per register; 0 = auto from the phase gap
  int k = 1;  // rounds
  ReflectionMode mode = ReflectionMode::spectral;
  VoteRule vote = VoteRule::any_nonzero;
};

/// ceil(log2(1/Delta)) + 3, at least 1.
inline int auto_bits(double phase_gap) {
  if (!(phase_gap > 0.0)) throw Error(ErrorKind::degenerate_spectrum, "phase gap undefined; cannot size ancillas");
  return std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / phase_gap))) + 3);
}

/// Minimum number of nonzero registers that triggers the flip.
inline int vote_threshold(VoteRule rule, int k) { return rule == VoteRule::any_nonzero ? 1 : (k + 1) / 2; }

inline PhaseEstimationSpec resolve_spec(PhaseEstimationSpec spec, const Discriminant& disc) {
  if (spec.mode == ReflectionMode::exact) return spec;
  if (spec.k < 1) throw Error(ErrorKind::param_error, "k must be >= 1");
  if (spec.s == 0) {
    if (!disc.phase_gap_defined)
      throw Error(ErrorKind::degenerate_spectrum, "all singular values of D(P) equal 1; phase gap undefined");
    spec.s = auto_bits(disc.phase_gap);
  }
  if (spec.s < 1) throw Error(ErrorKind::param_error, "s must be >= 1");
  return spec;
}

/// alpha_j(phi) = 2^{-s} sum_t e^{i t (phi - 2 pi j / 2^s)}, j = 0..2^s-1.
inline CVector pe_kernel(double phase, int s) {
  if (s < 0) throw Error(ErrorKind::param_error, "s must be >= 0");
  if (s > 24) throw Error(ErrorKind::dimension_cap, "pe_kernel table limited to s <= 24");
  const std::size_t N = std::size_t{1} << s;
  const double Nd = static_cast<double>(N);
  CVector alpha(static_cast<Eigen::Index>(N));
  for (std::size_t j = 0; j < N; ++j) {
    double x = std::remainder(phase - 2.0 * kPi * static_cast<double>(j) / Nd, 2.0 * kPi);
    if (x <= -kPi) x += 2.0 * kPi;
    double den = std::sin(x / 2.0);
    if (x == 0.0 || std::abs(den) < 1e-300) {
      alpha[static_cast<Eigen::Index>(j)] = 1.0;
      continue;
    }
    double mag = std::sin(Nd * x / 2.0) / (Nd * den);
    alpha[static_cast<Eigen::Index>(j)] = std::polar(mag, (Nd - 1.0) * x / 2.0);
  }
  return alpha;
}

/// Probability that one s-bit estimate of phase returns 0.
inline double zero_outcome_probability(double phase, int s) { return std::norm(pe_kernel(phase, s)[0]); }

/// Inverse QFT on s bits: (j, t) -> 2^{-s/2} e^{-2 pi i j t / 2^s}.
inline CMatrix inverse_qft(int s) {
  const auto N = static_cast<Eigen::Index>(std::size_t{1} << s);
  CMatrix F(N, N);
  const double scale = 1.0 / std::sqrt(static_cast<double>(N));
  for (Eigen::Index j = 0; j < N; ++j)
    for (Eigen::Index t = 0; t < N; ++t)
      F(j, t) = std::polar(scale, -2.0 * kPi * static_cast<double>((j * t) % N) / static_cast<double>(N));
  return F;
}

inline CMatrix hadamard_transform(int s) {
  const auto N = static_cast<Eigen::Index>(std::size_t{1} << s);
  CMatrix H(N, N);
  const double scale = 1.0 / std::sqrt(static_cast<double>(N));
  for (Eigen::Index t = 0; t < N; ++t)
    for (Eigen::Index u = 0; u < N; ++u) H(t, u) = (__builtin_popcountll(static_cast<unsigned long long>(t & u)) & 1) ? -scale : scale;
  return H;
}

/// C(phi) = QFT^dagger diag(e^{i t phi}) H^{(x)s}: one register of phase
/// estimation on an eigenvector with eigenphase phi. Column 0 is pe_kernel.
inline CMatrix register_unitary(double phase, int s) {
  const auto N = static_cast<Eigen::Index>(std::size_t{1} << s);
  CVector d(N);
  for (Eigen::Index t = 0; t < N; ++t) d[t] = std::polar(1.0, static_cast<double>(t) * phase);
  return inverse_qft(s) * d.asDiagonal() * hadamard_transform(s);
}

/// P(no flip) on |e_phi>|0^{ks}>: fewer than tau of k independent rounds
/// return a nonzero estimate.
inline double no_flip_probability(double phase, int s, int k, VoteRule vote) {
  const double p0 = zero_outcome_probability(phase, s);
  const int tau = vote_threshold(vote, k);
  double total = 0.0;
  for (int m = 0; m < tau; ++m)
    total += std::exp(std::lgamma(k + 1.0) - std::lgamma(m + 1.0) - std::lgamma(k - m + 1.0)) * std::pow(1.0 - p0, m) *
             std::pow(p0, k - m);
  return std::clamp(total, 0.0, 1.0);
}

/// ||(R + Id)|e_phi>|0>|| = 2 sqrt(P(no flip)).
inline double analytic_phase_error(double phase, int s, int k, VoteRule vote) {
  return 2.0 * std::sqrt(no_flip_probability(phase, s, k, vote));
}

/// Applies U to register `reg` of every row of Y (rows x 2^{k s}).
template <typename Rows>
void apply_register(Rows& Y, const CMatrix& U, std::size_t reg, int s) {
  const std::size_t N = std::size_t{1} << s;
  const std::size_t stride = std::size_t{1} << (reg * static_cast<std::size_t>(s));
  const auto D = static_cast<std::size_t>(Y.cols());
  CVector buf(static_cast<Eigen::Index>(N)), out(static_cast<Eigen::Index>(N));
  for (Eigen::Index row = 0; row < Y.rows(); ++row)
    for (std::size_t hi = 0; hi < D / (N * stride); ++hi)
      for (std::size_t lo = 0; lo < stride; ++lo) {
        const std::size_t base = hi * N * stride + lo;
        for (std::size_t j = 0; j < N; ++j) buf[static_cast<Eigen::Index>(j)] = Y(row, static_cast<Eigen::Index>(base + j * stride));
        out.noalias() = U * buf;
        for (std::size_t j = 0; j < N; ++j) Y(row, static_cast<Eigen::Index>(base + j * stride)) = out[static_cast<Eigen::Index>(j)];
      }
}

/// R(P) in one of three modes. Holds a reference to the walk, which must
/// outlive it.
class Reflection {
 public:
  static constexpr std::size_t kCircuitCap = std::size_t{1} << 22;
  static constexpr std::size_t kSpectralCap = std::size_t{1} << 26;

  Reflection(const WalkOperator& walk, PhaseEstimationSpec spec) : walk_(&walk), spec_(spec) {
    if (spec_.mode == ReflectionMode::exact) return;
    if (spec_.s < 1 || spec_.k < 1) throw Error(ErrorKind::param_error, "phase estimation needs s >= 1 and k >= 1");
    if (static_cast<std::size_t>(spec_.s) * static_cast<std::size_t>(spec_.k) > 40)
      throw Error(ErrorKind::dimension_cap, "ancilla register too large");
    const std::size_t cap = spec_.mode == ReflectionMode::circuit ? kCircuitCap : kSpectralCap;
    if (walk.edge_dim() * ancilla_dim() > cap)
      throw Error(ErrorKind::dimension_cap, std::string(to_string(spec_.mode)) + " reflection needs " +
                                                std::to_string(walk.edge_dim() * ancilla_dim()) + " amplitudes");
    const int tau = vote_threshold(spec_.vote, spec_.k);
    const std::size_t N = std::size_t{1} << spec_.s;
    flip_.resize(ancilla_dim());
    for (std::size_t a = 0; a < flip_.size(); ++a) {
      int nonzero = 0;
      for (int r = 0; r < spec_.k; ++r)
        if ((a >> (static_cast<std::size_t>(r * spec_.s))) & (N - 1)) ++nonzero;
      flip_[a] = nonzero >= tau ? -1.0 : 1.0;
    }
    registers_.reserve(walk.eigenphases().size());
    for (double phi : walk.eigenphases()) registers_.push_back(register_unitary(phi, spec_.s));
    zero_register_ = register_unitary(0.0, spec_.s);
  }

  const PhaseEstimationSpec& spec() const { return spec_; }
  const WalkOperator& walk() const { return *walk_; }

  std::size_t ancilla_bits() const {
    return spec_.mode == ReflectionMode::exact ? 0 : static_cast<std::size_t>(spec_.s) * static_cast<std::size_t>(spec_.k);
  }
  std::size_t ancilla_dim() const { return std::size_t{1} << ancilla_bits(); }

  /// Controlled-W calls per application: 2k(2^s - 1).
  std::int64_t walk_calls() const {
    if (spec_.mode == ReflectionMode::exact) return 0;
    return 2LL * spec_.k * ((1LL << spec_.s) - 1);
  }

  void apply(EdgeState& state, CostMeter& meter) const {
    detail::check_dims(*walk_, state);
    switch (spec_.mode) {
      case ReflectionMode::exact: apply_exact(state); break;
      case ReflectionMode::spectral: apply_spectral(state); meter.charge_walk(walk_calls()); break;
      case ReflectionMode::circuit: apply_circuit(state, meter); break;
    }
  }

  /// M_phi = C^dagger^{(x)k} F C^{(x)k} on every row of Y (rows x ancilla_dim).
  template <typename Rows>
  void apply_ancilla(Rows& Y, const CMatrix& C) const {
    for (int r = 0; r < spec_.k; ++r) apply_register(Y, C, static_cast<std::size_t>(r), spec_.s);
    apply_flip(Y);
    const CMatrix Cd = C.adjoint();
    for (int r = 0; r < spec_.k; ++r) apply_register(Y, Cd, static_cast<std::size_t>(r), spec_.s);
  }

  /// ||(R + Id)|e_phi>|0>|| for an eigenvector with eigenphase phi.
  double phase_error(double phase) const { return phase_error(phase, spec_.k); }
  double phase_error(double phase, int k) const {
    if (spec_.mode == ReflectionMode::exact) return std::abs(phase) < 1e-12 ? 2.0 : 0.0;
    return analytic_phase_error(phase, spec_.s, k, spec_.vote);
  }

 private:
  const WalkOperator* walk_;
  PhaseEstimationSpec spec_;
  std::vector<double> flip_;
  std::vector<CMatrix> registers_;
  CMatrix zero_register_;

  template <typename Rows>
  void apply_flip(Rows& Y) const {
    for (Eigen::Index a = 0; a < Y.cols(); ++a)
      if (flip_[static_cast<std::size_t>(a)] < 0.0) Y.col(a) *= -1.0;
  }

  void check_ancilla(const EdgeState& state) const {
    if (state.ancilla_dim != ancilla_dim())
      throw Error(ErrorKind::dimension_mismatch, "state ancilla dimension " + std::to_string(state.ancilla_dim) +
                                                     " does not match 2^(k s) = " + std::to_string(ancilla_dim()));
  }

  // 2|pi><pi| - Pi_{A+B} + Pi_{(A+B)^perp}, identity on the ancilla.
  void apply_exact(EdgeState& state) const {
    auto M = state.as_matrix();
    CMatrix X = M;
    const CVector pi = walk_->pi_state().cast<Complex>();
    CMatrix out = X - 2.0 * walk_->project_sum(X);
    out += 2.0 * pi * (pi.adjoint() * X);
    M = out;
  }

  void apply_spectral(EdgeState& state) const {
    check_ancilla(state);
    auto M = state.as_matrix();
    const CMatrix& E = walk_->eigen_coords();
    CMatrix X = M;
    RowMajorCMatrix coeffs = E.adjoint() * walk_->span_adjoint(X);
    RowMajorCMatrix perp = X - walk_->span_apply(E * CMatrix(coeffs));
    for (Eigen::Index m = 0; m < coeffs.rows(); ++m) {
      RowMajorCMatrix row = coeffs.row(m);
      apply_ancilla(row, registers_[static_cast<std::size_t>(m)]);
      coeffs.row(m) = row;
    }
    apply_ancilla(perp, zero_register_);
    M = perp + walk_->span_apply(E * CMatrix(coeffs));
  }

  void apply_circuit(EdgeState& state, CostMeter& meter) const {
    check_ancilla(state);
    auto M = state.as_matrix();
    const CMatrix H = hadamard_transform(spec_.s);
    const CMatrix Finv = inverse_qft(spec_.s);
    const CMatrix F = Finv.adjoint();
    auto each_register = [&](const CMatrix& U) {
      for (int r = 0; r < spec_.k; ++r) apply_register(M, U, static_cast<std::size_t>(r), spec_.s);
    };
    auto controlled_powers = [&](bool inverse) {
      for (int r = 0; r < spec_.k; ++r)
        for (int b = 0; b < spec_.s; ++b)
          for (std::int64_t rep = 0; rep < (std::int64_t{1} << b); ++rep)
            apply_controlled_walk(*walk_, state, static_cast<std::size_t>(r * spec_.s + b), meter, inverse);
    };
    each_register(H);
    controlled_powers(false);
    each_register(Finv);
    apply_flip(M);
    each_register(F);
    controlled_powers(true);
    each_register(H);
  }
};

inline Reflection build_reflection(const WalkOperator& walk, const PhaseEstimationSpec& spec) {
  return Reflection(walk, spec);
}

struct PhaseLeakage {
  double phase = 0.0;
  double zero_probability = 0.0;  // single round
  double error = 0.0;             // ||(R + Id)|e>|0>||
};

struct ReflectionReport {
  PhaseEstimationSpec spec;
  std::vector<PhaseLeakage> leakage;  // eigenvectors of W on A+B other than |pi>
  double max_error = 0.0;
  double max_zero_probability = 0.0;  // over eigenphases with |phi| >= Delta
  double pi_fidelity = 1.0;
  double random_max_error = 0.0;      // over random unit vectors in A+B orthogonal to |pi>
  std::vector<int> ks;
  std::vector<double> errors_by_k;
  double fitted_c = std::numeric_limits<double>::infinity();
};

/// Least-squares slope c of log2(error) = a - c k over the nonzero errors;
/// +inf if fewer than two are nonzero.
inline double fit_decay_constant(const std::vector<int>& ks, const std::vector<double>& errors) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < ks.size(); ++i)
    if (errors[i] > 0.0 && std::isfinite(std::log2(errors[i]))) {
      xs.push_back(ks[i]);
      ys.push_back(std::log2(errors[i]));
    }
  if (xs.size() < 2) return std::numeric_limits<double>::infinity();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
  return -sxy / sxx;
}

/// Error profile of R(P) on the eigenbasis of A+B, plus a decay fit over
/// k = 1..k_max (k_max = 0 selects max(spec.k, 6)).
inline ReflectionReport reflection_error(const WalkOperator& walk, const Discriminant& disc, PhaseEstimationSpec spec,
                                         int trials = 16, std::uint64_t seed = 1, int k_max = 0) {
  ReflectionReport rep;
  if (spec.mode != ReflectionMode::exact && !disc.phase_gap_defined)
    throw Error(ErrorKind::degenerate_spectrum, "all singular values of D(P) equal 1; phase gap undefined");
  spec = resolve_spec(spec, disc);
  rep.spec = spec;
  if (spec.mode == ReflectionMode::exact) {
    rep.fitted_c = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= std::max(k_max, 1); ++k) rep.ks.push_back(k), rep.errors_by_k.push_back(0.0);
    for (std::size_t m = 1; m < walk.eigenphases().size(); ++m) rep.leakage.push_back({walk.eigenphases()[m], 0.0, 0.0});
    return rep;
  }

  auto error_at = [&](double phi, int k) { return analytic_phase_error(phi, spec.s, k, spec.vote); };

  const auto& phases = walk.eigenphases();
  const double gap = disc.phase_gap;
  for (std::size_t m = 1; m < phases.size(); ++m) {
    PhaseLeakage l{phases[m], zero_outcome_probability(phases[m], spec.s), error_at(phases[m], spec.k)};
    rep.max_error = std::max(rep.max_error, l.error);
    if (std::abs(phases[m]) >= gap - 1e-9) rep.max_zero_probability = std::max(rep.max_zero_probability, l.zero_probability);
    rep.leakage.push_back(l);
  }

  // <pi,0|R|pi,0> = P(no flip) - P(flip) at phase 0.
  const double stay = std::pow(zero_outcome_probability(0.0, spec.s), spec.k);
  rep.pi_fidelity = 2.0 * stay - 1.0;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < trials && rep.leakage.size() > 0; ++trial) {
    double norm2 = 0.0, err2 = 0.0;
    for (const auto& l : rep.leakage) {
      double w = std::norm(Complex(gauss(rng), gauss(rng)));
      norm2 += w;
      err2 += w * l.error * l.error;
    }
    rep.random_max_error = std::max(rep.random_max_error, std::sqrt(err2 / norm2));
  }

  const int kmax = k_max > 0 ? k_max : std::max(spec.k, 6);
  for (int k = 1; k <= kmax; ++k) {
    double worst = 0.0;
    for (std::size_t m = 1; m < phases.size(); ++m) worst = std::max(worst, error_at(phases[m], k));
    rep.ks.push_back(k);
    rep.errors_by_k.push_back(worst);
  }
  rep.fitted_c = fit_decay_constant(rep.ks, rep.errors_by_k);
  return rep;
}

}  // namespace walklab
