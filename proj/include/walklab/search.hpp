#pragma once

// Quantum search schemas: ideal Grover rotation, Quantum Search(P) with
// approximate reflections, and recursive amplitude amplification.

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include "walklab/reflect.hpp"

namespace walklab {

/// Chain plus the spectral data every quantum schema needs.
struct QuantumSetup {
  MarkovChain chain;
  Discriminant disc;
  WalkOperator walk;
};

inline QuantumSetup prepare(const MarkovChain& chain, const WalkLimits& limits = {}) {
  return {chain, build_discriminant(chain), build_walk(chain, default_tolerances(), limits)};
}

/// -ref(M) on the first register: negates every amplitude with x in M.
inline void marked_flip(EdgeState& state, const MarkedSet& marked, CostMeter& meter) {
  const std::size_t block = state.n * state.ancilla_dim;
  for (std::size_t x : marked.members)
    state.amplitudes.segment(static_cast<Eigen::Index>(x * block), static_cast<Eigen::Index>(block)) *= -1.0;
  meter.check_units += 1;
}

struct SearchOutcome {
  double success_probability = 0.0;  // ||Pi_M psi_final||^2
  Vector element_distribution;       // probability of each x in the first register
  std::vector<double> deviation_trace;  // entry i: ||psi_i - phi_i (x) |0>||, i = 0..iterations
  CostMeter meter;
  std::vector<double> angles;           // entry i: ||Pi_M psi_i||
  std::size_t iterations = 0;
  PhaseEstimationSpec spec;
  double max_norm_drift = 0.0;
};

namespace detail {

inline double marked_weight(const EdgeState& s, const MarkedSet& marked) {
  const std::size_t block = s.n * s.ancilla_dim;
  double w = 0.0;
  for (std::size_t x : marked.members)
    w += s.amplitudes.segment(static_cast<Eigen::Index>(x * block), static_cast<Eigen::Index>(block)).squaredNorm();
  return w;
}

inline Vector element_distribution(const EdgeState& s) {
  Vector p(static_cast<Eigen::Index>(s.n));
  const std::size_t block = s.n * s.ancilla_dim;
  for (std::size_t x = 0; x < s.n; ++x)
    p[static_cast<Eigen::Index>(x)] =
        s.amplitudes.segment(static_cast<Eigen::Index>(x * block), static_cast<Eigen::Index>(block)).squaredNorm();
  return p;
}

// (2|pi><pi| - Id) on the whole edge space, ancilla untouched.
inline void ideal_reflect_pi(EdgeState& s, const Vector& pi) {
  auto M = s.as_matrix();
  const CVector p = pi.cast<Complex>();
  RowMajorCMatrix proj = p * (p.adjoint() * M);
  M = 2.0 * proj - RowMajorCMatrix(M);
}

inline double default_epsilon(const MarkovChain& chain, const MarkedSet& marked) {
  return marked.empty() ? chain.stationary().minCoeff() : marked.epsilon;
}

}  // namespace detail

/// Grover-optimal iteration count floor(pi / (4 asin sqrt(eps))).
inline std::size_t default_iterations(double epsilon) {
  return static_cast<std::size_t>(std::floor(kPi / (4.0 * std::asin(std::sqrt(epsilon)))));
}

/// ceil(log2(1/sqrt(eps))) + 2.
inline int default_rounds(double epsilon) {
  return static_cast<int>(std::ceil(std::log2(1.0 / std::sqrt(epsilon)) - 1e-12)) + 2;
}

/// Exact iteration of (2|pi><pi| - Id)(-ref(M)) starting from |pi>.
inline SearchOutcome ideal_grover(const MarkovChain& chain, const MarkedSet& marked, std::size_t iterations) {
  if (marked.empty()) throw Error(ErrorKind::empty_marked_set, "ideal Grover needs a nonempty marked set");
  const Vector pi = pi_state(chain);
  SearchOutcome out;
  out.iterations = iterations;
  out.spec.mode = ReflectionMode::exact;
  EdgeState s = with_zero_ancilla(pi.cast<Complex>(), chain.size(), 1);
  out.meter.setup_units = 1;
  out.angles.push_back(std::sqrt(detail::marked_weight(s, marked)));
  out.deviation_trace.push_back(0.0);
  for (std::size_t i = 0; i < iterations; ++i) {
    marked_flip(s, marked, out.meter);
    detail::ideal_reflect_pi(s, pi);
    out.angles.push_back(std::sqrt(detail::marked_weight(s, marked)));
    out.deviation_trace.push_back(0.0);
    out.max_norm_drift = std::max(out.max_norm_drift, std::abs(s.norm() - 1.0));
  }
  out.success_probability = detail::marked_weight(s, marked);
  out.element_distribution = detail::element_distribution(s);
  return out;
}

/// Quantum Search(P): from |pi>|0>, repeat {marked_flip; R(P)}. k <= 0 and
/// iterations < 0 select the defaults. The ideal Grover trajectory is tracked
/// alongside for the deviation trace.
inline SearchOutcome quantum_search(const QuantumSetup& q, const MarkedSet& marked, PhaseEstimationSpec spec, int k = 0,
                                    long iterations = -1) {
  if (q.disc.sv_gap <= 0.0)
    throw Error(ErrorKind::degenerate_spectrum, "singular value gap of D(P) is zero");
  const double eps = detail::default_epsilon(q.chain, marked);
  spec.k = k > 0 ? k : default_rounds(eps);
  spec = resolve_spec(spec, q.disc);
  Reflection R(q.walk, spec);

  SearchOutcome out;
  out.spec = spec;
  out.iterations = iterations >= 0 ? static_cast<std::size_t>(iterations) : default_iterations(eps);
  const Vector pi = q.walk.pi_state();
  const std::size_t n = q.chain.size();
  EdgeState psi = with_zero_ancilla(pi.cast<Complex>(), n, R.ancilla_dim());
  EdgeState phi = with_zero_ancilla(pi.cast<Complex>(), n, 1);
  CostMeter shadow;
  out.meter.setup_units = 1;

  auto deviation = [&] {
    auto M = psi.as_matrix();
    double d2 = (M.col(0) - phi.amplitudes).squaredNorm();
    if (M.cols() > 1) d2 += M.rightCols(M.cols() - 1).squaredNorm();
    return std::sqrt(d2);
  };
  out.angles.push_back(std::sqrt(detail::marked_weight(psi, marked)));
  out.deviation_trace.push_back(deviation());
  for (std::size_t i = 0; i < out.iterations; ++i) {
    marked_flip(psi, marked, out.meter);
    R.apply(psi, out.meter);
    marked_flip(phi, marked, shadow);
    detail::ideal_reflect_pi(phi, pi);
    out.angles.push_back(std::sqrt(detail::marked_weight(psi, marked)));
    out.deviation_trace.push_back(deviation());
    out.max_norm_drift = std::max(out.max_norm_drift, std::abs(psi.norm() - 1.0));
  }
  out.success_probability = marked.empty() ? 0.0 : detail::marked_weight(psi, marked);
  out.element_distribution = detail::element_distribution(psi);
  return out;
}

// --- Recursive amplitude amplification ---------------------------------------

enum class BetaConvention { pi_cubed, pi_squared };

inline const char* to_string(BetaConvention b) { return b == BetaConvention::pi_cubed ? "pi3" : "pi2"; }

inline BetaConvention parse_beta(const std::string& name) {
  if (name == "pi3") return BetaConvention::pi_cubed;
  if (name == "pi2") return BetaConvention::pi_squared;
  throw Error(ErrorKind::param_error, "unknown beta convention '" + name + "'");
}

struct RecursionSchedule {
  double epsilon = 0.0;
  double gamma = 0.0;
  BetaConvention convention = BetaConvention::pi_cubed;
  int t = 0;
  std::vector<double> betas;  // beta_1..beta_t
  std::vector<int> s_list;
  std::vector<int> k_list;
};

/// Smallest t >= 0 with 3^t asin(sqrt(eps)) in [pi/4, 3pi/4].
inline int recursion_depth(double epsilon) {
  const double phi0 = std::asin(std::sqrt(epsilon));
  double a = phi0;
  for (int t = 0; t < 64; ++t, a *= 3.0)
    if (a >= kPi / 4.0 && a <= 3.0 * kPi / 4.0) return t;
  throw Error(ErrorKind::param_error, "no recursion depth reaches the target window");
}

inline double beta_coefficient(BetaConvention c) {
  return c == BetaConvention::pi_cubed ? 18.0 / (4.0 * kPi * kPi * kPi) : 18.0 / (4.0 * kPi * kPi);
}

/// error_of_k(k) is the calibrated reflection error with k rounds; k_i is the
/// smallest k in [1, k_cap] with error_of_k(k) <= beta_i. Without a
/// calibration every k_i is 1.
inline RecursionSchedule make_schedule(double epsilon, double gamma, BetaConvention convention = BetaConvention::pi_cubed,
                                       const std::function<double(int)>& error_of_k = {}, int s = 0, int k_cap = 64) {
  if (!(gamma > 0.0 && gamma <= 1.0 / std::sqrt(2.0) + 1e-15))
    throw Error(ErrorKind::gamma_out_of_range, "gamma must lie in (0, 1/sqrt(2)], got " + std::to_string(gamma));
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw Error(ErrorKind::param_error, "epsilon must lie in (0, 1]");
  RecursionSchedule sch;
  sch.epsilon = epsilon;
  sch.gamma = gamma;
  sch.convention = convention;
  sch.t = recursion_depth(epsilon);
  for (int i = 1; i <= sch.t; ++i) {
    const double beta = beta_coefficient(convention) * gamma / (static_cast<double>(i) * i);
    sch.betas.push_back(beta);
    sch.s_list.push_back(s);
    int k = 1;
    if (error_of_k) {
      while (error_of_k(k) > beta) {
        if (++k > k_cap) {
          std::ostringstream os;
          os << "no k <= " << k_cap << " brings the reflection error below beta_" << i << " = " << beta;
          throw Error(ErrorKind::param_error, os.str());
        }
      }
    }
    sch.k_list.push_back(k);
  }
  return sch;
}

struct LevelRecord {
  int level = 0;
  double sin_phi = 0.0;    // ||Pi_M A_i |pi,0>||
  double ideal_sin = 0.0;  // sin(3^i phi_0)
  double e = 0.0;          // |sin_phi - ideal_sin|
  double e_tilde = 0.0;    // e~_i from the error recursion
  double bound = 0.0;      // gamma * phi_bar_i / pi
  double reflection_error = 0.0;  // calibrated error of R_i
  CostMeter level_cost;    // flip + gated reflection
  CostMeter cost;          // Cost(i): one application of A_i
};

struct RecursiveOutcome {
  SearchOutcome outcome;
  RecursionSchedule schedule;
  std::vector<LevelRecord> levels;  // i = 0..t
  bool error_recursion_holds = true;  // e_i <= e~_i for all i
  bool angle_bound_holds = true;      // e_i <= gamma phi_bar_i / pi for all i
  double projection = 0.0;            // ||Pi_M psi_final||
};

namespace detail {

class RecursionRunner {
 public:
  RecursionRunner(const QuantumSetup& q, const MarkedSet& marked, const std::vector<Reflection>& refl,
                  std::vector<std::size_t> offsets, std::size_t total_bits)
      : q_(q), marked_(marked), refl_(refl), offsets_(std::move(offsets)), total_bits_(total_bits),
        cost_(refl.size() + 1), level_(refl.size() + 1) {}

  void forward(int i, EdgeState& s, CostMeter& m) { run(i, s, m, false); }

  const std::vector<std::optional<CostMeter>>& costs() const { return cost_; }
  const std::vector<std::optional<CostMeter>>& level_costs() const { return level_; }

 private:
  const QuantumSetup& q_;
  const MarkedSet& marked_;
  const std::vector<Reflection>& refl_;
  std::vector<std::size_t> offsets_;
  std::size_t total_bits_;
  std::vector<std::optional<CostMeter>> cost_, level_;

  static void record(std::optional<CostMeter>& slot, const CostMeter& delta, const char* what, int i) {
    if (!slot) {
      slot = delta;
    } else if (!(*slot == delta)) {
      throw Error(ErrorKind::recursion_mismatch, std::string(what) + " at level " + std::to_string(i) +
                                                     " charged differently on two invocations");
    }
  }

  // A_i = A_{i-1} G_i A_{i-1}^dagger (-ref M) A_{i-1}; the adjoint reverses it.
  void run(int i, EdgeState& s, CostMeter& m, bool adjoint) {
    if (i == 0) return;
    const CostMeter start = m;
    CostMeter level;
    auto flip = [&] {
      CostMeter before = m;
      marked_flip(s, marked_, m);
      level += m - before;
    };
    auto gate = [&] {
      CostMeter before = m;
      gated_reflection(i, s, m);
      level += m - before;
    };
    if (!adjoint) {
      run(i - 1, s, m, false);
      flip();
      run(i - 1, s, m, true);
      gate();
      run(i - 1, s, m, false);
    } else {
      run(i - 1, s, m, true);
      gate();
      run(i - 1, s, m, false);
      flip();
      run(i - 1, s, m, true);
    }
    record(level_[static_cast<std::size_t>(i)], level, "level cost", i);
    record(cost_[static_cast<std::size_t>(i)], m - start, adjoint ? "A_i^dagger" : "A_i", i);
  }

  // R(beta_i) on register block i where every other block reads 0, else -Id.
  void gated_reflection(int i, EdgeState& s, CostMeter& m) {
    const Reflection& R = refl_[static_cast<std::size_t>(i - 1)];
    const std::size_t off = offsets_[static_cast<std::size_t>(i - 1)];
    const std::size_t width = R.ancilla_bits();
    const std::size_t dim = std::size_t{1} << total_bits_;
    const std::size_t block_mask = ((std::size_t{1} << width) - 1) << off;
    auto M = s.as_matrix();
    for (std::size_t a = 0; a < dim; ++a)
      if (a & ~block_mask) M.col(static_cast<Eigen::Index>(a)) *= -1.0;
    EdgeState sub = EdgeState::zeros(s.n, std::size_t{1} << width);
    auto S = sub.as_matrix();
    for (std::size_t kappa = 0; kappa < sub.ancilla_dim; ++kappa)
      S.col(static_cast<Eigen::Index>(kappa)) = M.col(static_cast<Eigen::Index>(kappa << off));
    R.apply(sub, m);
    for (std::size_t kappa = 0; kappa < sub.ancilla_dim; ++kappa)
      M.col(static_cast<Eigen::Index>(kappa << off)) = S.col(static_cast<Eigen::Index>(kappa));
  }
};

}  // namespace detail

/// Runs A_0..A_t on |pi>|0>, recording per-level angles, the error recursion
/// and instrumented costs. Cost identities are verified exactly.
inline RecursiveOutcome recursive_search(const QuantumSetup& q, const MarkedSet& marked, double gamma,
                                         PhaseEstimationSpec spec, BetaConvention convention = BetaConvention::pi_cubed,
                                         int max_depth = 12) {
  if (marked.empty()) throw Error(ErrorKind::empty_marked_set, "recursive search needs a nonempty marked set");
  if (q.disc.sv_gap <= 0.0) throw Error(ErrorKind::degenerate_spectrum, "singular value gap of D(P) is zero");
  if (spec.mode != ReflectionMode::exact && !q.disc.phase_gap_defined)
    throw Error(ErrorKind::degenerate_spectrum, "phase gap undefined");

  RecursiveOutcome res;
  const bool exact = spec.mode == ReflectionMode::exact;
  if (!exact && spec.s == 0) spec.s = auto_bits(q.disc.phase_gap);
  std::function<double(int)> calib;
  if (!exact) {
    calib = [&](int k) {
      PhaseEstimationSpec probe = spec;
      probe.k = k;
      return reflection_error(q.walk, q.disc, probe, 0, 1, 1).max_error;
    };
  }
  res.schedule = make_schedule(marked.epsilon, gamma, convention, calib, exact ? 0 : spec.s);
  const auto& sch = res.schedule;
  if (sch.t > max_depth)
    throw Error(ErrorKind::depth_cap, "recursion depth " + std::to_string(sch.t) + " exceeds " + std::to_string(max_depth));

  std::vector<Reflection> refl;
  std::vector<std::size_t> offsets;
  std::size_t bits = 0;
  for (int i = 1; i <= sch.t; ++i) {
    PhaseEstimationSpec lvl = spec;
    lvl.k = exact ? 1 : sch.k_list[static_cast<std::size_t>(i - 1)];
    refl.emplace_back(q.walk, lvl);
    offsets.push_back(bits);
    bits += refl.back().ancilla_bits();
  }
  const std::size_t cap = spec.mode == ReflectionMode::circuit ? Reflection::kCircuitCap : Reflection::kSpectralCap;
  if (bits > 40 || q.walk.edge_dim() * (std::size_t{1} << bits) > cap)
    throw Error(ErrorKind::dimension_cap, "recursion needs " + std::to_string(bits) + " ancilla bits on edge dimension " +
                                              std::to_string(q.walk.edge_dim()));

  detail::RecursionRunner runner(q, marked, refl, offsets, bits);
  const Vector pi = q.walk.pi_state();
  const double phi0 = std::asin(std::sqrt(marked.epsilon));
  double e_tilde = 0.0;
  EdgeState final_state;
  CostMeter final_meter;
  for (int i = 0; i <= sch.t; ++i) {
    EdgeState s = with_zero_ancilla(pi.cast<Complex>(), q.chain.size(), std::size_t{1} << bits);
    CostMeter m;
    runner.forward(i, s, m);
    LevelRecord rec;
    rec.level = i;
    rec.sin_phi = std::sqrt(detail::marked_weight(s, marked));
    const double phi_bar = std::pow(3.0, i) * phi0;
    rec.ideal_sin = std::sin(phi_bar);
    rec.e = std::abs(rec.sin_phi - rec.ideal_sin);
    if (i > 0) {
      const double beta = sch.betas[static_cast<std::size_t>(i - 1)];
      e_tilde = 4.0 * beta * (phi_bar / 3.0) + 3.0 * e_tilde;
      rec.reflection_error = calib ? calib(sch.k_list[static_cast<std::size_t>(i - 1)]) : 0.0;
    }
    rec.e_tilde = e_tilde;
    rec.bound = sch.gamma * phi_bar / kPi;
    if (rec.e > rec.e_tilde + 1e-12) res.error_recursion_holds = false;
    if (rec.e > rec.bound + 1e-12) res.angle_bound_holds = false;
    res.outcome.angles.push_back(rec.sin_phi);
    res.outcome.deviation_trace.push_back(rec.e);
    res.outcome.max_norm_drift = std::max(res.outcome.max_norm_drift, std::abs(s.norm() - 1.0));
    res.levels.push_back(rec);
    if (i == sch.t) {
      final_state = std::move(s);
      final_meter = m;
    }
  }

  for (int i = 1; i <= sch.t; ++i) {
    res.levels[static_cast<std::size_t>(i)].cost = *runner.costs()[static_cast<std::size_t>(i)];
    res.levels[static_cast<std::size_t>(i)].level_cost = *runner.level_costs()[static_cast<std::size_t>(i)];
  }

  res.outcome.iterations = static_cast<std::size_t>(sch.t);
  res.outcome.spec = spec;
  res.outcome.meter = final_meter;
  res.outcome.meter.setup_units += 1;
  res.outcome.success_probability = detail::marked_weight(final_state, marked);
  res.outcome.element_distribution = detail::element_distribution(final_state);
  res.projection = std::sqrt(res.outcome.success_probability);
  return res;
}

struct CostReport {
  std::vector<CostMeter> costs;        // Cost(0..t)
  std::vector<CostMeter> level_costs;  // level 1..t at index 1..t
  bool identity_holds = true;
  std::int64_t total_update_units = 0;
  std::int64_t total_check_units = 0;
  double fitted_k = 0.0;  // total U / ((1/sqrt eps)(log2(1/gamma) + 1))
};

/// Cost(i) = 3 Cost(i-1) + level_i, exactly, per unit kind. Throws
/// RecursionMismatch on any violation.
inline CostReport cost_recursion_check(const RecursionSchedule& sch, const std::vector<LevelRecord>& levels) {
  CostReport rep;
  rep.costs.push_back(CostMeter{});
  rep.level_costs.push_back(CostMeter{});
  for (int i = 1; i <= sch.t; ++i) {
    const auto& rec = levels.at(static_cast<std::size_t>(i));
    CostMeter expect = rep.costs.back();
    expect += rep.costs.back();
    expect += rep.costs.back();
    expect += rec.level_cost;
    if (!(expect == rec.cost)) {
      std::ostringstream os;
      os << "Cost(" << i << ") = " << rec.cost.update_units << "U + " << rec.cost.check_units << "C, recursion gives "
         << expect.update_units << "U + " << expect.check_units << "C";
      throw Error(ErrorKind::recursion_mismatch, os.str());
    }
    rep.costs.push_back(rec.cost);
    rep.level_costs.push_back(rec.level_cost);
  }
  rep.total_update_units = rep.costs.back().update_units;
  rep.total_check_units = rep.costs.back().check_units;
  const double scale = (1.0 / std::sqrt(sch.epsilon)) * (std::log2(1.0 / sch.gamma) + 1.0);
  rep.fitted_k = static_cast<double>(rep.total_update_units + rep.total_check_units) / scale;
  return rep;
}

}  // namespace walklab
