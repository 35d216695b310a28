#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace walklab {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RowMajorCMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kPi = 3.14159265358979323846;

enum class ErrorKind {
  non_stochastic_row,
  not_irreducible,
  convergence_failure,
  alpha_out_of_range,
  degenerate_spectrum,
  proposition_violation,
  correspondence_violation,
  dimension_mismatch,
  dimension_cap,
  gamma_out_of_range,
  depth_cap,
  recursion_mismatch,
  empty_marked_set,
  param_error,
  io_error,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::non_stochastic_row: return "NonStochasticRow";
    case ErrorKind::not_irreducible: return "NotIrreducible";
    case ErrorKind::convergence_failure: return "ConvergenceFailure";
    case ErrorKind::alpha_out_of_range: return "AlphaOutOfRange";
    case ErrorKind::degenerate_spectrum: return "DegenerateSpectrum";
    case ErrorKind::proposition_violation: return "PropositionViolation";
    case ErrorKind::correspondence_violation: return "CorrespondenceViolation";
    case ErrorKind::dimension_mismatch: return "DimensionMismatch";
    case ErrorKind::dimension_cap: return "DimensionCap";
    case ErrorKind::gamma_out_of_range: return "GammaOutOfRange";
    case ErrorKind::depth_cap: return "DepthCap";
    case ErrorKind::recursion_mismatch: return "RecursionMismatch";
    case ErrorKind::empty_marked_set: return "EmptyMarkedSet";
    case ErrorKind::param_error: return "ParamError";
    case ErrorKind::io_error: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Central numerical thresholds. Every module reads these instead of literals.
struct Tolerances {
  double row_sum = 1e-9;          // reject rows whose sum deviates more than this
  double structural = 1e-12;      // stochasticity / reversal identities
  double spectral_residual = 1e-10;  // ||pi P - pi||_inf
  double unit_singular = 1e-9;    // sigma >= 1 - unit_singular counts as 1
  double zero_singular = 1e-9;    // sigma <= zero_singular contributes theta = pi/2
  double rank = 1e-10;            // Gram eigenvalue threshold for the A+B basis
  double reversible = 1e-12;
  int power_iteration_cap = 200000;
};

inline const Tolerances& default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

// Abstract S/U/C unit counters. Every walk application (controlled or not)
// charges 4 update units.
struct CostMeter {
  std::int64_t setup_units = 0;
  std::int64_t update_units = 0;
  std::int64_t check_units = 0;
  std::int64_t cwalk_calls = 0;

  void charge_walk(std::int64_t calls = 1) {
    cwalk_calls += calls;
    update_units += 4 * calls;
  }

  CostMeter& operator+=(const CostMeter& other) {
    setup_units += other.setup_units;
    update_units += other.update_units;
    check_units += other.check_units;
    cwalk_calls += other.cwalk_calls;
    return *this;
  }

  friend CostMeter operator-(CostMeter a, const CostMeter& b) {
    a.setup_units -= b.setup_units;
    a.update_units -= b.update_units;
    a.check_units -= b.check_units;
    a.cwalk_calls -= b.cwalk_calls;
    return a;
  }

  friend bool operator==(const CostMeter&, const CostMeter&) = default;
};

// Worker count: WALKLAB_THREADS if set and positive, else hardware concurrency.
inline unsigned thread_budget() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("WALKLAB_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  return hw;
}

// Runs body(i) for i in [0, count) on up to thread_budget() threads. Work is
// split into contiguous blocks so per-index results are independent of the
// thread count.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_budget(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t block = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = w * block, hi = std::min(count, lo + block);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::size_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace walklab
