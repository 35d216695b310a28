#pragma once

// Classical Markov chain core: validation, stationary distribution,
// time-reversal, gaps, laziness and the two classical search baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "walklab/core.hpp"

namespace walklab {

struct ChainFlags {
  bool irreducible = false;
  bool aperiodic = false;
  bool reversible = false;
  bool has_self_loops = false;  // p_xx > 0 for every x
};

class MarkovChain {
 public:
  MarkovChain() = default;

  std::size_t size() const { return static_cast<std::size_t>(P_.rows()); }
  const Matrix& transition() const { return P_; }
  double operator()(std::size_t x, std::size_t y) const { return P_(x, y); }
  const Vector& stationary() const { return pi_; }
  const ChainFlags& flags() const { return flags_; }

  bool is_ergodic() const { return flags_.irreducible && flags_.aperiodic; }

 private:
  Matrix P_;
  Vector pi_;
  ChainFlags flags_;

  friend MarkovChain validate_chain(const Matrix&, const Tolerances&);
};

namespace detail {

inline std::vector<std::vector<std::size_t>> support_graph(const Matrix& P, bool reversed) {
  const auto n = static_cast<std::size_t>(P.rows());
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      if (P(x, y) > 0.0) {
        if (reversed)
          adj[y].push_back(x);
        else
          adj[x].push_back(y);
      }
  return adj;
}

inline std::vector<long> bfs_levels(const std::vector<std::vector<std::size_t>>& adj, std::size_t root) {
  std::vector<long> level(adj.size(), -1);
  std::queue<std::size_t> frontier;
  level[root] = 0;
  frontier.push(root);
  while (!frontier.empty()) {
    auto u = frontier.front();
    frontier.pop();
    for (auto v : adj[u])
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        frontier.push(v);
      }
  }
  return level;
}

inline double linf_residual(const Vector& pi, const Matrix& P) {
  return (P.transpose() * pi - pi).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Exact reachability on the support digraph, forward and backward from state 0.
inline bool is_irreducible(const Matrix& P) {
  if (P.rows() == 0) return false;
  auto fwd = detail::bfs_levels(detail::support_graph(P, false), 0);
  auto bwd = detail::bfs_levels(detail::support_graph(P, true), 0);
  auto reached = [](const std::vector<long>& lv) {
    return std::all_of(lv.begin(), lv.end(), [](long l) { return l >= 0; });
  };
  return reached(fwd) && reached(bwd);
}

/// Period of an irreducible chain: gcd of level[u] + 1 - level[v] over support edges.
inline long chain_period(const Matrix& P) {
  auto adj = detail::support_graph(P, false);
  auto level = detail::bfs_levels(adj, 0);
  long g = 0;
  for (std::size_t u = 0; u < adj.size(); ++u)
    for (auto v : adj[u]) g = std::gcd(g, std::labs(level[u] + 1 - level[v]));
  return g;
}

/// Left Perron vector of an irreducible stochastic matrix. Dense eigensolve of
/// P^T first; falls back to power iteration on the half-lazy chain.
inline Vector stationary_distribution(const Matrix& P, const Tolerances& tol = default_tolerances()) {
  const auto n = P.rows();
  if (n == 1) return Vector::Ones(1);

  Vector pi;
  Eigen::EigenSolver<Matrix> es(P.transpose(), true);
  if (es.info() == Eigen::Success) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(es.eigenvalues()[i] - Complex(1.0)) < std::abs(es.eigenvalues()[best] - Complex(1.0))) best = i;
    pi = es.eigenvectors().col(best).real();
    double s = pi.sum();
    if (s != 0.0) pi /= s;
  }

  auto acceptable = [&](const Vector& v) {
    return v.size() == n && v.allFinite() && (v.array() > 0.0).all() && detail::linf_residual(v, P) <= tol.spectral_residual;
  };
  if (acceptable(pi)) return pi;

  // (P + I)/2 shares pi and is aperiodic, so plain iteration converges.
  Matrix lazy = 0.5 * (P + Matrix::Identity(n, n));
  Vector v = (pi.size() == n && pi.allFinite() && (pi.array() > 0.0).all()) ? pi : Vector::Constant(n, 1.0 / n);
  for (int it = 0; it < tol.power_iteration_cap; ++it) {
    v = lazy.transpose() * v;
    v /= v.sum();
    if ((it & 63) == 63 && acceptable(v)) return v;
  }
  if (acceptable(v)) return v;
  throw Error(ErrorKind::convergence_failure,
              "stationary residual " + std::to_string(detail::linf_residual(v, P)) + " after power iteration cap");
}

inline bool is_reversible(const Matrix& P, const Vector& pi, double tol) {
  const auto n = P.rows();
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = x + 1; y < n; ++y)
      if (std::abs(pi[x] * P(x, y) - pi[y] * P(y, x)) > tol) return false;
  return true;
}

inline bool is_reversible(const MarkovChain& chain, double tol = default_tolerances().reversible) {
  return is_reversible(chain.transition(), chain.stationary(), tol);
}

/// Checks stochasticity and irreducibility, computes pi and the structural flags.
inline MarkovChain validate_chain(const Matrix& P, const Tolerances& tol = default_tolerances()) {
  if (P.rows() == 0 || P.rows() != P.cols())
    throw Error(ErrorKind::param_error, "transition matrix must be square and nonempty");
  if (!P.allFinite() || (P.array() < 0.0).any())
    throw Error(ErrorKind::param_error, "transition matrix entries must be finite and non-negative");
  for (Eigen::Index x = 0; x < P.rows(); ++x) {
    double s = P.row(x).sum();
    if (std::abs(s - 1.0) > tol.row_sum) {
      std::ostringstream os;
      os << "row " << x << " sums to " << s;
      throw Error(ErrorKind::non_stochastic_row, os.str());
    }
  }
  if (!is_irreducible(P)) throw Error(ErrorKind::not_irreducible, "support digraph is not strongly connected");

  MarkovChain chain;
  chain.P_ = P;
  chain.pi_ = stationary_distribution(P, tol);
  chain.flags_.irreducible = true;
  chain.flags_.has_self_loops = (P.diagonal().array() > 0.0).all();
  chain.flags_.aperiodic = chain.flags_.has_self_loops || chain_period(P) == 1;
  chain.flags_.reversible = is_reversible(P, chain.pi_, tol.reversible);
  return chain;
}

/// P*_{yx} = pi_x p_xy / pi_y.
inline MarkovChain time_reversal(const MarkovChain& chain, const Tolerances& tol = default_tolerances()) {
  const Vector& pi = chain.stationary();
  Matrix rev = pi.cwiseInverse().asDiagonal() * chain.transition().transpose() * pi.asDiagonal();
  return validate_chain(rev, tol);
}

/// Eigenvalues of P, sorted by decreasing modulus.
inline CVector chain_eigenvalues(const MarkovChain& chain) {
  Eigen::EigenSolver<Matrix> es(chain.transition(), false);
  CVector ev = es.eigenvalues();
  std::vector<Complex> v(ev.data(), ev.data() + ev.size());
  std::stable_sort(v.begin(), v.end(), [](Complex a, Complex b) { return std::abs(a) > std::abs(b); });
  return Eigen::Map<CVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// delta = 1 - lambda*, lambda* the largest modulus among eigenvalues other
/// than the Perron eigenvalue 1.
inline double eigenvalue_gap(const MarkovChain& chain) {
  if (chain.size() == 1) return 1.0;
  Eigen::EigenSolver<Matrix> es(chain.transition(), false);
  CVector ev = es.eigenvalues();
  Eigen::Index perron = 0;
  for (Eigen::Index i = 1; i < ev.size(); ++i)
    if (std::abs(ev[i] - Complex(1.0)) < std::abs(ev[perron] - Complex(1.0))) perron = i;
  double lambda_star = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (i != perron) lambda_star = std::max(lambda_star, std::abs(ev[i]));
  return 1.0 - lambda_star;
}

inline MarkovChain lazify(const MarkovChain& chain, double alpha, const Tolerances& tol = default_tolerances()) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorKind::alpha_out_of_range, "alpha must lie in (0,1), got " + std::to_string(alpha));
  const auto n = static_cast<Eigen::Index>(chain.size());
  return validate_chain(alpha * Matrix::Identity(n, n) + (1.0 - alpha) * chain.transition(), tol);
}

struct MarkedSet {
  std::vector<std::size_t> members;  // sorted, unique
  std::vector<bool> mask;
  double epsilon = 0.0;

  bool empty() const { return members.empty(); }
  bool contains(std::size_t x) const { return x < mask.size() && mask[x]; }
};

inline MarkedSet make_marked(const MarkovChain& chain, std::vector<std::size_t> members) {
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  MarkedSet m;
  m.mask.assign(chain.size(), false);
  for (auto x : members) {
    if (x >= chain.size()) throw Error(ErrorKind::param_error, "marked state " + std::to_string(x) + " out of range");
    m.mask[x] = true;
    m.epsilon += chain.stationary()[static_cast<Eigen::Index>(x)];
  }
  m.members = std::move(members);
  return m;
}

struct ClassicalRunStats {
  std::int64_t steps_taken = 0;
  std::optional<std::size_t> found;
  std::int64_t setup_count = 0;
  std::int64_t update_count = 0;
  std::int64_t check_count = 0;
  std::uint64_t seed = 0;
};

// Inverse-CDF sampler over the rows of a stochastic matrix and over pi.
class ChainSampler {
 public:
  explicit ChainSampler(const MarkovChain& chain) : n_(chain.size()), rows_(n_ * n_), pi_(n_) {
    const Matrix& P = chain.transition();
    for (std::size_t x = 0; x < n_; ++x) {
      double acc = 0.0;
      for (std::size_t y = 0; y < n_; ++y) {
        acc += P(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
        rows_[x * n_ + y] = acc;
      }
    }
    double acc = 0.0;
    for (std::size_t x = 0; x < n_; ++x) pi_[x] = (acc += chain.stationary()[static_cast<Eigen::Index>(x)]);
  }

  template <typename Rng>
  std::size_t sample_stationary(Rng& rng) const {
    return draw(pi_.data(), rng);
  }

  template <typename Rng>
  std::size_t step(std::size_t x, Rng& rng) const {
    return draw(rows_.data() + x * n_, rng);
  }

 private:
  template <typename Rng>
  std::size_t draw(const double* cdf, Rng& rng) const {
    double u = std::uniform_real_distribution<double>(0.0, cdf[n_ - 1])(rng);
    auto it = std::upper_bound(cdf, cdf + n_, u);
    auto idx = static_cast<std::size_t>(it - cdf);
    return std::min(idx, n_ - 1);
  }

  std::size_t n_;
  std::vector<double> rows_;
  std::vector<double> pi_;
};

/// Search Algorithm 1: sample from pi, then up to t2 rounds of
/// {check; walk t1 steps}.
inline ClassicalRunStats classical_search_1(const ChainSampler& sampler, const MarkedSet& marked, std::int64_t t1,
                                            std::int64_t t2, std::uint64_t seed) {
  if (t1 < 1 || t2 < 1) throw Error(ErrorKind::param_error, "t1 and t2 must be >= 1");
  std::mt19937_64 rng(seed);
  ClassicalRunStats st;
  st.seed = seed;
  std::size_t y = sampler.sample_stationary(rng);
  st.setup_count = 1;
  for (std::int64_t round = 0; round < t2; ++round) {
    ++st.check_count;
    if (marked.contains(y)) {
      st.found = y;
      return st;
    }
    for (std::int64_t s = 0; s < t1; ++s) y = sampler.step(y, rng);
    st.update_count += t1;
    st.steps_taken += t1;
  }
  return st;
}

inline ClassicalRunStats classical_search_1(const MarkovChain& chain, const MarkedSet& marked, std::int64_t t1,
                                            std::int64_t t2, std::uint64_t seed) {
  return classical_search_1(ChainSampler(chain), marked, t1, t2, seed);
}

/// Search Algorithm 2: sample from pi, then up to t rounds of {check; one step}.
inline ClassicalRunStats classical_search_2(const ChainSampler& sampler, const MarkedSet& marked, std::int64_t t,
                                            std::uint64_t seed) {
  return classical_search_1(sampler, marked, 1, t, seed);
}

inline ClassicalRunStats classical_search_2(const MarkovChain& chain, const MarkedSet& marked, std::int64_t t,
                                            std::uint64_t seed) {
  return classical_search_2(ChainSampler(chain), marked, t, seed);
}

struct ClassicalSummary {
  std::size_t trials = 0;
  std::uint64_t base_seed = 0;
  double success_rate = 0.0;
  double mean_steps = 0.0;   // walk steps before the hit, successful runs only
  double mean_checks = 0.0;  // rounds until the hit, successful runs only
  double mean_updates = 0.0;  // over all runs
};

/// Runs `trials` independent searches with seeds base_seed + i. t1 == 0 selects
/// Algorithm 2 with budget t2.
inline ClassicalSummary run_classical_trials(const MarkovChain& chain, const MarkedSet& marked, std::int64_t t1,
                                             std::int64_t t2, std::size_t trials, std::uint64_t base_seed) {
  ChainSampler sampler(chain);
  std::vector<ClassicalRunStats> runs(trials);
  parallel_for(trials, [&](std::size_t i) {
    runs[i] = t1 == 0 ? classical_search_2(sampler, marked, t2, base_seed + i)
                      : classical_search_1(sampler, marked, t1, t2, base_seed + i);
  });
  ClassicalSummary sum;
  sum.trials = trials;
  sum.base_seed = base_seed;
  std::size_t hits = 0;
  double steps = 0.0, checks = 0.0, updates = 0.0;
  for (const auto& r : runs) {
    updates += static_cast<double>(r.update_count);
    if (!r.found) continue;
    ++hits;
    steps += static_cast<double>(r.steps_taken);
    checks += static_cast<double>(r.check_count);
  }
  if (trials > 0) {
    sum.success_rate = static_cast<double>(hits) / static_cast<double>(trials);
    sum.mean_updates = updates / static_cast<double>(trials);
  }
  if (hits > 0) {
    sum.mean_steps = steps / static_cast<double>(hits);
    sum.mean_checks = checks / static_cast<double>(hits);
  }
  return sum;
}

}  // namespace walklab
