#pragma once

// Chain generators, experiment configuration and result serialization.

#include <fstream>
#include <locale>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "walklab/search.hpp"

namespace walklab {

using json = nlohmann::json;

enum class ChainFamily { complete, cycle_directed, cycle_lazy, torus2d, johnson, random_reversible, file };

inline const char* to_string(ChainFamily f) {
  switch (f) {
    case ChainFamily::complete: return "complete";
    case ChainFamily::cycle_directed: return "cycle_directed";
    case ChainFamily::cycle_lazy: return "cycle_lazy";
    case ChainFamily::torus2d: return "torus2d";
    case ChainFamily::johnson: return "johnson";
    case ChainFamily::random_reversible: return "random_reversible";
    case ChainFamily::file: return "file";
  }
  return "unknown";
}

inline ChainFamily parse_family(const std::string& s) {
  for (auto f : {ChainFamily::complete, ChainFamily::cycle_directed, ChainFamily::cycle_lazy, ChainFamily::torus2d,
                 ChainFamily::johnson, ChainFamily::random_reversible, ChainFamily::file})
    if (s == to_string(f)) return f;
  throw Error(ErrorKind::param_error, "unknown chain family '" + s + "'");
}

struct ChainSpec {
  ChainFamily family = ChainFamily::complete;
  int n = 0;           // states; torus side length; ignored for johnson
  int n2 = 0;          // second torus side (0 = square)
  int m = 0, r = 0;    // johnson universe and subset size
  double alpha = 0.5;  // laziness for cycle_lazy and random_reversible
  std::uint64_t seed = 1;
  std::string path;
};

inline constexpr int kMaxStates = 2000;

struct GeneratedChain {
  MarkovChain chain;
  std::vector<std::uint64_t> subsets;  // johnson: bitmask of state x
};

namespace detail {

inline Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::io_error, path + ": " + e.what());
    }
    if (j.is_object()) j = j.at("P");
    rows = j.get<std::vector<std::vector<double>>>();
  } else {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream ls(line);
      ls.imbue(std::locale::classic());
      std::vector<double> row;
      double v;
      while (ls >> v) row.push_back(v);
      if (!row.empty()) rows.push_back(row);
    }
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix P(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw Error(ErrorKind::param_error, path + ": matrix is not square");
    for (Eigen::Index j = 0; j < n; ++j) P(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return P;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::param_error, what);
}

}  // namespace detail

/// Johnson r-subsets of {0..m-1} as bitmasks in increasing numeric order.
inline std::vector<std::uint64_t> johnson_states(int m, int r) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask)
    if (__builtin_popcountll(mask) == r) out.push_back(mask);
  return out;
}

inline GeneratedChain generate(const ChainSpec& spec) {
  GeneratedChain g;
  Matrix P;
  switch (spec.family) {
    case ChainFamily::complete: {
      detail::require(spec.n >= 1 && spec.n <= kMaxStates, "complete: need 1 <= n <= 2000");
      P = Matrix::Constant(spec.n, spec.n, 1.0 / spec.n);
      break;
    }
    case ChainFamily::cycle_directed:
    case ChainFamily::cycle_lazy: {
      detail::require(spec.n >= 1 && spec.n <= kMaxStates, "cycle: need 1 <= n <= 2000");
      P = Matrix::Zero(spec.n, spec.n);
      const bool lazy = spec.family == ChainFamily::cycle_lazy;
      if (lazy && !(spec.alpha > 0.0 && spec.alpha < 1.0))
        throw Error(ErrorKind::alpha_out_of_range, "alpha must lie in (0,1)");
      for (int x = 0; x < spec.n; ++x) {
        P(x, (x + 1) % spec.n) += lazy ? 1.0 - spec.alpha : 1.0;
        if (lazy) P(x, x) += spec.alpha;
      }
      break;
    }
    case ChainFamily::torus2d: {
      const int a = spec.n, b = spec.n2 > 0 ? spec.n2 : spec.n;
      detail::require(a >= 1 && b >= 1 && a * b <= kMaxStates, "torus2d: need sides >= 1 and at most 2000 states");
      P = Matrix::Zero(a * b, a * b);
      for (int i = 0; i < a; ++i)
        for (int j = 0; j < b; ++j) {
          const int x = i * b + j;
          P(x, ((i + 1) % a) * b + j) += 0.25;
          P(x, ((i + a - 1) % a) * b + j) += 0.25;
          P(x, i * b + (j + 1) % b) += 0.25;
          P(x, i * b + (j + b - 1) % b) += 0.25;
        }
      break;
    }
    case ChainFamily::johnson: {
      detail::require(spec.m >= 1 && spec.m <= 24 && spec.r >= 0 && spec.r <= spec.m, "johnson: need 0 <= r <= m <= 24");
      g.subsets = johnson_states(spec.m, spec.r);
      const auto n = static_cast<Eigen::Index>(g.subsets.size());
      detail::require(n <= kMaxStates, "johnson: too many states");
      P = Matrix::Zero(n, n);
      const int moves = spec.r * (spec.m - spec.r);
      if (moves == 0) {
        P(0, 0) = 1.0;
        break;
      }
      for (Eigen::Index x = 0; x < n; ++x) {
        const std::uint64_t S = g.subsets[static_cast<std::size_t>(x)];
        for (int i = 0; i < spec.m; ++i) {
          if (!((S >> i) & 1u)) continue;
          for (int j = 0; j < spec.m; ++j) {
            if ((S >> j) & 1u) continue;
            const std::uint64_t T = (S & ~(std::uint64_t{1} << i)) | (std::uint64_t{1} << j);
            auto it = std::lower_bound(g.subsets.begin(), g.subsets.end(), T);
            P(x, it - g.subsets.begin()) += 1.0 / moves;
          }
        }
      }
      break;
    }
    case ChainFamily::random_reversible: {
      detail::require(spec.n >= 1 && spec.n <= kMaxStates, "random_reversible: need 1 <= n <= 2000");
      if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) throw Error(ErrorKind::alpha_out_of_range, "alpha must lie in (0,1)");
      std::mt19937_64 rng(spec.seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      Matrix W(spec.n, spec.n);
      for (int i = 0; i < spec.n; ++i)
        for (int j = i; j < spec.n; ++j) W(i, j) = W(j, i) = u(rng);
      Vector deg = W.rowwise().sum();
      for (int i = 0; i < spec.n; ++i) detail::require(deg[i] > 0.0, "random_reversible: zero-weight row");
      P = spec.alpha * Matrix::Identity(spec.n, spec.n) + (1.0 - spec.alpha) * (deg.cwiseInverse().asDiagonal() * W);
      break;
    }
    case ChainFamily::file: {
      P = detail::read_matrix_file(spec.path);
      detail::require(P.rows() >= 1 && P.rows() <= kMaxStates, "file: need 1..2000 states");
      break;
    }
  }
  g.chain = validate_chain(P);
  return g;
}

/// "complete:16", "cycle_directed:8", "cycle_lazy:8:0.5", "torus2d:4" or
/// "torus2d:4x5", "johnson:8:4", "random_reversible:6:SEED[:ALPHA]",
/// "file:PATH".
inline ChainSpec parse_chain_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, ':')) parts.push_back(cur);
  detail::require(!parts.empty(), "empty chain spec");
  ChainSpec spec;
  spec.family = parse_family(parts[0]);
  auto num = [&](std::size_t i) -> double {
    detail::require(i < parts.size(), "chain spec '" + text + "' is missing a parameter");
    try {
      std::size_t used = 0;
      double v = std::stod(parts[i], &used);
      detail::require(used == parts[i].size(), "bad number '" + parts[i] + "'");
      return v;
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::param_error, "bad number '" + parts[i] + "' in chain spec");
    }
  };
  switch (spec.family) {
    case ChainFamily::complete:
    case ChainFamily::cycle_directed: spec.n = static_cast<int>(num(1)); break;
    case ChainFamily::cycle_lazy:
      spec.n = static_cast<int>(num(1));
      if (parts.size() > 2) spec.alpha = num(2);
      break;
    case ChainFamily::torus2d: {
      detail::require(parts.size() > 1, "torus2d needs a side length");
      auto x = parts[1].find('x');
      if (x == std::string::npos) {
        spec.n = static_cast<int>(num(1));
      } else {
        spec.n = std::stoi(parts[1].substr(0, x));
        spec.n2 = std::stoi(parts[1].substr(x + 1));
      }
      break;
    }
    case ChainFamily::johnson:
      spec.m = static_cast<int>(num(1));
      spec.r = static_cast<int>(num(2));
      break;
    case ChainFamily::random_reversible:
      spec.n = static_cast<int>(num(1));
      if (parts.size() > 2) spec.seed = static_cast<std::uint64_t>(num(2));
      if (parts.size() > 3) spec.alpha = num(3);
      break;
    case ChainFamily::file: {
      detail::require(parts.size() > 1, "file spec needs a path");
      spec.path = text.substr(text.find(':') + 1);
      break;
    }
  }
  return spec;
}

inline ChainSpec chain_spec_from_json(const json& j) {
  if (j.is_string()) return parse_chain_spec(j.get<std::string>());
  ChainSpec spec;
  spec.family = parse_family(j.at("family").get<std::string>());
  spec.n = j.value("n", 0);
  spec.n2 = j.value("n2", 0);
  spec.m = j.value("m", 0);
  spec.r = j.value("r", 0);
  spec.alpha = j.value("alpha", 0.5);
  spec.seed = j.value("seed", std::uint64_t{1});
  spec.path = j.value("path", std::string{});
  return spec;
}

inline json to_json(const ChainSpec& s) {
  json j{{"family", to_string(s.family)}};
  switch (s.family) {
    case ChainFamily::johnson: j["m"] = s.m, j["r"] = s.r; break;
    case ChainFamily::file: j["path"] = s.path; break;
    case ChainFamily::torus2d:
      j["n"] = s.n;
      if (s.n2 > 0) j["n2"] = s.n2;
      break;
    case ChainFamily::cycle_lazy: j["n"] = s.n, j["alpha"] = s.alpha; break;
    case ChainFamily::random_reversible: j["n"] = s.n, j["alpha"] = s.alpha, j["seed"] = s.seed; break;
    default: j["n"] = s.n;
  }
  return j;
}

/// Marked rule: explicit states, or (johnson only) every subset containing K.
struct MarkedRule {
  std::vector<std::size_t> states;
  std::optional<std::vector<int>> contains;
};

/// "0,3,5", "contains:0,1", "" or "none".
inline MarkedRule parse_marked_rule(const std::string& text) {
  MarkedRule rule;
  std::string body = text;
  const bool contains = body.rfind("contains:", 0) == 0;
  if (contains) body = body.substr(9);
  std::vector<long> vals;
  if (!body.empty() && body != "none") {
    std::istringstream is(body);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      try {
        vals.push_back(std::stol(tok));
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::param_error, "bad marked element '" + tok + "'");
      }
      detail::require(vals.back() >= 0, "marked elements must be non-negative");
    }
  }
  if (contains)
    rule.contains = std::vector<int>(vals.begin(), vals.end());
  else
    rule.states.assign(vals.begin(), vals.end());
  return rule;
}

inline MarkedRule marked_rule_from_json(const json& j) {
  if (j.is_null()) return {};
  if (j.is_string()) return parse_marked_rule(j.get<std::string>());
  MarkedRule rule;
  if (j.is_array()) {
    rule.states = j.get<std::vector<std::size_t>>();
  } else {
    rule.contains = j.at("contains").get<std::vector<int>>();
  }
  return rule;
}

inline json to_json(const MarkedRule& r) {
  if (r.contains) return json{{"contains", *r.contains}};
  return json(r.states);
}

inline MarkedSet apply_marked_rule(const GeneratedChain& g, const MarkedRule& rule) {
  if (!rule.contains) return make_marked(g.chain, rule.states);
  detail::require(!g.subsets.empty(), "'contains' marking applies to johnson chains only");
  std::uint64_t K = 0;
  for (int e : *rule.contains) K |= std::uint64_t{1} << e;
  std::vector<std::size_t> members;
  for (std::size_t x = 0; x < g.subsets.size(); ++x)
    if ((g.subsets[x] & K) == K) members.push_back(x);
  return make_marked(g.chain, members);
}

// --- Experiments ----------------------------------------------------------------

enum class Schema { spectrum, classical1, classical2, grover, quantum, recursive, reflect };

inline const char* to_string(Schema s) {
  switch (s) {
    case Schema::spectrum: return "spectrum";
    case Schema::classical1: return "classical1";
    case Schema::classical2: return "classical2";
    case Schema::grover: return "grover";
    case Schema::quantum: return "quantum";
    case Schema::recursive: return "recursive";
    case Schema::reflect: return "reflect";
  }
  return "unknown";
}

inline Schema parse_schema(const std::string& s) {
  for (auto v : {Schema::spectrum, Schema::classical1, Schema::classical2, Schema::grover, Schema::quantum,
                 Schema::recursive, Schema::reflect})
    if (s == to_string(v)) return v;
  throw Error(ErrorKind::param_error, "unknown schema '" + s + "'");
}

struct ExperimentConfig {
  ChainSpec chain;
  MarkedRule marked;
  Schema schema = Schema::spectrum;
  ReflectionMode mode = ReflectionMode::spectral;
  VoteRule vote = VoteRule::any_nonzero;
  BetaConvention beta = BetaConvention::pi_cubed;
  double gamma = 0.1;
  int k = 0;       // 0 = default
  int s = 0;       // 0 = auto
  int k_max = 6;   // reflect schema
  long iters = -1;  // -1 = default
  std::int64_t t1 = 0, t2 = 0;  // classical budgets, 0 = default
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  bool walk_phases = false;
  std::string output;
  std::vector<ExperimentConfig> sweep;  // non-empty for sweeps
};

inline ExperimentConfig config_from_json(const json& j, const ExperimentConfig* base = nullptr) {
  ExperimentConfig c = base ? *base : ExperimentConfig{};
  c.sweep.clear();
  try {
    if (j.contains("chain")) c.chain = chain_spec_from_json(j.at("chain"));
    if (j.contains("marked")) c.marked = marked_rule_from_json(j.at("marked"));
    if (j.contains("schema")) c.schema = parse_schema(j.at("schema").get<std::string>());
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("vote")) c.vote = parse_vote(j.at("vote").get<std::string>());
    if (j.contains("beta")) c.beta = parse_beta(j.at("beta").get<std::string>());
    c.gamma = j.value("gamma", c.gamma);
    c.k = j.value("k", c.k);
    c.s = j.value("s", c.s);
    c.k_max = j.value("k_max", c.k_max);
    c.iters = j.value("iters", c.iters);
    c.t1 = j.value("t1", c.t1);
    c.t2 = j.value("t2", c.t2);
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    c.walk_phases = j.value("walk_phases", c.walk_phases);
    c.output = j.value("output", c.output);
    if (j.contains("sweep")) {
      const json& sw = j.at("sweep");
      if (sw.contains("epsilons")) {
        for (double eps : sw.at("epsilons").get<std::vector<double>>()) {
          const double inv = 1.0 / eps;
          detail::require(std::abs(inv - std::round(inv)) < 1e-9, "sweep epsilon must be 1/n");
          ExperimentConfig run = c;
          run.chain = ChainSpec{};
          run.chain.family = ChainFamily::complete;
          run.chain.n = static_cast<int>(std::round(inv));
          run.marked = MarkedRule{{0}, std::nullopt};
          c.sweep.push_back(run);
        }
      }
      if (sw.contains("runs"))
        for (const json& r : sw.at("runs")) c.sweep.push_back(config_from_json(r, &c));
      detail::require(!c.sweep.empty(), "sweep has no runs");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::param_error, std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::io_error, path + ": " + e.what());
  }
  return config_from_json(j);
}

inline json to_json(const CostMeter& m) {
  return {{"setup_units", m.setup_units}, {"update_units", m.update_units}, {"check_units", m.check_units},
          {"cwalk_calls", m.cwalk_calls}};
}

inline json to_json(const PhaseEstimationSpec& s) {
  return {{"s", s.s}, {"k", s.k}, {"mode", to_string(s.mode)}, {"vote", to_string(s.vote)}};
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

struct RunResult {
  json record;
  bool invariants_ok = true;
  bool failed = false;  // a module error was raised
  // Sweep row.
  double epsilon = 0.0;
  long t = 0;
  std::int64_t total_u = 0, total_c = 0;
  double success = 0.0;
};

namespace detail {

struct InvariantLog {
  json j = json::object();
  bool ok = true;
  void add(const std::string& name, bool pass) {
    j[name] = pass;
    ok = ok && pass;
  }
};

inline json spectral_summary(const MarkovChain& chain, const Discriminant& disc) {
  json j{{"singular_values", to_std(disc.singular_values)},
         {"sv_gap", disc.sv_gap},
         {"unit_multiplicity", disc.unit_sv_multiplicity},
         {"eigenvalue_gap", eigenvalue_gap(chain)}};
  j["phase_gap"] = disc.phase_gap_defined ? json(disc.phase_gap) : json(nullptr);
  return j;
}

}  // namespace detail

inline RunResult run_single(const ExperimentConfig& cfg) {
  RunResult res;
  json& rec = res.record;
  rec["schema"] = to_string(cfg.schema);
  rec["chain"] = to_json(cfg.chain);
  detail::InvariantLog inv;
  try {
    GeneratedChain g = generate(cfg.chain);
    const MarkovChain& chain = g.chain;
    rec["chain"]["states"] = chain.size();
    MarkedSet marked = apply_marked_rule(g, cfg.marked);
    if (cfg.schema != Schema::spectrum && cfg.schema != Schema::reflect) {
      rec["marked"] = to_json(cfg.marked);
      rec["marked_count"] = marked.members.size();
      rec["epsilon"] = marked.epsilon;
    }
    res.epsilon = marked.epsilon;
    Discriminant disc = build_discriminant(chain);
    rec["spectral"] = detail::spectral_summary(chain, disc);

    switch (cfg.schema) {
      case Schema::spectrum: {
        try {
          inv.add("unit_multiplicity", check_unit_multiplicity(disc, chain) >= 1);
        } catch (const Error&) {
          inv.add("unit_multiplicity", false);
        }
        if (cfg.walk_phases) {
          WalkOperator w = build_walk(chain);
          rec["walk_phases"] = w.eigenphases();
          try {
            auto rep = verify_spectral_theorem(w, disc);
            rec["max_phase_deviation"] = rep.max_phase_deviation;
            inv.add("spectral_correspondence", true);
          } catch (const Error& e) {
            rec["correspondence_error"] = e.what();
            inv.add("spectral_correspondence", false);
          }
        }
        (void)phase_gap(disc);
        break;
      }
      case Schema::classical1:
      case Schema::classical2: {
        if (marked.empty()) throw Error(ErrorKind::empty_marked_set, "classical search needs a marked set");
        std::int64_t t1 = 0, t2 = 0;
        if (cfg.schema == Schema::classical1) {
          t1 = cfg.t1 > 0 ? cfg.t1 : static_cast<std::int64_t>(std::ceil(1.0 / eigenvalue_gap(chain) - 1e-9));
          t2 = cfg.t2 > 0 ? cfg.t2 : static_cast<std::int64_t>(std::ceil(2.0 / marked.epsilon - 1e-9));
        } else {
          t2 = cfg.t2 > 0 ? cfg.t2 : static_cast<std::int64_t>(std::ceil(100.0 / marked.epsilon - 1e-9));
        }
        ClassicalSummary sum = run_classical_trials(chain, marked, t1, t2, cfg.trials, cfg.seed);
        rec["t1"] = t1;
        rec["t2"] = t2;
        rec["outcome"] = {{"trials", sum.trials},          {"base_seed", sum.base_seed},
                          {"success_rate", sum.success_rate}, {"mean_steps", sum.mean_steps},
                          {"mean_checks", sum.mean_checks},   {"mean_updates", sum.mean_updates}};
        res.success = sum.success_rate;
        res.t = static_cast<long>(t2);
        break;
      }
      case Schema::grover: {
        const std::size_t iters =
            cfg.iters >= 0 ? static_cast<std::size_t>(cfg.iters) : default_iterations(marked.epsilon);
        SearchOutcome out = ideal_grover(chain, marked, iters);
        const double phi = std::asin(std::sqrt(marked.epsilon));
        bool closed = true;
        for (std::size_t j = 0; j < out.angles.size(); ++j)
          closed = closed && std::abs(out.angles[j] - std::abs(std::sin((2.0 * j + 1.0) * phi))) <= 1e-10;
        inv.add("closed_form_angles", closed);
        rec["outcome"] = {{"iterations", iters},
                          {"success_probability", out.success_probability},
                          {"angles", out.angles},
                          {"element_distribution", to_std(out.element_distribution)}};
        rec["meter"] = to_json(out.meter);
        res.success = out.success_probability;
        res.t = static_cast<long>(iters);
        res.total_c = out.meter.check_units;
        break;
      }
      case Schema::quantum: {
        QuantumSetup q{chain, disc, build_walk(chain)};
        PhaseEstimationSpec spec{cfg.s, 1, cfg.mode, cfg.vote};
        SearchOutcome out = quantum_search(q, marked, spec, cfg.k, cfg.iters);
        ReflectionReport rr = reflection_error(q.walk, q.disc, out.spec, 0);
        bool hybrid = true;
        for (std::size_t i = 0; i < out.deviation_trace.size(); ++i)
          hybrid = hybrid && out.deviation_trace[i] <= static_cast<double>(i) * rr.max_error + 1e-10;
        inv.add("hybrid_bound", hybrid);
        inv.add("norm_preserved", out.max_norm_drift <= 1e-9);
        rec["spec"] = to_json(out.spec);
        rec["reflection_max_error"] = rr.max_error;
        rec["outcome"] = {{"iterations", out.iterations},
                          {"success_probability", out.success_probability},
                          {"angles", out.angles},
                          {"deviation_trace", out.deviation_trace},
                          {"element_distribution", to_std(out.element_distribution)}};
        rec["meter"] = to_json(out.meter);
        res.success = out.success_probability;
        res.t = static_cast<long>(out.iterations);
        res.total_u = out.meter.update_units;
        res.total_c = out.meter.check_units;
        break;
      }
      case Schema::recursive: {
        QuantumSetup q{chain, disc, build_walk(chain)};
        PhaseEstimationSpec spec{cfg.s, 1, cfg.mode, cfg.vote};
        RecursiveOutcome out = recursive_search(q, marked, cfg.gamma, spec, cfg.beta);
        bool identity = true;
        json cost;
        try {
          CostReport cr = cost_recursion_check(out.schedule, out.levels);
          cost["fitted_k"] = cr.fitted_k;
          cost["total_update_units"] = cr.total_update_units;
          cost["total_check_units"] = cr.total_check_units;
        } catch (const Error& e) {
          identity = false;
          cost["error"] = e.what();
        }
        inv.add("cost_recursion", identity);
        inv.add("projection_bound", out.projection >= 1.0 / std::sqrt(2.0) - cfg.gamma);
        inv.add("error_recursion", out.error_recursion_holds);
        inv.add("angle_bound", out.angle_bound_holds);
        inv.add("norm_preserved", out.outcome.max_norm_drift <= 1e-9);
        json levels = json::array();
        for (const auto& l : out.levels)
          levels.push_back({{"level", l.level},
                            {"sin_phi", l.sin_phi},
                            {"ideal_sin", l.ideal_sin},
                            {"e", l.e},
                            {"e_tilde", l.e_tilde},
                            {"bound", l.bound},
                            {"reflection_error", l.reflection_error},
                            {"cost", to_json(l.cost)},
                            {"level_cost", to_json(l.level_cost)}});
        rec["schedule"] = {{"t", out.schedule.t},
                           {"gamma", out.schedule.gamma},
                           {"beta_convention", to_string(out.schedule.convention)},
                           {"betas", out.schedule.betas},
                           {"s_list", out.schedule.s_list},
                           {"k_list", out.schedule.k_list}};
        rec["levels"] = levels;
        rec["cost"] = cost;
        rec["outcome"] = {{"projection", out.projection},
                          {"success_probability", out.outcome.success_probability},
                          {"element_distribution", to_std(out.outcome.element_distribution)}};
        rec["meter"] = to_json(out.outcome.meter);
        res.success = out.outcome.success_probability;
        res.t = out.schedule.t;
        res.total_u = out.outcome.meter.update_units;
        res.total_c = out.outcome.meter.check_units;
        break;
      }
      case Schema::reflect: {
        WalkOperator w = build_walk(chain);
        PhaseEstimationSpec spec{cfg.s, std::max(cfg.k, 1), cfg.mode, cfg.vote};
        ReflectionReport rr = reflection_error(w, disc, spec, 16, cfg.seed, cfg.k_max);
        inv.add("pi_fidelity", rr.pi_fidelity >= 1.0 - 1e-9);
        if (cfg.s == 0 && cfg.mode != ReflectionMode::exact)
          inv.add("zero_outcome_bound", rr.max_zero_probability <= 0.16);
        rec["spec"] = to_json(rr.spec);
        rec["max_error"] = rr.max_error;
        rec["pi_fidelity"] = rr.pi_fidelity;
        rec["max_zero_probability"] = rr.max_zero_probability;
        rec["fitted_c"] = std::isfinite(rr.fitted_c) ? json(rr.fitted_c) : json("inf");
        rec["ks"] = rr.ks;
        rec["errors_by_k"] = rr.errors_by_k;
        break;
      }
    }
  } catch (const Error& e) {
    res.failed = true;
    rec["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
  }
  rec["invariants"] = inv.j;
  res.invariants_ok = inv.ok;
  rec["ok"] = inv.ok && !res.failed;
  return res;
}

struct ExperimentResult {
  json document;    // one object per run under "runs"
  std::string csv;  // sweep table, or reflect-error table
  int exit_code = 0;  // 0 ok, 1 invariant failure, 2 module error
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult out;
  std::vector<ExperimentConfig> runs = cfg.sweep.empty() ? std::vector<ExperimentConfig>{cfg} : cfg.sweep;
  std::vector<RunResult> results(runs.size());
  parallel_for(runs.size(), [&](std::size_t i) { results[i] = run_single(runs[i]); });
  out.document = {{"runs", json::array()}};
  bool inv_ok = true, failed = false;
  for (auto& r : results) {
    out.document["runs"].push_back(r.record);
    inv_ok = inv_ok && r.invariants_ok;
    failed = failed || r.failed;
  }
  out.exit_code = failed ? 2 : (inv_ok ? 0 : 1);

  std::ostringstream csv;
  csv.imbue(std::locale::classic());
  if (!cfg.sweep.empty()) {
    csv << "epsilon,t,total_U,total_C,success\n";
    for (const auto& r : results)
      csv << format_double(r.epsilon) << ',' << r.t << ',' << r.total_u << ',' << r.total_c << ','
          << format_double(r.success) << '\n';
  } else if (cfg.schema == Schema::reflect && !results[0].failed) {
    const json& rec = results[0].record;
    csv << "k,max_error,fitted_c\n";
    const auto ks = rec.at("ks").get<std::vector<int>>();
    const auto errs = rec.at("errors_by_k").get<std::vector<double>>();
    const std::string c = rec.at("fitted_c").is_string() ? "inf" : format_double(rec.at("fitted_c").get<double>());
    for (std::size_t i = 0; i < ks.size(); ++i) csv << ks[i] << ',' << format_double(errs[i]) << ',' << c << '\n';
  }
  out.csv = csv.str();
  return out;
}

}  // namespace walklab
