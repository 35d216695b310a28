#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "walklab/bench.hpp"

using namespace walklab;

namespace {

ChainSpec johnson(int m, int r) {
  ChainSpec s;
  s.family = ChainFamily::johnson;
  s.m = m;
  s.r = r;
  return s;
}

int binomial(int n, int k) {
  int r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST(Generate, JohnsonSmall) {
  auto g = generate(johnson(4, 2));
  EXPECT_EQ(g.chain.size(), 6u);
  for (std::size_t x = 0; x < 6; ++x) {
    int nb = 0;
    for (std::size_t y = 0; y < 6; ++y)
      if (g.chain(x, y) > 0) {
        ++nb;
        EXPECT_NEAR(g.chain(x, y), 0.25, 1e-15);
        EXPECT_EQ(__builtin_popcountll(g.subsets[x] ^ g.subsets[y]), 2);
      }
    EXPECT_EQ(nb, 4);
  }
}

TEST(Generate, JohnsonEigenvalues) {
  // J(m, r) walk eigenvalues: 1 - j(m + 1 - j) / (r (m - r)), j = 0..r.
  auto g = generate(johnson(8, 4));
  EXPECT_EQ(g.chain.size(), 70u);
  CVector ev = chain_eigenvalues(g.chain);
  std::vector<double> got;
  for (Eigen::Index i = 0; i < ev.size(); ++i) got.push_back(ev[i].real());
  std::sort(got.begin(), got.end());
  std::vector<double> want;
  for (int j = 0; j <= 4; ++j) {
    int mult = binomial(8, j) - (j > 0 ? binomial(8, j - 1) : 0);
    for (int c = 0; c < mult; ++c) want.push_back(1.0 - j * (9.0 - j) / 16.0);
  }
  std::sort(want.begin(), want.end());
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
  EXPECT_NEAR(eigenvalue_gap(g.chain), 0.5, 1e-9);
}

TEST(Generate, JohnsonGapScalesWithR) {
  for (int r = 2; r <= 5; ++r) {
    auto g = generate(johnson(2 * r, r));
    EXPECT_GE(eigenvalue_gap(g.chain) * r, 0.5) << r;
  }
}

TEST(Generate, Families) {
  ChainSpec c;
  c.family = ChainFamily::complete;
  c.n = 10;
  EXPECT_NEAR(eigenvalue_gap(generate(c).chain), 1.0, 1e-10);

  ChainSpec t;
  t.family = ChainFamily::torus2d;
  t.n = 4;
  t.n2 = 5;
  auto torus = generate(t).chain;
  EXPECT_EQ(torus.size(), 20u);
  EXPECT_TRUE(torus.flags().reversible);

  ChainSpec lazy;
  lazy.family = ChainFamily::cycle_lazy;
  lazy.n = 6;
  lazy.alpha = 0.3;
  auto lc = generate(lazy).chain;
  EXPECT_NEAR(lc(2, 2), 0.3, 1e-15);
  EXPECT_NEAR(lc(2, 3), 0.7, 1e-15);
  EXPECT_EQ(check_unit_multiplicity(build_discriminant(lc), lc), 1);

  ChainSpec rr;
  rr.family = ChainFamily::random_reversible;
  rr.n = 7;
  rr.seed = 3;
  auto a = generate(rr).chain, b = generate(rr).chain;
  EXPECT_EQ(a.transition(), b.transition());
  EXPECT_TRUE(a.flags().reversible);
  EXPECT_TRUE(a.flags().has_self_loops);

  ChainSpec bad;
  bad.family = ChainFamily::johnson;
  bad.m = 3;
  bad.r = 4;
  try {
    generate(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::param_error);
  }
}

TEST(Generate, FileFormats) {
  const std::string csv = testing::TempDir() + "walklab_chain.csv";
  const std::string js = testing::TempDir() + "walklab_chain.json";
  {
    std::ofstream(csv) << "# two-state\n0.9,0.1\n0.2,0.8\n";
    std::ofstream(js) << R"({"P": [[0.5, 0.5], [0.5, 0.5]]})";
  }
  auto a = generate(parse_chain_spec("file:" + csv)).chain;
  EXPECT_NEAR(a.stationary()[0], 2.0 / 3.0, 1e-12);
  auto b = generate(parse_chain_spec("file:" + js)).chain;
  EXPECT_NEAR(b.stationary()[1], 0.5, 1e-12);
  EXPECT_THROW(generate(parse_chain_spec("file:/nonexistent/x.csv")), Error);
  std::remove(csv.c_str());
  std::remove(js.c_str());
}

TEST(Parse, ChainSpecs) {
  EXPECT_EQ(parse_chain_spec("complete:16").n, 16);
  auto j = parse_chain_spec("johnson:8:4");
  EXPECT_EQ(j.m, 8);
  EXPECT_EQ(j.r, 4);
  auto t = parse_chain_spec("torus2d:3x4");
  EXPECT_EQ(t.n, 3);
  EXPECT_EQ(t.n2, 4);
  auto r = parse_chain_spec("random_reversible:6:9:0.25");
  EXPECT_EQ(r.seed, 9u);
  EXPECT_DOUBLE_EQ(r.alpha, 0.25);
  EXPECT_THROW(parse_chain_spec("petersen:10"), Error);
  EXPECT_THROW(parse_chain_spec("complete:abc"), Error);
  EXPECT_THROW(parse_chain_spec("johnson:8"), Error);
}

TEST(Parse, MarkedRules) {
  auto g = generate(johnson(8, 4));
  auto m = apply_marked_rule(g, parse_marked_rule("contains:0,1"));
  EXPECT_EQ(m.members.size(), 15u);
  EXPECT_NEAR(m.epsilon, 15.0 / 70.0, 1e-12);
  EXPECT_TRUE(parse_marked_rule("none").states.empty());
  EXPECT_EQ(parse_marked_rule("1,4").states.size(), 2u);
  ChainSpec c;
  c.n = 4;
  EXPECT_THROW(apply_marked_rule(generate(c), parse_marked_rule("contains:0")), Error);
}

TEST(Experiment, GroverConfig) {
  auto cfg = config_from_json(json::parse(R"({"chain": "complete:16", "marked": [0], "schema": "grover"})"));
  auto res = run_experiment(cfg);
  EXPECT_EQ(res.exit_code, 0);
  const auto& run = res.document["runs"][0];
  EXPECT_EQ(run["outcome"]["iterations"], 3);
  EXPECT_NEAR(run["outcome"]["success_probability"].get<double>(), 0.9613, 1e-4);
}

TEST(Experiment, DegenerateSpectrumReported) {
  auto cfg = config_from_json(json::parse(R"({"chain": {"family": "cycle_directed", "n": 8}, "schema": "spectrum"})"));
  auto res = run_experiment(cfg);
  EXPECT_EQ(res.exit_code, 2);
  const auto& run = res.document["runs"][0];
  EXPECT_EQ(run["error"]["kind"], "DegenerateSpectrum");
  EXPECT_EQ(run["spectral"]["unit_multiplicity"], 8);
}

TEST(Experiment, DeterministicOutput) {
  auto cfg = config_from_json(json::parse(
      R"({"chain": "random_reversible:5:4", "marked": [1], "schema": "classical1", "trials": 300, "seed": 11})"));
  auto a = run_experiment(cfg).document.dump();
  auto b = run_experiment(cfg).document.dump();
  EXPECT_EQ(a, b);
}

TEST(Experiment, RecursiveSweepCsv) {
  auto cfg = config_from_json(json::parse(
      R"({"schema": "recursive", "gamma": 0.1, "mode": "spectral", "sweep": {"epsilons": [0.25, 0.0625]}})"));
  ASSERT_EQ(cfg.sweep.size(), 2u);
  auto res = run_experiment(cfg);
  EXPECT_EQ(res.exit_code, 0) << res.document.dump(2);
  std::istringstream is(res.csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "epsilon,t,total_U,total_C,success");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST(Experiment, ReflectCsv) {
  auto cfg = config_from_json(json::parse(R"({"chain": "random_reversible:5:2", "schema": "reflect", "k_max": 4})"));
  auto res = run_experiment(cfg);
  EXPECT_EQ(res.exit_code, 0);
  EXPECT_EQ(res.csv.substr(0, 19), "k,max_error,fitted_");
}

TEST(Experiment, BadConfig) {
  EXPECT_THROW(config_from_json(json::parse(R"({"schema": "teleport"})")), Error);
  EXPECT_THROW(config_from_json(json::parse(R"({"chain": {"n": 4}})")), Error);
  EXPECT_THROW(load_config("/nonexistent/config.json"), Error);
}
