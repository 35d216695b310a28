#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "walklab/bench.hpp"

using namespace walklab;

namespace {

struct Overrides {
  std::string config, chain, marked, mode, vote, beta, out, csv;
  std::optional<double> gamma;
  std::optional<int> k, s, k_max, algorithm;
  std::optional<long> iters;
  std::optional<std::int64_t> t1, t2;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  bool walk_phases = false, ideal = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON experiment config");
  app->add_option("--chain", o.chain, "chain spec, e.g. complete:16, johnson:8:4");
  app->add_option("--marked", o.marked, "marked states: 0,3 | contains:0,1 | none");
  app->add_option("--mode", o.mode, "reflection mode: exact | spectral | circuit");
  app->add_option("--vote", o.vote, "round vote rule: any_nonzero | majority");
  app->add_option("--gamma", o.gamma, "recursion accuracy parameter");
  app->add_option("--k", o.k, "phase estimation rounds (0 = default)");
  app->add_option("--s", o.s, "bits per round (0 = auto)");
  app->add_option("--iters", o.iters, "iterations (-1 = default)");
  app->add_option("--seed", o.seed, "base seed");
  app->add_option("--out", o.out, "write JSON here (CSV goes next to it)");
  app->add_option("--csv", o.csv, "write the CSV table here");
}

ExperimentConfig build_config(const Overrides& o, std::optional<Schema> schema) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  auto apply = [&](ExperimentConfig& c) {
    if (!o.chain.empty()) c.chain = parse_chain_spec(o.chain);
    if (!o.marked.empty()) c.marked = parse_marked_rule(o.marked);
    if (!o.mode.empty()) c.mode = parse_mode(o.mode);
    if (!o.vote.empty()) c.vote = parse_vote(o.vote);
    if (!o.beta.empty()) c.beta = parse_beta(o.beta);
    if (o.gamma) c.gamma = *o.gamma;
    if (o.k) c.k = *o.k;
    if (o.s) c.s = *o.s;
    if (o.k_max) c.k_max = *o.k_max;
    if (o.iters) c.iters = *o.iters;
    if (o.t1) c.t1 = *o.t1;
    if (o.t2) c.t2 = *o.t2;
    if (o.trials) c.trials = *o.trials;
    if (o.seed) c.seed = *o.seed;
    if (o.walk_phases) c.walk_phases = true;
    if (schema) c.schema = *schema;
  };
  apply(cfg);
  for (auto& run : cfg.sweep) apply(run);
  if (!o.out.empty()) cfg.output = o.out;
  return cfg;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io_error, "cannot write " + path);
  f << body;
}

int emit(const ExperimentResult& res, const ExperimentConfig& cfg, const Overrides& o, bool csv_primary) {
  const std::string doc = res.document.dump(2) + "\n";
  std::string csv_path = o.csv;
  if (!cfg.output.empty()) {
    write_file(cfg.output, doc);
    if (csv_path.empty() && !res.csv.empty())
      csv_path = std::filesystem::path(cfg.output).replace_extension(".csv").string();
  } else if (!(csv_primary && !res.csv.empty())) {
    std::cout << doc;
  }
  if (!res.csv.empty()) {
    if (!csv_path.empty())
      write_file(csv_path, res.csv);
    else if (cfg.output.empty() && csv_primary)
      std::cout << res.csv;
  }
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"walklab: Markov chain quantum walk search laboratory"};
  app.require_subcommand(1);
  Overrides o;

  auto* spectrum = app.add_subcommand("spectrum", "singular values, gaps and (optionally) walk eigenphases");
  add_common(spectrum, o);
  spectrum->add_flag("--walk-phases", o.walk_phases, "include eigenphases of W on A+B");

  auto* classical = app.add_subcommand("classical", "classical search baselines");
  add_common(classical, o);
  classical->add_option("--algorithm", o.algorithm, "1 or 2")->check(CLI::IsMember({1, 2}));
  classical->add_option("--t1", o.t1, "walk steps per round (algorithm 1)");
  classical->add_option("--t2", o.t2, "round budget");
  classical->add_option("--trials", o.trials, "independent runs");

  auto* search = app.add_subcommand("search", "quantum search with approximate reflections");
  add_common(search, o);
  search->add_flag("--ideal", o.ideal, "run the exact Grover rotation instead");

  auto* recursive = app.add_subcommand("recursive-search", "recursive amplitude amplification");
  add_common(recursive, o);
  recursive->add_option("--beta", o.beta, "beta convention: pi3 | pi2");

  auto* reflect = app.add_subcommand("reflect-error", "reflection error versus k (CSV)");
  add_common(reflect, o);
  reflect->add_option("--k-max", o.k_max, "largest k in the table");

  auto* sweep = app.add_subcommand("sweep", "run the config's sweep (CSV)");
  add_common(sweep, o);
  sweep->add_option("--beta", o.beta, "beta convention: pi3 | pi2");

  CLI11_PARSE(app, argc, argv);

  try {
    std::optional<Schema> schema;
    bool csv_primary = false;
    if (spectrum->parsed()) {
      schema = Schema::spectrum;
    } else if (classical->parsed()) {
      schema = Schema::classical1;
      if (o.algorithm) {
        schema = *o.algorithm == 2 ? Schema::classical2 : Schema::classical1;
      } else if (!o.config.empty()) {
        auto s = load_config(o.config).schema;
        if (s == Schema::classical2) schema = s;
      }
    } else if (search->parsed()) {
      schema = o.ideal ? Schema::grover : Schema::quantum;
      if (!o.ideal && !o.config.empty() && load_config(o.config).schema == Schema::grover) schema = Schema::grover;
    } else if (recursive->parsed()) {
      schema = Schema::recursive;
    } else if (reflect->parsed()) {
      schema = Schema::reflect;
      csv_primary = true;
    } else {
      csv_primary = true;
    }
    ExperimentConfig cfg = build_config(o, schema);
    if (sweep->parsed() && cfg.sweep.empty())
      throw Error(ErrorKind::param_error, "sweep needs a config with a 'sweep' section");
    ExperimentResult res = run_experiment(cfg);
    return emit(res, cfg, o, csv_primary);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}
