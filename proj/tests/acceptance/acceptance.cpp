// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
//
// usage: eqgram_acceptance <eqgram binary> <source dir> <work dir> [criterion...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../oracles.hpp"
#include "eqgram/analytics.hpp"
#include "eqgram/benchmark.hpp"
#include "eqgram/chart_parser.hpp"
#include "eqgram/discovery.hpp"
#include "eqgram/fitting.hpp"
#include "eqgram/grammar.hpp"
#include "eqgram/sampler.hpp"

namespace fs = std::filesystem;
using namespace eqgram;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds
  std::function<Outcome()> run;
};

std::string cli;
fs::path source_dir;
fs::path work_dir;

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const std::vector<std::string> xy = {"x", "y"};

Outcome linear_coverage() {
  double worst = 0.0;
  for (int i = 1; i <= 9; ++i) {
    const double p = i / 10.0;
    const Pcfg g = linear_grammar(2, p);
    const auto table = coverage_table(g, 30);
    for (int h = 2; h <= 30; ++h)
      worst = std::max(worst, std::abs(table[g.start()][h] - (1.0 - std::pow(p, h - 1))));
  }
  return {worst <= 1e-12, fmt("max abs deviation %.3g", worst)};
}

Outcome linear_counts() {
  int mismatches = 0;
  for (int nv = 1; nv <= 3; ++nv) {
    const Pcfg g = linear_grammar(nv, 0.5);
    const CountTable table(g, 60);
    for (int h = 2; h <= 60; ++h) {
      const BigInt base = nv;
      const BigInt n = boost::multiprecision::pow(base, h - 1);
      const BigInt N = nv == 1 ? BigInt(h - 1) : (boost::multiprecision::pow(base, h) - 1) / (nv - 1) - 1;
      mismatches += table.exactly(g.start(), h) != n;
      mismatches += table.up_to(g.start(), h) != N;
      if (nv == 2) mismatches += table.up_to(g.start(), h) != (BigInt(1) << h) - 2;
    }
    mismatches += table.up_to(g.start(), 1) != 0;
  }
  return {mismatches == 0, fmt("%d mismatches over n_V=1..3, h<=60", mismatches)};
}

Outcome brute_force() {
  const Pcfg g = universal_grammar(xy);
  oracle::TreeEnumerator en(g);
  int mismatches = 0;
  double cov_error = 0.0;
  std::size_t total = 0;
  for (auto a : g.nonterminals()) {
    for (int h = 0; h <= 4; ++h) {
      const auto& trees = en.trees(a, h);
      BigInt exact = 0;
      double cov = 0.0;
      for (const auto& t : trees) {
        if (t.height == h) ++exact;
        cov += t.probability;
      }
      const auto counts = count_trees(g, a, h);
      mismatches += counts.exactly != exact;
      mismatches += counts.up_to != BigInt(trees.size());
      if (a == g.start() && h == 4) {
        cov_error = std::abs(coverage(g, a, h) - cov);
        total = trees.size();
      }
    }
  }
  return {mismatches == 0 && cov_error <= 1e-9,
          fmt("%d count mismatches, %zu trees from S at h<=4, |dCov(S,4)| = %.3g", mismatches, total, cov_error)};
}

Outcome sampler_law() {
  const double p = 0.5;
  const Pcfg g = linear_grammar(2, p);
  const std::size_t n = 100000;
  const auto batch = sample_many(g, n, 2024, kDefaultMaxExpansions, jobs());
  std::vector<std::size_t> freq(64, 0);
  double worst_rel = 0.0;
  for (const auto& s : batch.samples) {
    const int h = tree_height(s.tree);
    if (h < static_cast<int>(freq.size())) ++freq[h];
    const double reported = std::exp(s.log_probability);
    const double recomputed = tree_probability(s.tree, g).probability;
    worst_rel = std::max(worst_rel, std::abs(reported - recomputed) / recomputed);
  }
  double worst_z = 0.0;
  for (int h = 2; h <= 8; ++h) {
    const double q = std::pow(p, h - 2) * (1 - p);
    const double sd = std::sqrt(n * q * (1 - q));
    worst_z = std::max(worst_z, std::abs(static_cast<double>(freq[h]) - n * q) / sd);
  }
  return {batch.samples.size() == n && worst_z <= 3.0 && worst_rel <= 1e-12,
          fmt("max |z| = %.2f over h=2..8, max relative probability error %.2g", worst_z, worst_rel)};
}

Outcome geometric() {
  const double mean = oracle::simulated_trials_to_success(0.1, 10000, 15);
  const double expected = expected_samples_pcfg(0.1);
  return {std::abs(mean - expected) <= 0.05 * expected && expected == 10.0,
          fmt("empirical mean %.3f vs 1/p = %.3f", mean, expected)};
}

Outcome parse_fidelity() {
  const Pcfg g = linear_grammar(2, 0.5);
  const auto a = target_probability(g, "x+y");
  const auto b = target_probability(g, "x+y+y");
  return {a.probability == 0.0625 && b.probability == 0.015625 && a.height == 3 && b.height == 4,
          fmt("x+y: %.17g (h=%d), x+y+y: %.17g (h=%d)", a.probability, a.height, b.probability, b.height)};
}

Outcome round_trip() {
  const Pcfg uni = universal_grammar(xy);
  int below = 0;
  for (const auto& s : sample_many(uni, 1000, 77, kDefaultMaxExpansions, jobs()).samples) {
    const auto r = parse(uni, yield_symbols(s.tree));
    const double sampled = tree_probability(s.tree, uni).probability;
    if (r.trees.empty() || r.trees.front().probability < sampled - 1e-12) ++below;
  }
  const Pcfg lin = linear_grammar(2, 0.5);
  int different = 0;
  for (const auto& s : sample_many(lin, 1000, 78, kDefaultMaxExpansions, jobs()).samples) {
    const auto r = parse(lin, yield_symbols(s.tree));
    if (r.trees.size() != 1 || !(r.trees.front().tree == s.tree)) ++different;
  }
  return {below == 0 && different == 0,
          fmt("universal: %d of 1000 below the sampled probability; linear: %d of 1000 not node-identical", below,
              different)};
}

Outcome fitting() {
  struct Feature {
    const char* text;
    std::function<double(double, double)> f;
  };
  const std::vector<Feature> features = {
      {"x", [](double x, double) { return x; }},
      {"y", [](double, double y) { return y; }},
      {"x*y", [](double x, double y) { return x * y; }},
      {"sin(x)", [](double x, double) { return std::sin(x); }},
      {"cos(y)", [](double, double y) { return std::cos(y); }},
      {"x/y", [](double x, double y) { return x / y; }},
      {"exp(-x)", [](double x, double) { return std::exp(-x); }},
      {"sqrt(y)", [](double, double y) { return std::sqrt(y); }},
      {"x*x", [](double x, double) { return x * x; }},
  };
  RandomStream rng(8, 0);
  double worst = 0.0;
  int tasks = 0;
  while (tasks < 20) {
    // 1-3 distinct features plus an intercept.
    const int k = 1 + static_cast<int>(rng.below(3));
    std::vector<std::size_t> chosen;
    while (static_cast<int>(chosen.size()) < k) {
      const std::size_t f = rng.below(features.size());
      if (std::find(chosen.begin(), chosen.end(), f) == chosen.end()) chosen.push_back(f);
    }
    const int rows = 25;
    std::vector<double> x(rows), y(rows), v(rows);
    std::vector<std::vector<double>> basis(k + 1, std::vector<double>(rows));
    std::vector<double> coef(k + 1);
    for (auto& c : coef) c = rng.uniform(-3, 3);
    for (int r = 0; r < rows; ++r) {
      x[r] = rng.uniform(1, 5);
      y[r] = rng.uniform(1, 5);
      v[r] = coef[k] + rng.uniform(-0.2, 0.2);
      basis[k][r] = 1.0;
      for (int j = 0; j < k; ++j) {
        basis[j][r] = features[chosen[j]].f(x[r], y[r]);
        v[r] += coef[j] * basis[j][r];
      }
    }
    const auto ls = oracle::least_squares(basis, v);
    // The optimum must lie inside the default search box.
    if (std::any_of(ls.coefficients.begin(), ls.coefficients.end(), [](double c) { return std::abs(c) > 9.0; }))
      continue;
    std::string text;
    for (int j = 0; j < k; ++j) text += "C" + std::to_string(j) + "*" + features[chosen[j]].text + " + ";
    text += "C" + std::to_string(k);
    FitConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(tasks);
    const auto fit = fit_parameters(canonicalize(parse_expression(text)), Dataset({"x", "y", "v"}, {x, y, v}, "v"), cfg);
    worst = std::max(worst, std::abs(fit.error - ls.rermse) / ls.rermse);
    ++tasks;
  }
  // Single constant on non-constant data: the optimum is the mean.
  const std::vector<double> xs = {1, 2, 3, 4, 5};
  const std::vector<double> vs = {2.0, 3.5, 3.0, 4.25, 1.0};
  const double mean = (2.0 + 3.5 + 3.0 + 4.25 + 1.0) / 5.0;
  const auto c0 = fit_parameters(canonicalize(parse_expression("C0")), Dataset({"x", "v"}, {xs, vs}, "v"), FitConfig{});
  const double mean_error = std::abs(c0.params.at(0) - mean);
  return {worst <= 1e-6 && mean_error <= 1e-6,
          fmt("max relative ReRMSE gap to least squares %.2g over 20 tasks; |C0 - mean| = %.2g", worst, mean_error)};
}

Outcome reconstruction() {
  const Manifest m = load_manifest((source_dir / "data/manifests/easy.json").string());
  RunConfig cfg;
  cfg.grammar = GrammarSource::parse("uniform_universal");
  cfg.runs = 3;
  cfg.samples_factor = 10.0;
  cfg.jobs = jobs();
  cfg.discovery.seed = 1;
  const auto rep = run_benchmark(m, cfg).report;
  int solved = 0;
  std::string misses;
  for (const auto& t : rep.at("tasks")) {
    const int s = t.at("successes").get<int>();
    if (s >= 2) ++solved;
    else misses += " " + t.at("task_id").get<std::string>() + "(" + std::to_string(s) + "/3)";
  }
  std::size_t samples = 0;
  for (const auto& row : rep.at("rows")) samples += row.at("n_samples").get<std::size_t>();
  const int n_tasks = static_cast<int>(rep.at("tasks").size());
  return {n_tasks >= 10 && solved == n_tasks,
          fmt("%d/%d tasks solved in >=2 of 3 runs, %zu samples in total%s", solved, n_tasks, samples,
              misses.empty() ? "" : (";" + misses).c_str())};
}

Outcome biased_beats_uniform() {
  const Manifest m = load_manifest((source_dir / "data/manifests/feynman_subset.json").string());
  const auto table = emit_expected_vs_samples(m);
  const double fraction = table.at("fraction_biased_fewer").get<double>();
  const auto fewer = table.at("n_biased_fewer").get<int>();
  const auto parsed = table.at("n_parsed").get<int>();
  return {m.tasks.size() >= 20 && parsed == static_cast<int>(m.tasks.size()) && fraction >= 0.6,
          fmt("E_B[N] < E_U[N] for %d of %d targets (%.3f)", fewer, parsed, fraction)};
}

Outcome coverage_ordering() {
  const Pcfg uni = universal_grammar(xy);
  const Pcfg bia = universal_grammar(xy, BiasRatios::biased());
  const std::size_t n = 10000;
  bool ordered = true;
  bool in_band = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto pu = sample_candidates(uni, n, seed, kDefaultMaxExpansions, jobs());
    const auto pb = sample_candidates(bia, n, seed, kDefaultMaxExpansions, jobs());
    const double ratio = static_cast<double>(pu.candidates.size()) / static_cast<double>(n);
    ordered = ordered && pb.coverage_achieved > pu.coverage_achieved;
    in_band = in_band && ratio >= 0.20 && ratio <= 0.45;
    detail += fmt("%sseed %d: cov_B %.3f vs cov_U %.3f, N_unique/N %.3f", seed == 1 ? "" : "; ",
                  static_cast<int>(seed), pb.coverage_achieved, pu.coverage_achieved, ratio);
  }
  return {ordered && in_band, detail};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

Outcome determinism() {
  fs::remove_all(work_dir);
  fs::create_directories(work_dir);
  const std::string easy = (source_dir / "data/manifests/easy.json").string();
  const std::string csv = (source_dir / "data/examples/product.csv").string();
  const fs::path grammar_file = work_dir / "linear.grammar";
  std::ofstream(grammar_file) << render_grammar(linear_grammar(3, 0.4));

  struct Command {
    std::string name;
    std::string args;  // {out} is replaced by the output path
    std::vector<std::string> extra_outputs;
  };
  const std::vector<Command> commands = {
      {"sample", "--seed 5 sample --grammar uniform --vars x,y --n 300 --out {out}", {}},
      {"sample-file", "--seed 5 sample --grammar " + quote(grammar_file.string()) + " --n 300 --out {out}", {}},
      {"count", "count --grammar uniform --vars x,y --height 12 --out {out}", {}},
      {"coverage", "coverage --grammar biased --vars x,y --height 12 --out {out}", {}},
      {"parse-prob", "parse-prob --grammar linear --vars x,y --expr 'x+y+y' --out {out}", {}},
      {"expected", "expected --grammar uniform --vars x,y --expr 'x*y+c' --out {out}", {}},
      {"expected-deterministic", "expected --grammar uniform --vars x,y --expr 'x*y' --deterministic --out {out}", {}},
      {"expected-manifest", "expected --manifest " + quote(easy) + " --out {out}", {}},
      {"discover", "--seed 3 --jobs 2 discover --data " + quote(csv) + " --target f --n 800 --out {out}", {}},
      {"benchmark",
       "--seed 2 --jobs 2 benchmark --manifest " + quote(easy) + " --n 300 --runs 2 --out {out} --curves-dir {dir}",
       {"success_curve.csv", "ratio_curve.csv"}},
      {"resample", "--seed 4 resample {discover} --repeats 10 --out {out}", {}},
  };

  int mismatched = 0;
  int failed = 0;
  std::string notes;
  for (const auto& c : commands) {
    std::string outputs[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = work_dir / (c.name + "-" + std::to_string(rep));
      fs::create_directories(dir);
      const fs::path out = dir / "out";
      std::string args = c.args;
      auto replace = [&](const std::string& key, const std::string& value) {
        for (auto pos = args.find(key); pos != std::string::npos; pos = args.find(key))
          args.replace(pos, key.size(), value);
      };
      replace("{out}", quote(out.string()));
      replace("{dir}", quote(dir.string()));
      replace("{discover}", quote((work_dir / ("discover-" + std::to_string(rep)) / "out").string()));
      const std::string command = quote(cli) + " " + args + " > " + quote((dir / "stdout").string()) + " 2>&1";
      if (std::system(command.c_str()) != 0) {
        ++failed;
        notes += " " + c.name + " failed";
        break;
      }
      outputs[rep] = read_file(out);
      for (const auto& extra : c.extra_outputs) outputs[rep] += "\n--\n" + read_file(dir / extra);
    }
    if (outputs[0].empty() || outputs[0] != outputs[1]) {
      ++mismatched;
      notes += " " + c.name + " differs";
    }
  }
  return {mismatched == 0 && failed == 0,
          fmt("%zu commands run twice, %d differing, %d failing%s", commands.size(), mismatched, failed,
              notes.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 4) {
    std::cerr << "usage: " << argv[0] << " <eqgram binary> <source dir> <work dir> [criterion...]\n";
    return 2;
  }
  cli = argv[1];
  source_dir = argv[2];
  work_dir = argv[3];
  std::vector<int> only;
  for (int i = 4; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  const std::vector<Criterion> criteria = {
      {1, "linear-grammar coverage oracle", 1, linear_coverage},
      {2, "linear-grammar counting oracle", 1, linear_counts},
      {3, "brute-force enumeration equivalence", 60, brute_force},
      {4, "sampler height law", 30, sampler_law},
      {5, "geometric expectation", 5, geometric},
      {6, "parse probability fidelity", 1, parse_fidelity},
      {7, "parser round trip", 30, round_trip},
      {8, "fitting correctness", 60, fitting},
      {9, "end-to-end reconstruction on the easy manifest", 600, reconstruction},
      {10, "biased beats uniform in expected samples", 60, biased_beats_uniform},
      {11, "coverage ordering and uniqueness band", 300, coverage_ordering},
      {12, "determinism of every subcommand", 300, determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.time_limit;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << " [" << fmt("%.2f", seconds)
              << " s, limit " << c.time_limit << " s] " << o.detail << (in_time ? "" : " (too slow)") << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
