#include "eqgram/discovery.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "eqgram/random.hpp"

namespace eqgram {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Runs body(i) for i in [0, n) on up to `jobs` threads.
template <class Body>
void parallel_for(std::size_t n, unsigned jobs, Body body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> threads;
  std::vector<std::exception_ptr> errors(jobs);
  for (unsigned w = 0; w < jobs; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  }
  threads.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

void check_grammar_for_dataset(const Pcfg& g, const Dataset& d) {
  if (g.find(d.target(), SymbolKind::terminal))
    throw DiscoveryError("grammar has a terminal named after the target variable '" + d.target() + "'");
}

CandidatePool sample_candidates(const Pcfg& g, std::size_t n_samples, std::uint64_t seed,
                                std::size_t max_expansions, unsigned jobs) {
  CandidatePool pool;
  if (n_samples == 0) return pool;
  SampleBatch batch = sample_many(g, n_samples, seed, max_expansions, jobs);
  pool.n_raw_samples = batch.samples.size();
  pool.n_discarded = batch.discarded;

  std::vector<CanonicalForm> forms(batch.samples.size());
  std::vector<std::string> signatures(batch.samples.size());
  parallel_for(batch.samples.size(), jobs, [&](std::size_t i) {
    forms[i] = canonicalize(tree_to_expression(batch.samples[i].tree, g));
    signatures[i] = tree_signature(batch.samples[i].tree);
  });

  std::unordered_map<std::string, std::size_t> by_key;
  std::unordered_set<std::string> seen_trees;
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const auto& s = batch.samples[i];
    pool.max_height = std::max(pool.max_height, tree_height(s.tree));
    auto [it, inserted] = by_key.try_emplace(forms[i].key, pool.candidates.size());
    if (inserted) {
      CandidateEquation c;
      c.key = forms[i].key;
      c.expr = forms[i].expr;
      c.n_parameters = forms[i].n_parameters;
      pool.candidates.push_back(std::move(c));
    }
    CandidateEquation& c = pool.candidates[it->second];
    ++c.sample_multiplicity;
    if (seen_trees.insert(signatures[i]).second) {
      const double p = std::exp(s.log_probability);
      c.generation_probability += p;
      pool.coverage_achieved += p;
    }
  }
  pool.n_distinct_trees = seen_trees.size();
  return pool;
}

DiscoveryResult mc_gbed(const Pcfg& g, const Dataset& d, const DiscoveryConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (cfg.max_parameters < 0) throw std::invalid_argument("max_parameters must be non-negative");
  if (!(cfg.success_threshold >= 0.0)) throw std::invalid_argument("success_threshold must be non-negative");
  cfg.fit.check();
  check_grammar_for_dataset(g, d);

  CandidatePool pool = sample_candidates(g, cfg.n_samples, cfg.seed, cfg.max_expansions, cfg.jobs);
  DiscoveryResult result;
  result.n_raw_samples = pool.n_raw_samples;
  result.n_discarded = pool.n_discarded;
  result.n_distinct_trees = pool.n_distinct_trees;
  result.coverage_achieved = pool.coverage_achieved;
  result.max_height = pool.max_height;
  result.n_unique = pool.candidates.size();

  // Fail early on a variable the dataset does not provide.
  for (const auto& c : pool.candidates)
    for (const auto& v : variable_names(c.expr))
      if (std::find(d.inputs().begin(), d.inputs().end(), v) == d.inputs().end())
        throw DiscoveryError("grammar variable '" + v + "' is not a dataset input column");

  parallel_for(pool.candidates.size(), cfg.jobs, [&](std::size_t i) {
    CandidateEquation& c = pool.candidates[i];
    if (c.n_parameters > cfg.max_parameters) {
      c.admissible = false;
      c.error = kInf;
      return;
    }
    FitConfig fit = cfg.fit;
    fit.seed = derive_key(cfg.fit.seed, fnv1a(c.key.data(), c.key.size()));
    const FitResult r = fit_parameters(CanonicalForm{c.expr, c.key, c.n_parameters}, d, fit);
    c.params = r.params;
    c.error = std::isfinite(r.error) ? r.error : kInf;
    c.converged = r.converged;
  });

  result.candidates = std::move(pool.candidates);
  std::sort(result.candidates.begin(), result.candidates.end(), [](const auto& a, const auto& b) {
    if (a.error != b.error) return a.error < b.error;
    if (a.generation_probability != b.generation_probability)
      return a.generation_probability > b.generation_probability;
    return a.key < b.key;
  });
  result.success = std::any_of(result.candidates.begin(), result.candidates.end(),
                               [&](const auto& c) { return c.error < cfg.success_threshold; });
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<double> resample_success_curve(const std::vector<std::vector<ScoredCandidate>>& tasks, int repeats,
                                           std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("repeats must be at least 1");
  std::size_t longest = 0;
  for (const auto& t : tasks) {
    longest = std::max(longest, t.size());
    for (const auto& c : t)
      if (!(c.probability >= 0.0) || !std::isfinite(c.probability))
        throw std::invalid_argument("candidate probabilities must be finite and non-negative");
  }
  std::vector<double> curve(longest, 0.0);
  if (tasks.empty() || longest == 0) return curve;

  // Sorting by log(u)/w descending is equivalent to drawing without
  // replacement with probability proportional to w at every step.
  std::vector<double> hits(longest + 1, 0.0);
  for (int rep = 0; rep < repeats; ++rep) {
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      RandomStream rng(seed, t, static_cast<std::uint64_t>(rep));
      const auto& cands = tasks[t];
      std::vector<std::pair<double, std::size_t>> keys;
      keys.reserve(cands.size());
      for (std::size_t i = 0; i < cands.size(); ++i) {
        double u = rng.uniform();
        while (u == 0.0) u = rng.uniform();
        // Probabilities that underflowed to zero sort last.
        const double w = cands[i].probability;
        keys.emplace_back(w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity(), i);
      }
      std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      for (std::size_t pos = 0; pos < keys.size(); ++pos) {
        if (cands[keys[pos].second].success) {
          hits[pos] += 1.0;  // successful from prefix size pos+1 onwards
          break;
        }
      }
    }
  }
  double running = 0.0;
  const double denom = static_cast<double>(repeats) * static_cast<double>(tasks.size());
  for (std::size_t n = 0; n < longest; ++n) {
    running += hits[n];
    curve[n] = running / denom;
  }
  return curve;
}

nlohmann::json run_report(const DiscoveryResult& r, const RunContext& ctx) {
  nlohmann::json row;
  row["task_id"] = ctx.task_id;
  row["run"] = ctx.run;
  row["grammar"] = ctx.grammar;
  row["target_probability"] = ctx.target_probability ? finite_or_null(*ctx.target_probability) : nullptr;
  row["target_height"] = ctx.target_height ? nlohmann::json(*ctx.target_height) : nlohmann::json(nullptr);
  row["success"] = r.success ? 1 : 0;
  row["n_raw_samples"] = r.n_raw_samples;
  row["n_unique"] = r.n_unique;
  row["n_unique_thousands"] = static_cast<double>(r.n_unique) / 1000.0;
  row["n_discarded"] = r.n_discarded;
  row["coverage"] = r.coverage_achieved;
  const CandidateEquation* best = r.best();
  row["best_key"] = best ? nlohmann::json(best->key) : nlohmann::json(nullptr);
  row["best_error"] = best ? finite_or_null(best->error) : nlohmann::json(nullptr);
  row["best_params"] = best ? nlohmann::json(best->params) : nlohmann::json::array();
  return row;
}

nlohmann::json result_to_json(const DiscoveryResult& r, const DiscoveryConfig& cfg) {
  nlohmann::json j;
  j["n_samples"] = cfg.n_samples;
  j["seed"] = cfg.seed;
  j["success_threshold"] = cfg.success_threshold;
  j["max_parameters"] = cfg.max_parameters;
  j["n_raw_samples"] = r.n_raw_samples;
  j["n_unique"] = r.n_unique;
  j["n_discarded"] = r.n_discarded;
  j["n_distinct_trees"] = r.n_distinct_trees;
  j["coverage"] = r.coverage_achieved;
  j["max_height"] = r.max_height;
  j["success"] = r.success;
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : r.candidates) {
    nlohmann::json row;
    row["key"] = c.key;
    row["n_parameters"] = c.n_parameters;
    row["params"] = c.params;
    row["error"] = finite_or_null(c.error);
    row["generation_probability"] = c.generation_probability;
    row["sample_multiplicity"] = c.sample_multiplicity;
    row["admissible"] = c.admissible;
    cands.push_back(std::move(row));
  }
  j["candidates"] = std::move(cands);
  return j;
}

std::vector<ScoredCandidate> candidates_from_json(const nlohmann::json& j) {
  const double threshold = j.value("success_threshold", 1e-9);
  std::vector<ScoredCandidate> out;
  for (const auto& c : j.at("candidates")) {
    ScoredCandidate s;
    s.probability = c.at("generation_probability").get<double>();
    const auto& e = c.at("error");
    s.success = !e.is_null() && e.get<double>() < threshold;
    out.push_back(s);
  }
  return out;
}

}  // namespace eqgram
