#include "eqgram/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "eqgram/random.hpp"

namespace eqgram {

namespace {

using nlohmann::json;

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

template <class Body>
void parallel_for(std::size_t n, unsigned jobs, Body body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  {
    std::vector<std::jthread> threads;
    for (unsigned w = 0; w < jobs; ++w)
      threads.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = n;
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<std::string> variable_list(const BenchmarkTask& task) {
  std::vector<std::string> names;
  for (const auto& v : task.variables) names.push_back(v.name);
  return names;
}

}  // namespace

void BenchmarkTask::check() const {
  if (id.empty()) throw BenchmarkError("task without an id");
  if (n_rows < 2) throw BenchmarkError("task '" + id + "': n_rows must be at least 2");
  if (n_samples && *n_samples == 0) throw BenchmarkError("task '" + id + "': n_samples must be positive");
  std::set<std::string> names;
  for (const auto& v : variables) {
    if (!(std::isfinite(v.low) && std::isfinite(v.high) && v.low < v.high))
      throw BenchmarkError("task '" + id + "': variable '" + v.name + "' has a degenerate range");
    if (!names.insert(v.name).second)
      throw BenchmarkError("task '" + id + "': variable '" + v.name + "' listed twice");
  }
  Expression e;
  try {
    e = task_expression(*this);
  } catch (const std::exception& ex) {
    throw BenchmarkError("task '" + id + "': target does not parse: " + ex.what());
  }
  for (const auto& v : variable_names(e))
    if (!names.count(v)) throw BenchmarkError("task '" + id + "': variable '" + v + "' has no range");
}

Manifest parse_manifest(const json& j) {
  Manifest m;
  try {
    m.name = j.value("name", std::string("manifest"));
    m.target_name = j.value("target_name", std::string("f"));
    const auto defaults = j.value("defaults", json::object());
    for (const auto& t : j.at("tasks")) {
      BenchmarkTask task;
      task.id = t.at("id").get<std::string>();
      task.target_expression = t.at("target").get<std::string>();
      task.n_rows = t.value("n_rows", defaults.value("n_rows", 20));
      task.data_seed = t.value("data_seed", defaults.value("data_seed", std::uint64_t{0}));
      if (t.contains("n_samples")) task.n_samples = t.at("n_samples").get<std::size_t>();
      const double low = defaults.value("low", 1.0), high = defaults.value("high", 5.0);
      if (t.contains("variables")) {
        for (const auto& v : t.at("variables")) {
          if (v.is_string()) {
            task.variables.push_back({v.get<std::string>(), low, high});
          } else {
            task.variables.push_back(
                {v.at("name").get<std::string>(), v.value("low", low), v.value("high", high)});
          }
        }
      } else {
        for (const auto& name : variable_names(task_expression(task)))
          task.variables.push_back({name, low, high});
      }
      m.tasks.push_back(std::move(task));
    }
  } catch (const json::exception& ex) {
    throw BenchmarkError(std::string("malformed manifest: ") + ex.what());
  }
  if (m.tasks.empty()) throw BenchmarkError("manifest has no tasks");
  std::set<std::string> ids;
  for (const auto& t : m.tasks)
    if (!ids.insert(t.id).second) throw BenchmarkError("duplicate task id '" + t.id + "'");
  return m;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BenchmarkError("cannot open manifest '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw BenchmarkError("manifest '" + path + "' is not valid JSON: " + ex.what());
  }
  return parse_manifest(j);
}

Expression task_expression(const BenchmarkTask& task) {
  return substitute(parse_expression(task.target_expression), {{"pi", Number::real(std::numbers::pi)}});
}

Dataset generate_dataset(const BenchmarkTask& task, const std::string& target_name) {
  task.check();
  for (const auto& v : task.variables)
    if (v.name == target_name) throw BenchmarkError("task '" + task.id + "': variable named like the target");
  const Expression e = task_expression(task);
  const std::size_t rows = static_cast<std::size_t>(task.n_rows);
  const std::size_t budget = 100 * rows;
  std::vector<std::vector<double>> columns(task.variables.size() + 1);
  RandomStream rng(task.data_seed, 0xda7a);
  std::map<std::string, double> bindings;
  std::size_t draws = 0;
  while (columns.back().size() < rows) {
    if (draws++ == budget)
      throw BenchmarkError("task '" + task.id + "': target is non-finite on too much of the sampling range");
    for (const auto& v : task.variables) bindings[v.name] = rng.uniform(v.low, v.high);
    const double value = evaluate(e, bindings, {});
    if (!std::isfinite(value)) continue;
    for (std::size_t i = 0; i < task.variables.size(); ++i) columns[i].push_back(bindings[task.variables[i].name]);
    columns.back().push_back(value);
  }
  auto names = variable_list(task);
  names.push_back(target_name);
  return Dataset(std::move(names), std::move(columns), target_name);
}

Dataset read_csv(std::istream& in, const std::string& target) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> names;
  while (names.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) names = split_csv_line(line);
  }
  if (names.empty()) throw DatasetError("CSV has no header row");
  for (const auto& n : names)
    if (n.empty()) throw DatasetError("CSV header has an empty column name");
  std::vector<std::vector<double>> columns(names.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != names.size())
      throw DatasetError("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                         " fields, expected " + std::to_string(names.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const char* begin = cells[c].data();
      const char* end = begin + cells[c].size();
      if (!cells[c].empty() && *begin == '+') ++begin;
      auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr != end)
        throw DatasetError("CSV line " + std::to_string(line_no) + ": '" + cells[c] + "' is not a number");
      columns[c].push_back(v);
    }
  }
  return Dataset(std::move(names), std::move(columns), target);
}

Dataset load_csv(const std::string& path, const std::string& target) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open data file '" + path + "'");
  return read_csv(in, target);
}

void write_csv(std::ostream& out, const Dataset& d) {
  for (std::size_t c = 0; c < d.names().size(); ++c) out << (c ? "," : "") << d.names()[c];
  out << '\n';
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.names().size(); ++c) out << (c ? "," : "") << format_double(d.column(c)[r]);
    out << '\n';
  }
}

std::string GrammarSource::name() const {
  if (!path.empty()) return path;
  switch (builtin) {
    case BuiltinGrammar::uniform_universal: return "uniform_universal";
    case BuiltinGrammar::biased_universal: return "biased_universal";
    case BuiltinGrammar::linear: return "linear";
  }
  return "";
}

GrammarSource GrammarSource::parse(const std::string& text) {
  GrammarSource s;
  if (text == "uniform_universal" || text == "uniform") s.builtin = BuiltinGrammar::uniform_universal;
  else if (text == "biased_universal" || text == "biased") s.builtin = BuiltinGrammar::biased_universal;
  else if (text == "linear") s.builtin = BuiltinGrammar::linear;
  else s.path = text;
  return s;
}

Pcfg make_grammar(const GrammarSource& source, std::span<const std::string> variables) {
  if (!source.path.empty()) return load_grammar_file(source.path);
  switch (source.builtin) {
    case BuiltinGrammar::uniform_universal: return universal_grammar(variables, BiasRatios::uniform());
    case BuiltinGrammar::biased_universal: return universal_grammar(variables, BiasRatios::biased());
    case BuiltinGrammar::linear: return linear_grammar(variables, 0.5);
  }
  throw std::logic_error("unknown builtin grammar");
}

std::string task_surface(const BenchmarkTask& task) {
  return grammar_surface(canonicalize(task_expression(task), {.expand_products = false}).expr);
}

void RunConfig::check() const {
  if (runs < 1) throw std::invalid_argument("runs must be at least 1");
  if (!(samples_factor >= 0.0)) throw std::invalid_argument("samples_factor must be non-negative");
  if (max_samples == 0) throw std::invalid_argument("max_samples must be positive");
  if (resample_repeats < 1) throw std::invalid_argument("resample_repeats must be at least 1");
  if (top_k < 1) throw std::invalid_argument("top_k must be at least 1");
  for (double n : curve_grid)
    if (!(n >= 1.0)) throw std::invalid_argument("curve grid values must be at least 1");
  discovery.fit.check();
}

std::vector<double> log_grid(double limit) {
  std::vector<double> grid;
  constexpr double steps[] = {1.0, 2.0, 5.0};
  for (double decade = 1.0; decade <= 1e15; decade *= 10.0) {
    for (double s : steps) {
      grid.push_back(s * decade);
      if (s * decade >= limit) return grid;
    }
  }
  return grid;
}

namespace {

struct TaskPrep {
  std::optional<std::string> error;
  std::optional<Dataset> data;
  std::optional<Pcfg> grammar;
  std::string surface;
  std::optional<double> p_uniform, p_biased, p_run;
  std::optional<int> h_uniform, h_biased, h_run;
};

struct UnitResult {
  std::optional<std::string> error;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  DiscoveryResult result;
};

TaskPrep prepare(const BenchmarkTask& task, const Manifest& manifest, const RunConfig& cfg) {
  TaskPrep prep;
  try {
    task.check();
    prep.data = generate_dataset(task, manifest.target_name);
    const auto vars = variable_list(task);
    prep.grammar = make_grammar(cfg.grammar, vars);
    prep.surface = task_surface(task);
    auto probe = [&](const Pcfg& g, std::optional<double>& p, std::optional<int>& h) {
      try {
        const auto t = target_probability(g, prep.surface, cfg.top_k);
        p = t.probability;
        h = t.height;
      } catch (const NotInLanguageError&) {
      } catch (const TokenizeError&) {
      }
    };
    probe(universal_grammar(vars, BiasRatios::uniform()), prep.p_uniform, prep.h_uniform);
    probe(universal_grammar(vars, BiasRatios::biased()), prep.p_biased, prep.h_biased);
    probe(*prep.grammar, prep.p_run, prep.h_run);
  } catch (const std::exception& ex) {
    prep.error = ex.what();
  }
  return prep;
}

}  // namespace

BenchmarkReport run_benchmark(const Manifest& manifest, const RunConfig& cfg) {
  if (manifest.tasks.empty()) throw BenchmarkError("manifest has no tasks");
  cfg.check();
  const std::size_t n_tasks = manifest.tasks.size();
  const std::size_t runs = static_cast<std::size_t>(cfg.runs);

  std::vector<TaskPrep> preps(n_tasks);
  parallel_for(n_tasks, cfg.jobs, [&](std::size_t t) { preps[t] = prepare(manifest.tasks[t], manifest, cfg); });

  const std::size_t n_units = n_tasks * runs;
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(n_units)));
  std::vector<UnitResult> units(n_units);
  parallel_for(n_units, workers, [&](std::size_t u) {
    const std::size_t t = u / runs, run = u % runs;
    const BenchmarkTask& task = manifest.tasks[t];
    const TaskPrep& prep = preps[t];
    UnitResult& out = units[u];
    out.seed = derive_key(cfg.discovery.seed, fnv1a(task.id.data(), task.id.size()), run);
    if (prep.error) {
      out.error = prep.error;
      return;
    }
    if (task.n_samples) {
      out.n_samples = *task.n_samples;
    } else if (cfg.samples_factor > 0.0) {
      if (!prep.p_run) {
        out.error = "target is not in the language of grammar " + cfg.grammar.name();
        return;
      }
      out.n_samples = static_cast<std::size_t>(
          std::min(std::ceil(cfg.samples_factor / *prep.p_run), static_cast<double>(cfg.max_samples)));
    } else {
      out.n_samples = cfg.discovery.n_samples;
    }
    out.n_samples = std::min(out.n_samples, cfg.max_samples);
    DiscoveryConfig dc = cfg.discovery;
    dc.n_samples = out.n_samples;
    dc.seed = out.seed;
    dc.fit.seed = out.seed;
    dc.jobs = std::max(1u, cfg.jobs / workers);
    try {
      out.result = mc_gbed(*prep.grammar, *prep.data, dc);
    } catch (const std::exception& ex) {
      out.error = ex.what();
    }
  });

  json rows = json::array();
  json tasks = json::array();
  std::size_t pooled_unique = 0, pooled_raw = 0;
  std::vector<std::vector<ScoredCandidate>> candidate_sets;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    const BenchmarkTask& task = manifest.tasks[t];
    const TaskPrep& prep = preps[t];
    int successes = 0, completed = 0;
    double unique_sum = 0.0, coverage_sum = 0.0;
    for (std::size_t run = 0; run < runs; ++run) {
      const UnitResult& u = units[t * runs + run];
      RunContext ctx{task.id, static_cast<int>(run), cfg.grammar.name(), prep.p_run, prep.h_run};
      json row = run_report(u.result, ctx);
      row["seed"] = u.seed;
      row["target"] = task.target_expression;
      row["surface"] = prep.surface;
      row["n_samples"] = u.n_samples;
      row["p_uniform"] = optional_json(prep.p_uniform);
      row["p_biased"] = optional_json(prep.p_biased);
      row["height_uniform"] = optional_json(prep.h_uniform);
      row["height_biased"] = optional_json(prep.h_biased);
      row["error"] = optional_json(u.error);
      if (u.error) {
        row["success"] = 0;
      } else {
        ++completed;
        successes += u.result.success ? 1 : 0;
        unique_sum += static_cast<double>(u.result.n_unique);
        coverage_sum += u.result.coverage_achieved;
        pooled_unique += u.result.n_unique;
        pooled_raw += u.result.n_raw_samples;
        std::vector<ScoredCandidate> set;
        for (const auto& c : u.result.candidates)
          set.push_back({c.generation_probability, c.error < cfg.discovery.success_threshold});
        if (!set.empty()) candidate_sets.push_back(std::move(set));
        if (cfg.keep_candidates) row["candidates"] = result_to_json(u.result, cfg.discovery)["candidates"];
      }
      rows.push_back(std::move(row));
    }
    json agg;
    agg["task_id"] = task.id;
    agg["target"] = task.target_expression;
    agg["surface"] = prep.surface;
    agg["runs"] = completed;
    agg["successes"] = successes;
    agg["p_uniform"] = optional_json(prep.p_uniform);
    agg["p_biased"] = optional_json(prep.p_biased);
    agg["height_uniform"] = optional_json(prep.h_uniform);
    agg["height_biased"] = optional_json(prep.h_biased);
    agg["mean_n_unique"] = completed ? json(unique_sum / completed) : json(nullptr);
    agg["mean_coverage"] = completed ? json(coverage_sum / completed) : json(nullptr);
    agg["error"] = optional_json(prep.error);
    tasks.push_back(std::move(agg));
  }

  // Curves over the tasks with a known run-grammar probability.
  std::vector<double> probabilities, uniqueness, expected_u, expected_b;
  std::size_t max_n = 1;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    const TaskPrep& prep = preps[t];
    if (prep.p_uniform) expected_u.push_back(expected_samples_pcfg(*prep.p_uniform));
    if (prep.p_biased) expected_b.push_back(expected_samples_pcfg(*prep.p_biased));
    if (!prep.p_run) continue;
    probabilities.push_back(*prep.p_run);
    std::size_t u_sum = 0, r_sum = 0;
    for (std::size_t run = 0; run < runs; ++run) {
      const UnitResult& u = units[t * runs + run];
      max_n = std::max(max_n, u.n_samples);
      if (u.error) continue;
      u_sum += u.result.n_unique;
      r_sum += u.result.n_raw_samples;
    }
    uniqueness.push_back(r_sum ? static_cast<double>(u_sum) / static_cast<double>(r_sum) : 1.0);
  }
  const std::optional<double> pooled_ratio =
      pooled_raw ? std::optional<double>(static_cast<double>(pooled_unique) / static_cast<double>(pooled_raw))
                 : std::nullopt;
  const std::vector<double> grid = cfg.curve_grid.empty() ? log_grid(static_cast<double>(max_n)) : cfg.curve_grid;
  const std::vector<double> empirical =
      candidate_sets.empty() ? std::vector<double>{}
                             : resample_success_curve(candidate_sets, cfg.resample_repeats, cfg.discovery.seed);

  json success_curve = json::array(), ratio_curve = json::array();
  std::ostringstream success_csv, ratio_csv;
  success_csv << "n,theoretical,corrected,empirical\n";
  ratio_csv << "n,ratio_uniform,ratio_biased\n";
  for (double n : grid) {
    std::optional<double> theoretical, corrected, emp;
    if (!probabilities.empty()) {
      theoretical = expected_success_rate(probabilities, n);
      if (cfg.per_task_uniqueness) {
        double sum = 0.0;
        for (std::size_t i = 0; i < probabilities.size(); ++i)
          sum += ambiguity_corrected_rate(std::span(&probabilities[i], 1), n, uniqueness[i]);
        corrected = sum / static_cast<double>(probabilities.size());
      } else if (pooled_ratio) {
        corrected = ambiguity_corrected_rate(probabilities, n, *pooled_ratio);
      }
    }
    if (!empirical.empty()) {
      const std::size_t idx = std::min(empirical.size(), static_cast<std::size_t>(n)) - 1;
      emp = empirical[idx];
    }
    success_curve.push_back({{"n", n},
                             {"theoretical", optional_json(theoretical)},
                             {"corrected", optional_json(corrected)},
                             {"empirical", optional_json(emp)}});
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    success_csv << format_double(n) << ',' << cell(theoretical) << ',' << cell(corrected) << ',' << cell(emp)
                << '\n';

    const std::optional<double> ru = expected_u.empty() ? std::nullopt
                                                        : std::optional<double>(reconstruction_ratio(expected_u, n));
    const std::optional<double> rb = expected_b.empty() ? std::nullopt
                                                        : std::optional<double>(reconstruction_ratio(expected_b, n));
    ratio_curve.push_back({{"n", n}, {"ratio_uniform", optional_json(ru)}, {"ratio_biased", optional_json(rb)}});
    ratio_csv << format_double(n) << ',' << cell(ru) << ',' << cell(rb) << '\n';
  }

  const auto& d = cfg.discovery;
  json config = {{"grammar", cfg.grammar.name()},
                 {"runs", cfg.runs},
                 {"seed", d.seed},
                 {"n_samples", d.n_samples},
                 {"samples_factor", cfg.samples_factor},
                 {"max_samples", cfg.max_samples},
                 {"max_parameters", d.max_parameters},
                 {"success_threshold", d.success_threshold},
                 {"max_expansions", d.max_expansions},
                 {"top_k", cfg.top_k},
                 {"resample_repeats", cfg.resample_repeats},
                 {"per_task_uniqueness", cfg.per_task_uniqueness},
                 {"fit",
                  {{"population_factor", d.fit.population_factor},
                   {"min_population", d.fit.min_population},
                   {"mutation_factor", d.fit.mutation_factor},
                   {"crossover_rate", d.fit.crossover_rate},
                   {"max_generations", d.fit.max_generations},
                   {"stagnation_window", d.fit.stagnation_window},
                   {"target_error", d.fit.target_error},
                   {"bound_low", d.fit.default_bounds.low},
                   {"bound_high", d.fit.default_bounds.high}}}};

  BenchmarkReport out;
  out.report = {{"schema", "eqgram.benchmark_report.v1"},
                {"manifest", manifest.name},
                {"config", std::move(config)},
                {"rows", std::move(rows)},
                {"tasks", std::move(tasks)},
                {"uniqueness_ratio", optional_json(pooled_ratio)},
                {"success_curve", std::move(success_curve)},
                {"ratio_curve", std::move(ratio_curve)}};
  out.success_curve_csv = success_csv.str();
  out.ratio_curve_csv = ratio_csv.str();
  return out;
}

ExpectedRow expected_row(const Pcfg& uniform, const Pcfg& biased, const std::string& surface, std::size_t top_k) {
  ExpectedRow row;
  row.surface = surface;
  const auto tu = target_probability(uniform, surface, top_k);
  const auto tb = target_probability(biased, surface, top_k);
  row.p_uniform = tu.probability;
  row.p_biased = tb.probability;
  row.height = tu.height;
  row.expected_uniform = expected_samples_pcfg(tu.probability);
  row.expected_biased = expected_samples_pcfg(tb.probability);
  row.expected_cfg = expected_samples_cfg(uniform, tu.height);
  row.reduction_factor = row.expected_uniform / row.expected_biased;
  return row;
}

json emit_expected_vs_samples(const Manifest& manifest, const std::vector<double>& grid_in, std::size_t top_k) {
  json rows = json::array();
  std::vector<double> eu, eb, ecfg;
  std::size_t fewer = 0;
  double limit = 1.0;
  for (const auto& task : manifest.tasks) {
    json r;
    r["task_id"] = task.id;
    r["target"] = task.target_expression;
    try {
      task.check();
      const auto vars = variable_list(task);
      const std::string surface = task_surface(task);
      r["surface"] = surface;
      const ExpectedRow e = expected_row(universal_grammar(vars, BiasRatios::uniform()),
                                         universal_grammar(vars, BiasRatios::biased()), surface, top_k);
      r["p_uniform"] = e.p_uniform;
      r["p_biased"] = e.p_biased;
      r["height"] = e.height;
      r["expected_uniform"] = finite_or_null(e.expected_uniform);
      r["expected_biased"] = finite_or_null(e.expected_biased);
      r["expected_cfg"] = e.expected_cfg.decimal();
      r["expected_cfg_log10"] = e.expected_cfg.log10;
      r["reduction_factor"] = finite_or_null(e.reduction_factor);
      r["biased_fewer"] = e.expected_biased < e.expected_uniform;
      r["error"] = nullptr;
      eu.push_back(e.expected_uniform);
      eb.push_back(e.expected_biased);
      ecfg.push_back(std::pow(10.0, e.expected_cfg.log10));
      limit = std::max({limit, e.expected_uniform, e.expected_biased});
      if (e.expected_biased < e.expected_uniform) ++fewer;
    } catch (const std::exception& ex) {
      r["error"] = ex.what();
    }
    rows.push_back(std::move(r));
  }
  const std::vector<double> grid = grid_in.empty() ? log_grid(limit) : grid_in;
  json curves = json::array();
  for (double n : grid) {
    json c;
    c["n"] = n;
    c["ratio_uniform"] = eu.empty() ? json(nullptr) : json(reconstruction_ratio(eu, n));
    c["ratio_biased"] = eb.empty() ? json(nullptr) : json(reconstruction_ratio(eb, n));
    c["ratio_cfg"] = ecfg.empty() ? json(nullptr) : json(reconstruction_ratio(ecfg, n));
    curves.push_back(std::move(c));
  }
  return {{"manifest", manifest.name},
          {"rows", std::move(rows)},
          {"n_parsed", eu.size()},
          {"n_biased_fewer", fewer},
          {"fraction_biased_fewer", eu.empty() ? json(nullptr) : json(static_cast<double>(fewer) / eu.size())},
          {"ratio_curve", std::move(curves)}};
}

}  // namespace eqgram
