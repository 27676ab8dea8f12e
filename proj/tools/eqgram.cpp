#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "eqgram/analytics.hpp"
#include "eqgram/benchmark.hpp"
#include "eqgram/chart_parser.hpp"
#include "eqgram/config.hpp"
#include "eqgram/discovery.hpp"
#include "eqgram/json_schema.hpp"
#include "eqgram/sampler.hpp"

#ifndef EQGRAM_SCHEMA_FILE
#define EQGRAM_SCHEMA_FILE ""
#endif

using nlohmann::json;
using namespace eqgram;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Global {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::string format;
  std::string config;
};

RunConfig resolve_config(const Global& g, Settings& settings) {
  if (!g.config.empty()) settings = Settings::load(g.config);
  settings.apply_environment([](const char* name) { return std::getenv(name); });
  if (g.seed) settings.set("seed", std::to_string(*g.seed));
  if (g.jobs) settings.set("jobs", std::to_string(*g.jobs));
  if (!g.format.empty()) settings.set("format", g.format);
  return to_run_config(settings);
}

std::string resolve_format(const Settings& s, const std::string& fallback) {
  const std::string f = s.get("format").value_or(fallback);
  if (f != "json" && f != "csv" && f != "jsonl" && f != "tsv") throw UsageError("unknown format '" + f + "'");
  return f;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

Pcfg grammar_from(const std::string& source, const std::vector<std::string>& vars) {
  return make_grammar(GrammarSource::parse(source), vars);
}

SymbolId nonterminal(const Pcfg& g, const std::string& name) {
  if (name.empty()) return g.start();
  auto id = g.find(name, SymbolKind::nonterminal);
  if (!id) throw GrammarError("grammar has no nonterminal '" + name + "'");
  return *id;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      const auto parent = std::filesystem::path(path).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
      file_.open(path, std::ios::binary);
      if (!file_) throw std::runtime_error("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::string csv_cell(const json& v, char sep) {
  if (v.is_null()) return "";
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(std::string(1, sep) + "\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
  return quoted + "\"";
}

/// Writes an array of flat objects. Without an explicit column list the
/// columns are the first object's keys.
void write_table(std::ostream& out, const json& rows, const std::string& format,
                 std::vector<std::string> columns = {}) {
  if (format == "json") {
    out << rows.dump(2) << '\n';
    return;
  }
  if (format == "jsonl") {
    for (const auto& r : rows) out << r.dump() << '\n';
    return;
  }
  const char sep = format == "tsv" ? '\t' : ',';
  if (rows.empty()) return;
  if (columns.empty())
    for (const auto& [k, v] : rows.front().items()) columns.push_back(k);
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? std::string(1, sep) : "") << columns[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < columns.size(); ++i)
      out << (i ? std::string(1, sep) : "") << csv_cell(r.contains(columns[i]) ? r.at(columns[i]) : json(), sep);
    out << '\n';
  }
}

void write_record(std::ostream& out, const json& record, const std::string& format) {
  if (format == "json") out << record.dump(2) << '\n';
  else write_table(out, json::array({record}), format);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw std::runtime_error("'" + path + "' is not valid JSON: " + ex.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grammar-based equation discovery: sampling, parsing, analysis and benchmarks."};
  app.require_subcommand(1);
  app.fallthrough();
  Global global;
  app.add_option("--seed", global.seed, "Random seed");
  app.add_option("--jobs", global.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", global.format, "Output format")->check(CLI::IsMember({"json", "csv", "jsonl", "tsv"}));
  app.add_option("--config", global.config, "Flat key = value configuration file");

  std::string grammar = "uniform_universal", vars = "x,y", out_path, symbol, expr;
  std::size_t n = 0, max_expansions = kDefaultMaxExpansions, top_k = kDefaultTopK;
  bool n_given = false;
  int height = 0;

  auto* sample = app.add_subcommand("sample", "Draw parse trees from a grammar");
  sample->add_option("--grammar", grammar, "Grammar file or builtin name");
  sample->add_option("--vars", vars, "Variables for builtin grammars");
  sample->add_option("--n", n, "Number of samples")->required();
  sample->add_option("--max-expansions", max_expansions, "Expansion budget per sample");
  sample->add_option("--out", out_path, "Output file");

  auto* count = app.add_subcommand("count", "Exact number of parse trees by height");
  auto* coverage_cmd = app.add_subcommand("coverage", "Probability of trees up to a height");
  for (auto* c : {count, coverage_cmd}) {
    c->add_option("--grammar", grammar, "Grammar file or builtin name");
    c->add_option("--vars", vars, "Variables for builtin grammars");
    c->add_option("--symbol", symbol, "Root nonterminal (default: start symbol)");
    c->add_option("--height", height, "Height")->required()->check(CLI::NonNegativeNumber);
    c->add_option("--out", out_path, "Output file");
  }

  bool as_infix = false, deterministic = false;
  std::string manifest_path;
  auto* parse_prob = app.add_subcommand("parse-prob", "Most probable parse of a sentence");
  auto* expected = app.add_subcommand("expected", "Expected number of samples until a target appears");
  for (auto* c : {parse_prob, expected}) {
    c->add_option("--grammar", grammar, "Grammar file or builtin name");
    c->add_option("--vars", vars, "Variables for builtin grammars");
    c->add_option("--expr", expr, "Sentence in the grammar's tokens");
    c->add_flag("--infix", as_infix, "Treat --expr as infix and spell it in universal-grammar tokens");
    c->add_option("--top-k", top_k, "Derivations kept per chart cell")->check(CLI::PositiveNumber);
    c->add_option("--out", out_path, "Output file");
  }
  expected->add_flag("--deterministic", deterministic, "Systematic enumeration instead of sampling");
  expected->add_option("--manifest", manifest_path, "Tabulate every task of a manifest");

  std::string data_path, target;
  auto* discover = app.add_subcommand("discover", "Sample, fit and rank candidate equations");
  discover->add_option("--grammar", grammar, "Grammar file or builtin name");
  discover->add_option("--data", data_path, "CSV data with a header row")->required();
  discover->add_option("--target", target, "Target column")->required();
  discover->add_option("--n", n, "Number of samples");
  discover->add_option("--out", out_path, "Output file");

  std::string curves_dir, schema_path = EQGRAM_SCHEMA_FILE;
  std::optional<int> runs;
  std::optional<double> samples_factor;
  auto* benchmark = app.add_subcommand("benchmark", "Run every task of a manifest several times");
  benchmark->add_option("--manifest", manifest_path, "Task manifest (JSON)")->required();
  benchmark->add_option("--grammar", grammar, "Grammar file or builtin name");
  benchmark->add_option("--n", n, "Samples per run");
  benchmark->add_option("--runs", runs, "Independent runs per task");
  benchmark->add_option("--samples-factor", samples_factor, "Use ceil(factor / p) samples per run");
  benchmark->add_option("--out", out_path, "Report file");
  benchmark->add_option("--curves-dir", curves_dir, "Directory for the curve CSV files");
  benchmark->add_option("--schema", schema_path, "Report schema to validate against");

  std::vector<std::string> inputs;
  int repeats = 20;
  auto* resample = app.add_subcommand("resample", "Success rate by number of unique candidates");
  resample->add_option("inputs", inputs, "Discover outputs or benchmark reports kept with candidates")->required();
  resample->add_option("--repeats", repeats, "Random permutations per task")->check(CLI::PositiveNumber);
  resample->add_option("--out", out_path, "Output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  for (auto* c : {discover, benchmark})
    if (c->count("--n")) n_given = true;

  try {
    Settings settings;
    RunConfig cfg = resolve_config(global, settings);
    const auto var_list = split_list(vars);

    if (*sample) {
      const std::string format = resolve_format(settings, "tsv");
      const Pcfg g = grammar_from(grammar, var_list);
      const SampleBatch batch = sample_many(g, n, cfg.discovery.seed, max_expansions, cfg.jobs);
      json rows = json::array();
      for (const auto& s : batch.samples) {
        std::string sentence;
        for (const auto& t : yield(s.tree, g)) sentence += t;
        rows.push_back({{"sentence", sentence},
                        {"log_probability", s.log_probability},
                        {"height", tree_height(s.tree)},
                        {"expansions", expansion_count(s.tree)}});
      }
      Output out(out_path);
      write_table(out.stream(), rows, format, {"sentence", "log_probability", "height", "expansions"});
      std::cerr << "discarded " << batch.discarded << " over-budget attempts\n";
    } else if (*count || *coverage_cmd) {
      const std::string format = resolve_format(settings, "json");
      const Pcfg g = grammar_from(grammar, var_list);
      const SymbolId a = nonterminal(g, symbol);
      json record{{"symbol", g.symbol(a).name}, {"height", height}};
      if (*count) {
        const TreeCounts c = count_trees(g, a, height);
        record["n"] = to_decimal(c.exactly);
        record["N"] = to_decimal(c.up_to);
      } else {
        record["coverage"] = coverage(g, a, height);
      }
      Output out(out_path);
      write_record(out.stream(), record, format);
    } else if (*parse_prob || (*expected && manifest_path.empty())) {
      if (expr.empty()) throw UsageError("--expr is required");
      const std::string format = resolve_format(settings, "json");
      const Pcfg g = grammar_from(grammar, var_list);
      const std::string sentence = as_infix ? grammar_surface(canonicalize(parse_expression(expr), {.expand_products = false}).expr) : expr;
      const TargetProbability t = target_probability(g, sentence, top_k);
      json record{{"sentence", sentence}, {"probability", t.probability}, {"log_probability", t.log_probability},
                  {"height", t.height}};
      if (*parse_prob) {
        record["parses_found"] = t.parses_found;
        record["inside_probability"] = t.inside_probability;
      } else if (deterministic) {
        const ExactExpectation e = expected_samples_cfg(g, t.height);
        record["expected_samples"] = e.decimal();
        record["expected_samples_log10"] = e.log10;
      } else {
        record["expected_samples"] = expected_samples_pcfg(t.probability);
      }
      Output out(out_path);
      write_record(out.stream(), record, format);
    } else if (*expected) {
      const std::string format = resolve_format(settings, "json");
      const json table = emit_expected_vs_samples(load_manifest(manifest_path), {}, top_k);
      Output out(out_path);
      if (format == "json") out.stream() << table.dump(2) << '\n';
      else write_table(out.stream(), table.at("rows"), format);
    } else if (*discover) {
      const std::string format = resolve_format(settings, "json");
      const Dataset d = load_csv(data_path, target);
      const GrammarSource source = discover->count("--grammar") ? GrammarSource::parse(grammar) : cfg.grammar;
      const Pcfg g = make_grammar(source, d.inputs());
      DiscoveryConfig dc = cfg.discovery;
      if (n_given) dc.n_samples = n;
      const DiscoveryResult r = mc_gbed(g, d, dc);
      const json result = result_to_json(r, dc);
      Output out(out_path);
      if (format == "json") out.stream() << result.dump(2) << '\n';
      else write_table(out.stream(), result.at("candidates"), format);
      if (const auto* best = r.best())
        std::cerr << (r.success ? "solved: " : "best: ") << best->key << "  ReRMSE " << best->error << '\n';
    } else if (*benchmark) {
      const std::string format = resolve_format(settings, "json");
      if (benchmark->count("--grammar")) cfg.grammar = GrammarSource::parse(grammar);
      if (n_given) cfg.discovery.n_samples = n;
      if (runs) cfg.runs = *runs;
      if (samples_factor) cfg.samples_factor = *samples_factor;
      const BenchmarkReport report = run_benchmark(load_manifest(manifest_path), cfg);
      if (!schema_path.empty() && std::ifstream(schema_path)) {
        const auto violations = validate_json(report.report, read_json_file(schema_path));
        if (!violations.empty())
          throw InvariantError("report violates " + schema_path + " at '" + violations.front().path +
                               "': " + violations.front().message);
      }
      Output out(out_path);
      if (format == "json") out.stream() << report.report.dump(2) << '\n';
      else write_table(out.stream(), report.report.at("rows"), format);
      if (!curves_dir.empty() || !out_path.empty()) {
        const std::string dir =
            !curves_dir.empty() ? curves_dir : std::filesystem::path(out_path).parent_path().string();
        const std::filesystem::path base = dir.empty() ? std::filesystem::path(".") : std::filesystem::path(dir);
        std::filesystem::create_directories(base);
        std::ofstream(base / "success_curve.csv", std::ios::binary) << report.success_curve_csv;
        std::ofstream(base / "ratio_curve.csv", std::ios::binary) << report.ratio_curve_csv;
      }
    } else if (*resample) {
      const std::string format = resolve_format(settings, "csv");
      std::vector<std::vector<ScoredCandidate>> tasks;
      for (const auto& path : inputs) {
        const json j = read_json_file(path);
        if (j.contains("candidates")) {
          tasks.push_back(candidates_from_json(j));
        } else if (j.contains("rows")) {
          const double threshold = j.at("config").at("success_threshold").get<double>();
          for (const auto& row : j.at("rows")) {
            if (!row.contains("candidates")) continue;
            tasks.push_back(candidates_from_json({{"success_threshold", threshold}, {"candidates", row.at("candidates")}}));
          }
        }
      }
      std::erase_if(tasks, [](const auto& t) { return t.empty(); });
      if (tasks.empty()) throw std::runtime_error("no candidate lists found in the inputs");
      const auto curve = resample_success_curve(tasks, repeats, cfg.discovery.seed);
      json rows = json::array();
      for (std::size_t i = 0; i < curve.size(); ++i) rows.push_back({{"sample_size", i + 1}, {"avg_success_rate", curve[i]}});
      Output out(out_path);
      write_table(out.stream(), rows, format, {"sample_size", "avg_success_rate"});
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
