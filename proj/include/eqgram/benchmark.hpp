#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eqgram/analytics.hpp"
#include "eqgram/chart_parser.hpp"
#include "eqgram/discovery.hpp"
#include "eqgram/expression.hpp"
#include "eqgram/fitting.hpp"
#include "eqgram/grammar.hpp"

namespace eqgram {

class BenchmarkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VariableRange {
  std::string name;
  double low = 1.0;
  double high = 5.0;
};

struct BenchmarkTask {
  std::string id;
  /// Infix text. Numbers become fitted constants during discovery; `pi` is
  /// the numeric constant.
  std::string target_expression;
  std::vector<VariableRange> variables;
  int n_rows = 20;
  std::uint64_t data_seed = 0;
  /// Overrides the run's sample count when set.
  std::optional<std::size_t> n_samples;

  /// Throws BenchmarkError for degenerate ranges, unparseable targets and
  /// target variables without a range.
  void check() const;
};

struct Manifest {
  std::string name;
  /// Name of the generated target column.
  std::string target_name = "f";
  std::vector<BenchmarkTask> tasks;
};

Manifest parse_manifest(const nlohmann::json& j);
Manifest load_manifest(const std::string& path);

/// The task target with named constants substituted.
Expression task_expression(const BenchmarkTask& task);

/// Draws n_rows uniform points inside the variable ranges and evaluates the
/// target. Rows with a non-finite target are redrawn, up to 100 * n_rows
/// draws in total.
Dataset generate_dataset(const BenchmarkTask& task, const std::string& target_name = "f");

/// CSV with a header row of column names.
Dataset read_csv(std::istream& in, const std::string& target);
Dataset load_csv(const std::string& path, const std::string& target);
void write_csv(std::ostream& out, const Dataset& d);

enum class BuiltinGrammar { uniform_universal, biased_universal, linear };

struct GrammarSource {
  /// A builtin, or a grammar file when `path` is non-empty.
  BuiltinGrammar builtin = BuiltinGrammar::uniform_universal;
  std::string path;

  std::string name() const;
  static GrammarSource parse(const std::string& text);
};

/// Builtins are instantiated over `variables`; files are loaded as written.
Pcfg make_grammar(const GrammarSource& source, std::span<const std::string> variables);

/// Target spelled in the universal-grammar token vocabulary.
std::string task_surface(const BenchmarkTask& task);

struct RunConfig {
  GrammarSource grammar;
  DiscoveryConfig discovery;
  int runs = 3;
  unsigned jobs = 1;
  /// When positive, each run draws ceil(samples_factor / p) samples where p
  /// is the target's parse probability under the run grammar.
  double samples_factor = 0.0;
  /// Hard cap on samples per run.
  std::size_t max_samples = 1000000;
  int resample_repeats = 20;
  /// Correct the theoretical curve per task instead of with the pooled
  /// uniqueness ratio.
  bool per_task_uniqueness = false;
  /// Keep every candidate of every run in the report.
  bool keep_candidates = false;
  std::size_t top_k = kDefaultTopK;
  std::vector<double> curve_grid;  ///< empty: log-spaced default

  void check() const;
};

/// 1, 2, 5, 10, 20, 50, ... up to the first value not below `limit`.
std::vector<double> log_grid(double limit);

struct BenchmarkReport {
  nlohmann::json report;
  /// n, theoretical, corrected, empirical
  std::string success_curve_csv;
  /// n, ratio_uniform, ratio_biased
  std::string ratio_curve_csv;
};

/// Runs every task `runs` times. Per-task failures are recorded in the row's
/// `error` field and do not stop the batch.
BenchmarkReport run_benchmark(const Manifest& manifest, const RunConfig& cfg);

struct ExpectedRow {
  std::string surface;
  double p_uniform = 0.0;
  double p_biased = 0.0;
  int height = 0;
  double expected_uniform = 0.0;
  double expected_biased = 0.0;
  ExactExpectation expected_cfg;
  double reduction_factor = 0.0;  ///< expected_uniform / expected_biased
};

/// Expected samples of `surface` under two PCFGs and under systematic
/// enumeration of the first grammar's rules at the uniform parse height.
ExpectedRow expected_row(const Pcfg& uniform, const Pcfg& biased, const std::string& surface,
                         std::size_t top_k = kDefaultTopK);

/// One row per task plus ratio curves; rows that fail carry an `error`.
nlohmann::json emit_expected_vs_samples(const Manifest& manifest, const std::vector<double>& grid = {},
                                        std::size_t top_k = kDefaultTopK);

}  // namespace eqgram
