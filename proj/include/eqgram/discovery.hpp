#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eqgram/expression.hpp"
#include "eqgram/fitting.hpp"
#include "eqgram/grammar.hpp"
#include "eqgram/sampler.hpp"

namespace eqgram {

struct DiscoveryConfig {
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
  int max_parameters = 5;
  double success_threshold = 1e-9;
  std::size_t max_expansions = kDefaultMaxExpansions;
  FitConfig fit;
  unsigned jobs = 1;
};

struct CandidateEquation {
  std::string key;
  Expression expr;
  int n_parameters = 0;
  std::vector<double> params;
  double error = 0.0;
  /// Sum of the probabilities of the distinct sampled trees with this key.
  double generation_probability = 0.0;
  /// Number of raw samples with this key.
  std::size_t sample_multiplicity = 0;
  bool admissible = true;
  bool converged = false;
};

/// The sampling half of a discovery run: candidates are canonicalized and
/// deduplicated, but not fitted.
struct CandidatePool {
  std::vector<CandidateEquation> candidates;  ///< in order of first appearance
  std::size_t n_raw_samples = 0;
  std::size_t n_discarded = 0;
  std::size_t n_distinct_trees = 0;
  double coverage_achieved = 0.0;
  int max_height = 0;
};

struct DiscoveryResult {
  std::vector<CandidateEquation> candidates;
  std::size_t n_raw_samples = 0;
  std::size_t n_unique = 0;
  std::size_t n_discarded = 0;
  std::size_t n_distinct_trees = 0;
  double coverage_achieved = 0.0;
  int max_height = 0;
  bool success = false;
  double wall_seconds = 0.0;

  const CandidateEquation* best() const { return candidates.empty() ? nullptr : &candidates.front(); }
};

class DiscoveryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws DiscoveryError when a grammar terminal names the target variable.
void check_grammar_for_dataset(const Pcfg& g, const Dataset& d);

CandidatePool sample_candidates(const Pcfg& g, std::size_t n_samples, std::uint64_t seed,
                                std::size_t max_expansions = kDefaultMaxExpansions, unsigned jobs = 1);

/// Sample, canonicalize, deduplicate, fit each key once, score and sort by
/// (error, -generation_probability, key).
DiscoveryResult mc_gbed(const Pcfg& g, const Dataset& d, const DiscoveryConfig& cfg);

/// One point of a task's candidate set for resampling.
struct ScoredCandidate {
  double probability = 0.0;
  bool success = false;
};

/// Average over repeats and tasks of "some successful candidate appears among
/// the first n of a probability-weighted random permutation", for n = 1..max
/// candidate count. Element n-1 of the result is the rate at size n.
std::vector<double> resample_success_curve(const std::vector<std::vector<ScoredCandidate>>& tasks,
                                           int repeats, std::uint64_t seed);

struct RunContext {
  std::string task_id;
  int run = 0;
  std::string grammar;
  std::optional<double> target_probability;
  std::optional<int> target_height;
};

/// Summary row of one discovery run. Infinite errors are written as null.
nlohmann::json run_report(const DiscoveryResult& result, const RunContext& context);

/// Full run including every candidate; read back by candidates_from_json.
nlohmann::json result_to_json(const DiscoveryResult& result, const DiscoveryConfig& cfg);
std::vector<ScoredCandidate> candidates_from_json(const nlohmann::json& j);

}  // namespace eqgram
