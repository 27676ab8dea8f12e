#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eqgram/expression.hpp"

namespace eqgram {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named columns of observations plus a designated target column.
/// Invariants: every value finite, at least two rows, target variance > 0.
class Dataset {
 public:
  Dataset(std::vector<std::string> names, std::vector<std::vector<double>> columns, std::string target);

  static Dataset from_rows(std::vector<std::string> names, const std::vector<std::vector<double>>& rows,
                           std::string target);

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& target() const noexcept { return target_; }
  std::size_t rows() const noexcept { return columns_.empty() ? 0 : columns_.front().size(); }

  std::span<const double> column(std::size_t i) const { return columns_.at(i); }
  std::span<const double> column(const std::string& name) const;
  std::span<const double> target_values() const { return columns_[target_index_]; }

  /// Column names other than the target, in column order.
  const std::vector<std::string>& inputs() const noexcept { return inputs_; }
  /// Population standard deviation of the target.
  double target_std() const noexcept { return target_std_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::string target_;
  std::size_t target_index_ = 0;
  std::vector<std::string> inputs_;
  double target_std_ = 0.0;
};

struct Bounds {
  double low = -10.0;
  double high = 10.0;
};

struct FitConfig {
  int population_factor = 10;
  int min_population = 15;
  double mutation_factor = 0.6;
  double crossover_rate = 0.9;
  int max_generations = 1000;
  /// Per-parameter bounds; parameters beyond the list use default_bounds.
  std::vector<Bounds> bounds;
  Bounds default_bounds;
  int stagnation_window = 100;
  double target_error = 1e-12;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when a field is out of range.
  void check() const;
  Bounds bounds_for(std::size_t parameter) const;
};

struct FitResult {
  std::vector<double> params;
  double error = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Root mean squared error divided by the population standard deviation of
/// the target. Non-finite when any prediction is non-finite.
double rermse(const Expression& e, std::span<const double> params, const Dataset& d);

/// Evaluates one expression against one dataset without re-compiling.
class Objective {
 public:
  Objective(const Expression& e, const Dataset& d);

  int n_parameters() const noexcept { return program_.n_parameters(); }
  /// ReRMSE, or +inf when it is not finite.
  double operator()(std::span<const double> params) const;

 private:
  const Dataset& data_;
  CompiledExpression program_;
  std::vector<std::span<const double>> columns_;
  mutable std::vector<double> predictions_;
};

/// DE/rand/1/bin on ReRMSE. Expressions without parameters are scored
/// directly. Deterministic for a given seed.
FitResult fit_parameters(const CanonicalForm& c, const Dataset& d, const FitConfig& cfg);

}  // namespace eqgram
