#include "eqgram/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "eqgram/random.hpp"

namespace eqgram {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Dataset::Dataset(std::vector<std::string> names, std::vector<std::vector<double>> columns, std::string target)
    : names_(std::move(names)), columns_(std::move(columns)), target_(std::move(target)) {
  if (names_.size() != columns_.size()) throw DatasetError("column count does not match name count");
  if (std::set<std::string>(names_.begin(), names_.end()).size() != names_.size())
    throw DatasetError("duplicate column name");
  auto it = std::find(names_.begin(), names_.end(), target_);
  if (it == names_.end()) throw DatasetError("target column '" + target_ + "' not found");
  target_index_ = static_cast<std::size_t>(it - names_.begin());
  const std::size_t n = columns_.front().size();
  if (n < 2) throw DatasetError("dataset needs at least two rows");
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].size() != n) throw DatasetError("column '" + names_[c] + "' has a different length");
    for (double v : columns_[c])
      if (!std::isfinite(v)) throw DatasetError("column '" + names_[c] + "' contains a non-finite value");
    if (c != target_index_) inputs_.push_back(names_[c]);
  }
  const auto& v = columns_[target_index_];
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  target_std_ = std::sqrt(ss / static_cast<double>(n));
  if (!(target_std_ > 0.0)) throw DatasetError("target column '" + target_ + "' has zero variance");
}

Dataset Dataset::from_rows(std::vector<std::string> names, const std::vector<std::vector<double>>& rows,
                           std::string target) {
  std::vector<std::vector<double>> columns(names.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != names.size())
      throw DatasetError("row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                         " values, expected " + std::to_string(names.size()));
    for (std::size_t c = 0; c < names.size(); ++c) columns[c].push_back(rows[r][c]);
  }
  return Dataset(std::move(names), std::move(columns), std::move(target));
}

std::span<const double> Dataset::column(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw DatasetError("no column named '" + name + "'");
  return columns_[static_cast<std::size_t>(it - names_.begin())];
}

void FitConfig::check() const {
  if (population_factor < 1) throw std::invalid_argument("population_factor must be positive");
  if (min_population < 4) throw std::invalid_argument("min_population must be at least 4");
  if (!(mutation_factor > 0.0 && mutation_factor < 2.0))
    throw std::invalid_argument("mutation factor must lie in (0, 2)");
  if (!(crossover_rate > 0.0 && crossover_rate < 1.0))
    throw std::invalid_argument("crossover rate must lie in (0, 1)");
  if (max_generations < 1) throw std::invalid_argument("max_generations must be positive");
  if (stagnation_window < 1) throw std::invalid_argument("stagnation_window must be positive");
  if (!(target_error >= 0.0)) throw std::invalid_argument("target_error must be non-negative");
  if (!(default_bounds.low < default_bounds.high)) throw std::invalid_argument("bounds must satisfy low < high");
  for (const auto& b : bounds)
    if (!(b.low < b.high)) throw std::invalid_argument("bounds must satisfy low < high");
}

Bounds FitConfig::bounds_for(std::size_t parameter) const {
  return parameter < bounds.size() ? bounds[parameter] : default_bounds;
}

Objective::Objective(const Expression& e, const Dataset& d)
    : data_(d), program_(e, d.inputs()), predictions_(d.rows()) {
  for (const auto& name : d.inputs()) columns_.push_back(d.column(name));
}

double Objective::operator()(std::span<const double> params) const {
  program_.evaluate(columns_, params, predictions_);
  const auto v = data_.target_values();
  double ss = 0.0;
  for (std::size_t r = 0; r < predictions_.size(); ++r) {
    const double diff = v[r] - predictions_[r];
    ss += diff * diff;
  }
  const double err = std::sqrt(ss / static_cast<double>(predictions_.size())) / data_.target_std();
  return std::isfinite(err) ? err : kInf;
}

double rermse(const Expression& e, std::span<const double> params, const Dataset& d) {
  const int n = parameter_count(e);
  if (params.size() != static_cast<std::size_t>(n))
    throw ExpressionError("expected " + std::to_string(n) + " parameter values, got " +
                          std::to_string(params.size()));
  const double err = Objective(e, d)(params);
  return std::isinf(err) ? std::numeric_limits<double>::quiet_NaN() : err;
}

FitResult fit_parameters(const CanonicalForm& c, const Dataset& d, const FitConfig& cfg) {
  cfg.check();
  const Objective objective(c.expr, d);
  const std::size_t dim = static_cast<std::size_t>(std::max(c.n_parameters, objective.n_parameters()));
  FitResult result;
  if (dim == 0) {
    result.error = objective({});
    result.evaluations = 1;
    result.converged = true;
    return result;
  }

  const std::size_t pop = std::max<std::size_t>(static_cast<std::size_t>(cfg.min_population),
                                                static_cast<std::size_t>(cfg.population_factor) * dim);
  std::vector<Bounds> bounds(dim);
  for (std::size_t j = 0; j < dim; ++j) bounds[j] = cfg.bounds_for(j);

  RandomStream rng(cfg.seed, 0x5eed);
  std::vector<std::vector<double>> population(pop, std::vector<double>(dim));
  std::vector<double> scores(pop);
  for (std::size_t i = 0; i < pop; ++i) {
    for (std::size_t j = 0; j < dim; ++j) population[i][j] = rng.uniform(bounds[j].low, bounds[j].high);
    scores[i] = objective(population[i]);
  }
  result.evaluations = pop;

  auto best_index = [&] { return static_cast<std::size_t>(std::min_element(scores.begin(), scores.end()) - scores.begin()); };
  std::size_t best = best_index();
  double best_score = scores[best];
  double reference = best_score;
  int last_improvement = 0;
  int generation = 0;
  bool stopped_early = best_score <= cfg.target_error;

  std::vector<std::vector<double>> next(population);
  std::vector<double> trial(dim);
  while (!stopped_early && generation < cfg.max_generations) {
    ++generation;
    for (std::size_t i = 0; i < pop; ++i) {
      std::size_t r1, r2, r3;
      do r1 = rng.below(pop); while (r1 == i);
      do r2 = rng.below(pop); while (r2 == i || r2 == r1);
      do r3 = rng.below(pop); while (r3 == i || r3 == r1 || r3 == r2);
      const std::size_t forced = rng.below(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        if (j == forced || rng.uniform() < cfg.crossover_rate) {
          const double v = population[r1][j] + cfg.mutation_factor * (population[r2][j] - population[r3][j]);
          trial[j] = std::clamp(v, bounds[j].low, bounds[j].high);
        } else {
          trial[j] = population[i][j];
        }
      }
      const double s = objective(trial);
      ++result.evaluations;
      if (s <= scores[i]) {
        next[i] = trial;
        scores[i] = s;
      } else {
        next[i] = population[i];
      }
    }
    population.swap(next);
    best = best_index();
    best_score = scores[best];
    if (reference - best_score > 1e-12 || (std::isinf(reference) && std::isfinite(best_score))) {
      reference = best_score;
      last_improvement = generation;
    }
    if (best_score <= cfg.target_error) stopped_early = true;
    if (generation - last_improvement >= cfg.stagnation_window) stopped_early = true;
  }

  result.params = population[best];
  result.error = best_score;
  result.converged = stopped_early;
  return result;
}

}  // namespace eqgram
