#include "eqgram/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace eqgram {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || begin == end)
    throw ConfigError("config key '" + key + "': '" + text + "' is not a valid number");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw ConfigError("config key '" + key + "': '" + text + "' is not a boolean");
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "grammar",           "seed",
      "jobs",              "runs",
      "n_samples",         "samples_factor",
      "max_samples",       "max_parameters",
      "success_threshold", "max_expansions",
      "top_k",             "resample_repeats",
      "per_task_uniqueness", "keep_candidates",
      "format",            "fit.population_factor",
      "fit.min_population", "fit.mutation_factor",
      "fit.crossover_rate", "fit.max_generations",
      "fit.stagnation_window", "fit.target_error",
      "fit.bound_low",     "fit.bound_high"};
  return keys;
}

std::string environment_name(const std::string& key) {
  std::string name = "EQGRAM_";
  for (char c : key) name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

Settings Settings::parse(std::string_view text, const std::string& origin) {
  Settings s;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    try {
      s.set(key, value);
    } catch (const ConfigError& ex) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return s;
}

Settings Settings::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

void Settings::set(const std::string& key, std::string value) {
  const auto& keys = known_config_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = std::move(value);
}

std::optional<std::string> Settings::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void Settings::apply_environment(const std::function<const char*(const char*)>& lookup) {
  for (const auto& key : known_config_keys()) {
    const std::string name = environment_name(key);
    if (const char* v = lookup(name.c_str())) values_[key] = trim(v);
  }
}

RunConfig to_run_config(const Settings& s, RunConfig cfg) {
  auto& d = cfg.discovery;
  auto& f = d.fit;
  for (const auto& [key, v] : s.values()) {
    if (key == "grammar") cfg.grammar = GrammarSource::parse(v);
    else if (key == "seed") d.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "jobs") cfg.jobs = parse_number<unsigned>(key, v);
    else if (key == "runs") cfg.runs = parse_number<int>(key, v);
    else if (key == "n_samples") d.n_samples = parse_number<std::size_t>(key, v);
    else if (key == "samples_factor") cfg.samples_factor = parse_number<double>(key, v);
    else if (key == "max_samples") cfg.max_samples = parse_number<std::size_t>(key, v);
    else if (key == "max_parameters") d.max_parameters = parse_number<int>(key, v);
    else if (key == "success_threshold") d.success_threshold = parse_number<double>(key, v);
    else if (key == "max_expansions") d.max_expansions = parse_number<std::size_t>(key, v);
    else if (key == "top_k") cfg.top_k = parse_number<std::size_t>(key, v);
    else if (key == "resample_repeats") cfg.resample_repeats = parse_number<int>(key, v);
    else if (key == "per_task_uniqueness") cfg.per_task_uniqueness = parse_bool(key, v);
    else if (key == "keep_candidates") cfg.keep_candidates = parse_bool(key, v);
    else if (key == "fit.population_factor") f.population_factor = parse_number<int>(key, v);
    else if (key == "fit.min_population") f.min_population = parse_number<int>(key, v);
    else if (key == "fit.mutation_factor") f.mutation_factor = parse_number<double>(key, v);
    else if (key == "fit.crossover_rate") f.crossover_rate = parse_number<double>(key, v);
    else if (key == "fit.max_generations") f.max_generations = parse_number<int>(key, v);
    else if (key == "fit.stagnation_window") f.stagnation_window = parse_number<int>(key, v);
    else if (key == "fit.target_error") f.target_error = parse_number<double>(key, v);
    else if (key == "fit.bound_low") f.default_bounds.low = parse_number<double>(key, v);
    else if (key == "fit.bound_high") f.default_bounds.high = parse_number<double>(key, v);
  }
  d.jobs = cfg.jobs;
  return cfg;
}

}  // namespace eqgram
