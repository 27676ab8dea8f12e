#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eqgram/benchmark.hpp"

namespace eqgram {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` settings. Blank lines and `#` comments are ignored;
/// keys outside known_config_keys() are rejected.
class Settings {
 public:
  static Settings parse(std::string_view text, const std::string& origin = "<config>");
  static Settings load(const std::string& path);

  void set(const std::string& key, std::string value);
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Overrides each known key with EQGRAM_<KEY> (dots become underscores,
  /// upper case) when the lookup returns a value.
  void apply_environment(const std::function<const char*(const char*)>& lookup);

 private:
  std::map<std::string, std::string> values_;
};

const std::vector<std::string>& known_config_keys();
std::string environment_name(const std::string& key);

/// Applies every present key on top of `base`. Throws ConfigError for values
/// of the wrong type.
RunConfig to_run_config(const Settings& s, RunConfig base = {});

}  // namespace eqgram
