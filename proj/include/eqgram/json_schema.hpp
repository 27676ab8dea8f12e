#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace eqgram {

struct SchemaViolation {
  std::string path;  ///< JSON pointer to the offending value
  std::string message;
};

/// Validates against the subset of JSON Schema used by the report schemas:
/// type, properties, required, additionalProperties, items, minItems, enum,
/// const, minimum, maximum, anyOf, and local "#/$defs/..." references.
std::vector<SchemaViolation> validate_json(const nlohmann::json& instance, const nlohmann::json& schema);

}  // namespace eqgram
