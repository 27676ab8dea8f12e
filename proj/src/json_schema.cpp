#include "eqgram/json_schema.hpp"

#include <stdexcept>

namespace eqgram {

namespace {

using nlohmann::json;

bool has_type(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer") return v.is_number_integer();
  throw std::invalid_argument("schema uses unknown type '" + type + "'");
}

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void check(const json& v, const json& schema, const std::string& path, std::vector<SchemaViolation>& out) const {
    if (schema.is_boolean()) {
      if (!schema.get<bool>()) out.push_back({path, "value not allowed"});
      return;
    }
    if (auto it = schema.find("$ref"); it != schema.end()) {
      check(v, resolve(it->get<std::string>()), path, out);
      return;
    }
    if (auto it = schema.find("type"); it != schema.end()) {
      bool ok = false;
      if (it->is_string()) {
        ok = has_type(v, it->get<std::string>());
      } else {
        for (const auto& t : *it) ok = ok || has_type(v, t.get<std::string>());
      }
      if (!ok) {
        out.push_back({path, "expected type " + it->dump() + ", got " + v.type_name()});
        return;
      }
    }
    if (auto it = schema.find("const"); it != schema.end() && v != *it)
      out.push_back({path, "expected constant " + it->dump()});
    if (auto it = schema.find("enum"); it != schema.end()) {
      bool found = false;
      for (const auto& e : *it) found = found || v == e;
      if (!found) out.push_back({path, "value " + v.dump() + " not in " + it->dump()});
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (auto it = schema.find("minimum"); it != schema.end() && x < it->get<double>())
        out.push_back({path, "value below minimum " + it->dump()});
      if (auto it = schema.find("maximum"); it != schema.end() && x > it->get<double>())
        out.push_back({path, "value above maximum " + it->dump()});
    }
    if (auto it = schema.find("anyOf"); it != schema.end()) {
      bool any = false;
      for (const auto& alt : *it) {
        std::vector<SchemaViolation> scratch;
        check(v, alt, path, scratch);
        if (scratch.empty()) {
          any = true;
          break;
        }
      }
      if (!any) out.push_back({path, "value matches none of the anyOf alternatives"});
    }
    if (v.is_object()) {
      const json empty = json::object();
      const json& props = schema.contains("properties") ? schema.at("properties") : empty;
      if (auto it = schema.find("required"); it != schema.end())
        for (const auto& name : *it)
          if (!v.contains(name.get<std::string>()))
            out.push_back({path, "missing required property '" + name.get<std::string>() + "'"});
      for (const auto& [key, value] : v.items()) {
        const std::string child = path + "/" + escape_pointer(key);
        if (auto p = props.find(key); p != props.end()) {
          check(value, *p, child, out);
        } else if (auto extra = schema.find("additionalProperties"); extra != schema.end()) {
          if (extra->is_boolean() && !extra->get<bool>()) out.push_back({child, "unexpected property"});
          else if (extra->is_object()) check(value, *extra, child, out);
        }
      }
    }
    if (v.is_array()) {
      if (auto it = schema.find("minItems"); it != schema.end() && v.size() < it->get<std::size_t>())
        out.push_back({path, "fewer than " + it->dump() + " items"});
      if (auto it = schema.find("items"); it != schema.end())
        for (std::size_t i = 0; i < v.size(); ++i) check(v[i], *it, path + "/" + std::to_string(i), out);
    }
  }

 private:
  const json& resolve(const std::string& ref) const {
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) throw std::invalid_argument("unsupported schema reference '" + ref + "'");
    return root_.at("$defs").at(ref.substr(prefix.size()));
  }

  const json& root_;
};

}  // namespace

std::vector<SchemaViolation> validate_json(const json& instance, const json& schema) {
  std::vector<SchemaViolation> out;
  Validator(schema).check(instance, schema, "", out);
  return out;
}

}  // namespace eqgram
