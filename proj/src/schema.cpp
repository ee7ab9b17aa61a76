#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>

#include "aspo/agents.hpp"

namespace aspo {

using nlohmann::json;

namespace {

// Generated from schemas/agents/*.response.schema.json at configure time.
const std::map<std::string, std::string_view>& embedded_schemas() {
  static const std::map<std::string, std::string_view> docs = {
#include "aspo_schemas.inc"
  };
  return docs;
}

bool has_type(const json& v, std::string_view type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  throw std::invalid_argument("schema: unsupported type " + std::string(type));
}

std::optional<std::string> check(const json& schema, const json& v, const std::string& path) {
  static const std::set<std::string> known = {
      "title", "description", "$schema", "type", "required", "properties",
      "additionalProperties", "items", "enum", "minimum", "maximum", "minLength", "uniqueItems"};
  for (const auto& [key, _] : schema.items()) {
    if (!known.contains(key)) throw std::invalid_argument("schema: unsupported keyword " + key);
  }
  auto fail = [&](const std::string& msg) { return std::optional<std::string>(path + ": " + msg); };

  if (auto it = schema.find("type"); it != schema.end()) {
    bool ok = false;
    if (it->is_array()) {
      for (const auto& t : *it) ok = ok || has_type(v, t.get<std::string>());
    } else {
      ok = has_type(v, it->get<std::string>());
    }
    if (!ok) return fail("expected type " + it->dump());
  }
  if (auto it = schema.find("enum"); it != schema.end()) {
    bool found = false;
    for (const auto& e : *it) found = found || e == v;
    if (!found) return fail("value not in " + it->dump());
  }
  if (v.is_number()) {
    const double d = v.get<double>();
    if (auto it = schema.find("minimum"); it != schema.end() && d < it->get<double>()) {
      return fail("below minimum " + it->dump());
    }
    if (auto it = schema.find("maximum"); it != schema.end() && d > it->get<double>()) {
      return fail("above maximum " + it->dump());
    }
  }
  if (v.is_string()) {
    if (auto it = schema.find("minLength");
        it != schema.end() && v.get_ref<const std::string&>().size() < it->get<std::size_t>()) {
      return fail("string shorter than " + it->dump());
    }
  }
  if (v.is_object()) {
    if (auto it = schema.find("required"); it != schema.end()) {
      for (const auto& key : *it) {
        if (!v.contains(key.get<std::string>())) return fail("missing " + key.get<std::string>());
      }
    }
    const json* props = nullptr;
    if (auto it = schema.find("properties"); it != schema.end()) props = &*it;
    const bool closed = schema.value("additionalProperties", true) == false;
    for (const auto& [key, child] : v.items()) {
      if (props && props->contains(key)) {
        if (auto err = check(props->at(key), child, path + "." + key)) return err;
      } else if (closed) {
        return fail("unexpected property " + key);
      }
    }
  }
  if (v.is_array()) {
    if (auto it = schema.find("items"); it != schema.end()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (auto err = check(*it, v[i], path + "[" + std::to_string(i) + "]")) return err;
      }
    }
    if (schema.value("uniqueItems", false)) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = i + 1; j < v.size(); ++j) {
          if (v[i] == v[j]) return fail("duplicate item " + v[i].dump());
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> schema_violation(const json& schema, const json& instance) {
  return check(schema, instance, "$");
}

const json& response_schema(AgentRole role) {
  static const std::map<AgentRole, json> parsed = [] {
    std::map<AgentRole, json> out;
    for (AgentRole r : kAgentRoles) {
      const auto& docs = embedded_schemas();
      auto it = docs.find(std::string(to_string(r)));
      if (it == docs.end()) throw std::logic_error("missing schema for " + std::string(to_string(r)));
      out.emplace(r, json::parse(it->second));
    }
    return out;
  }();
  return parsed.at(role);
}

}  // namespace aspo
