#pragma once

// Internal helpers for strict JSON document parsing.

#include <initializer_list>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "aspo/error.hpp"

namespace aspo::detail {

using nlohmann::json;

template <typename ErrorT>
void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
  if (!obj.is_object()) throw ErrorT(std::string(where) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ErrorT(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename ErrorT>
const json& require(const json& obj, std::string_view key, std::string_view where) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) {
    throw ErrorT(std::string(where) + ": missing key '" + std::string(key) + "'");
  }
  return *it;
}

template <typename ErrorT>
std::string as_string(const json& v, std::string_view where) {
  if (!v.is_string()) throw ErrorT(std::string(where) + ": expected a string");
  return v.get<std::string>();
}

template <typename ErrorT>
double as_number(const json& v, std::string_view where) {
  if (!v.is_number()) throw ErrorT(std::string(where) + ": expected a number");
  return v.get<double>();
}

template <typename ErrorT>
std::set<std::string> as_string_set(const json& v, std::string_view where) {
  if (!v.is_array()) throw ErrorT(std::string(where) + ": expected an array of strings");
  std::set<std::string> out;
  for (const auto& e : v) out.insert(as_string<ErrorT>(e, where));
  return out;
}

template <typename ErrorT>
std::vector<std::string> as_string_list(const json& v, std::string_view where) {
  if (!v.is_array()) throw ErrorT(std::string(where) + ": expected an array of strings");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(as_string<ErrorT>(e, where));
  return out;
}

}  // namespace aspo::detail
