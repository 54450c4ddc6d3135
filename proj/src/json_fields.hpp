#pragma once

// Strict-schema helpers shared by the JSON readers.

#include <initializer_list>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "qhl/errors.hpp"

namespace qhl::detail {

inline void check_fields(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError("schema", where + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError("schema", where + ": unknown field '" + key + "'");
  }
}

inline double get_number(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ConfigError("schema", where + ": missing numeric field '" + key + "'");
  }
  return j.at(key).get<double>();
}

inline double get_number(const nlohmann::json& j, const char* key, const std::string& where,
                         double fallback) {
  return j.contains(key) ? get_number(j, key, where) : fallback;
}

inline std::vector<double> get_numbers(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw ConfigError("schema", where + ": missing array field '" + key + "'");
  }
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) throw ConfigError("schema", where + ": '" + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace qhl::detail
