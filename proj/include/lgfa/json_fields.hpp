#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "lgfa/error.hpp"

namespace lgfa::json_fields {

/// Reads optional fields of a config object; finish() rejects keys nobody asked for.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw SchemaError(section_ + ": expected an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw SchemaError("");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!it->is_number()) throw SchemaError("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw SchemaError(section_ + "." + key + ": wrong type");
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw SchemaError(section_ + ": unknown field '" + key + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace lgfa::json_fields
