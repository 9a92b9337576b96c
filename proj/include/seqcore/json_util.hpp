#pragma once

#include <set>
#include <string>

#include "json.hpp"
#include "seqcore/error.hpp"

namespace seqcore {

using Json = nlohmann::json;

/// Reads a JSON object field by field and rejects keys nobody asked for.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(context_ + ": expected a JSON object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(context_ + "." + key + ": " + e.what());
    }
  }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(context_ + ": missing key '" + key + "'");
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return context_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(context_ + ": unknown key '" + key + "'");
  }

 private:
  const Json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace seqcore
