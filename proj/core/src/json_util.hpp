// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

// Strict JSON object access: every key must be consumed, so typos surface as
// errors instead of silently falling back to defaults.

#pragma once

#include <set>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "gnv/error.hpp"
#include "gnv/math.hpp"

namespace gnv::detail {

using nlohmann::json;

class StrictObject {
 public:
  StrictObject(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(context_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(context_ + ": missing key '" + key + "'");
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    const json& v = raw(key);
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(context_ + ": bad value for '" + key + "': " + e.what());
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : std::move(fallback);
  }

  std::string path(const std::string& key) const { return context_ + "." + key; }

  /// Throws on any key that was never read.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(context_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> used_;
};

inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from(const json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(context + ": expected a 3-vector");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const json::exception& e) {
    throw ConfigError(context + ": " + e.what());
  }
}

}  // namespace gnv::detail
