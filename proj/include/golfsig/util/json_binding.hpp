#pragma once

// Generic JSON mapping for config structs. A struct opts in by providing
//
//   template <class V> void describe(V& v, MyConfig& c) { v("key", c.field); ... }
//
// found by argument-dependent lookup. Reading rejects unknown keys and type
// mismatches, naming the offending key.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "golfsig/util/error.hpp"
#include "json.hpp"

namespace golfsig {

using Json = nlohmann::json;

namespace detail {

struct JsonWriter {
  Json out = Json::object();
  template <class T>
  void operator()(const char* key, T& field) {
    if constexpr (requires(JsonWriter& w, T& f) { describe(w, f); }) {
      JsonWriter sub;
      describe(sub, field);
      out[key] = sub.out;
    } else {
      out[key] = field;
    }
  }
};

struct KeyCollector {
  std::set<std::string> keys;
  template <class T>
  void operator()(const char* key, T&) {
    keys.insert(key);
  }
};

template <class T>
void read_scalar(const Json& j, T& field, const std::string& path) {
  auto fail = [&](const char* expected) {
    throw ConfigError("config key '" + path + "' must be " + expected + ", got " + j.dump());
  };
  if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) fail("a boolean");
    field = j.get<bool>();
  } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) fail("a non-negative integer");
    field = j.get<T>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_integer()) fail("an integer");
    field = j.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!j.is_number()) fail("a number");
    field = j.get<T>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!j.is_string()) fail("a string");
    field = j.get<std::string>();
  } else {
    // vectors and arrays of scalars
    if (!j.is_array()) fail("an array");
    if constexpr (requires { field.resize(0); }) field.resize(j.size());
    if (j.size() != field.size()) fail(("an array of " + std::to_string(field.size()) + " elements").c_str());
    for (std::size_t i = 0; i < field.size(); ++i) read_scalar(j[i], field[i], path + "[" + std::to_string(i) + "]");
  }
}

struct JsonReader;
template <class C>
void read_struct(const Json& j, C& c, const std::string& path);

struct JsonReader {
  const Json& in;
  std::string path;
  template <class T>
  void operator()(const char* key, T& field) {
    if (!in.contains(key)) return;
    const std::string sub = path.empty() ? key : path + "." + key;
    if constexpr (requires(JsonWriter& w, T& f) { describe(w, f); }) {
      read_struct(in.at(key), field, sub);
    } else {
      read_scalar(in.at(key), field, sub);
    }
  }
};

template <class C>
void read_struct(const Json& j, C& c, const std::string& path) {
  if (!j.is_object()) throw ConfigError("config section '" + path + "' must be an object");
  KeyCollector keys;
  describe(keys, c);
  for (const auto& [k, v] : j.items()) {
    if (!keys.keys.count(k))
      throw ConfigError("unknown config key '" + (path.empty() ? k : path + "." + k) + "'");
  }
  JsonReader r{j, path};
  describe(r, c);
}

}  // namespace detail

template <class C>
Json to_json_value(const C& c) {
  detail::JsonWriter w;
  describe(w, const_cast<C&>(c));
  return w.out;
}

/// Overlays the keys present in `j` onto `c`.
template <class C>
void from_json_value(const Json& j, C& c, const std::string& path = "") {
  detail::read_struct(j, c, path);
}

}  // namespace golfsig
