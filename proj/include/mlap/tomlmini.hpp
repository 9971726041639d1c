#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mlap::toml {

/// Minimal TOML-subset document model: [section] headers flatten to dotted
/// keys; values are strings, integers, floats, booleans, or single-line
/// arrays of those.
struct Value {
  enum class Type { String, Int, Float, Bool, Array };
  Type type = Type::String;
  std::string s;
  long long i = 0;
  double f = 0.0;
  bool b = false;
  std::vector<Value> arr;

  std::string as_string() const;
  long long as_int() const;
  double as_double() const;  // accepts Int
  bool as_bool() const;
  const std::vector<Value>& as_array() const;
};

struct Table {
  std::map<std::string, Value> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  const Value& at(const std::string& key) const;  // throws naming the key

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_array(const std::string& key,
                                       const std::vector<double>& fallback) const;
  std::vector<long long> get_int_array(const std::string& key,
                                       const std::vector<long long>& fallback) const;
  std::vector<std::string> get_string_array(
      const std::string& key, const std::vector<std::string>& fallback) const;
};

/// Parse errors carry file:line diagnostics.
Table parse_string(const std::string& text, const std::string& name = "<string>");
Table parse_file(const std::string& path);

}  // namespace mlap::toml
