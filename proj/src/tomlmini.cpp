#include "mlap/tomlmini.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mlap::toml {

namespace {

[[noreturn]] void fail(const std::string& name, std::size_t line,
                       const std::string& msg) {
  throw std::runtime_error("config parse error at " + name + ":" +
                           std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

/// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
          c == '.'))
      return false;
  return true;
}

Value parse_scalar(const std::string& raw, const std::string& name,
                   std::size_t line) {
  Value v;
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    v.type = Value::Type::String;
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 2 < raw.size()) {
        ++i;
        switch (raw[i]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(name, line, std::string("unknown escape \\") + raw[i]);
        }
      } else if (raw[i] == '"') {
        fail(name, line, "unescaped quote inside string");
      } else {
        out += raw[i];
      }
    }
    v.s = out;
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.type = Value::Type::Bool;
    v.b = raw == "true";
    return v;
  }
  const bool looks_float = raw.find_first_of(".eE") != std::string::npos &&
                           raw.find("0x") != 0;
  if (!looks_float) {
    long long iv = 0;
    auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), iv);
    if (ec == std::errc() && p == raw.data() + raw.size()) {
      v.type = Value::Type::Int;
      v.i = iv;
      return v;
    }
  }
  try {
    std::size_t pos = 0;
    const double fv = std::stod(raw, &pos);
    if (pos == raw.size()) {
      v.type = Value::Type::Float;
      v.f = fv;
      return v;
    }
  } catch (const std::exception&) {
  }
  fail(name, line, "cannot parse value '" + raw + "'");
}

Value parse_value(const std::string& raw, const std::string& name,
                  std::size_t line) {
  if (!raw.empty() && raw.front() == '[') {
    if (raw.back() != ']') fail(name, line, "unterminated array");
    Value v;
    v.type = Value::Type::Array;
    const std::string body = trim(raw.substr(1, raw.size() - 2));
    if (body.empty()) return v;
    // split on commas outside quotes
    std::vector<std::string> parts;
    std::string cur;
    bool in_str = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const char c = body[i];
      if (c == '"' && (i == 0 || body[i - 1] != '\\')) in_str = !in_str;
      if (c == ',' && !in_str) {
        parts.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(trim(cur));
    for (const auto& p : parts) {
      if (p.empty()) fail(name, line, "empty array element");
      v.arr.push_back(parse_scalar(p, name, line));
    }
    return v;
  }
  return parse_scalar(raw, name, line);
}

}  // namespace

std::string Value::as_string() const {
  if (type != Type::String) throw std::runtime_error("config value is not a string");
  return s;
}

long long Value::as_int() const {
  if (type != Type::Int) throw std::runtime_error("config value is not an integer");
  return i;
}

double Value::as_double() const {
  if (type == Type::Float) return f;
  if (type == Type::Int) return static_cast<double>(i);
  throw std::runtime_error("config value is not a number");
}

bool Value::as_bool() const {
  if (type != Type::Bool) throw std::runtime_error("config value is not a boolean");
  return b;
}

const std::vector<Value>& Value::as_array() const {
  if (type != Type::Array) throw std::runtime_error("config value is not an array");
  return arr;
}

const Value& Table::at(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end())
    throw std::runtime_error("missing required config key '" + key + "'");
  return it->second;
}

std::string Table::get_string(const std::string& key,
                              const std::string& fallback) const {
  return has(key) ? at(key).as_string() : fallback;
}

long long Table::get_int(const std::string& key, long long fallback) const {
  return has(key) ? at(key).as_int() : fallback;
}

double Table::get_double(const std::string& key, double fallback) const {
  return has(key) ? at(key).as_double() : fallback;
}

bool Table::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? at(key).as_bool() : fallback;
}

std::vector<double> Table::get_double_array(
    const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& v : at(key).as_array()) out.push_back(v.as_double());
  return out;
}

std::vector<long long> Table::get_int_array(
    const std::string& key, const std::vector<long long>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<long long> out;
  for (const auto& v : at(key).as_array()) out.push_back(v.as_int());
  return out;
}

std::vector<std::string> Table::get_string_array(
    const std::string& key, const std::vector<std::string>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::string> out;
  for (const auto& v : at(key).as_array()) out.push_back(v.as_string());
  return out;
}

Table parse_string(const std::string& text, const std::string& name) {
  Table table;
  std::istringstream in(text);
  std::string line;
  std::string prefix;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') fail(name, lineno, "unterminated section header");
      const std::string sec = trim(body.substr(1, body.size() - 2));
      if (!valid_key(sec)) fail(name, lineno, "invalid section name '" + sec + "'");
      prefix = sec + ".";
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) fail(name, lineno, "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    if (!valid_key(key)) fail(name, lineno, "invalid key '" + key + "'");
    const std::string raw = trim(body.substr(eq + 1));
    if (raw.empty()) fail(name, lineno, "missing value for key '" + key + "'");
    const std::string full = prefix + key;
    if (table.values.count(full)) fail(name, lineno, "duplicate key '" + full + "'");
    table.values.emplace(full, parse_value(raw, name, lineno));
  }
  return table;
}

Table parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

}  // namespace mlap::toml
