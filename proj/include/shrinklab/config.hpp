#ifndef SHRINKLAB_CONFIG_HPP_
#define SHRINKLAB_CONFIG_HPP_

// Flat experiment configuration: one `key = value` per line, `#` starts a
// comment. Values are numbers, booleans, "strings" or [lists] of those.
// The syntax is a subset of TOML, so shipped configs also parse as TOML.

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include "shrinklab/core.hpp"

namespace shrinklab {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ConfigValue {
  using Scalar = std::variant<double, bool, std::string>;
  std::variant<double, bool, std::string, std::vector<Scalar>> v;

  bool operator==(const ConfigValue&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline std::string format_scalar(const ConfigValue::Scalar& s) {
  if (const double* d = std::get_if<double>(&s)) return format_number(*d);
  if (const bool* b = std::get_if<bool>(&s)) return *b ? "true" : "false";
  return quote(std::get<std::string>(s));
}

class ValueParser {
 public:
  ValueParser(const std::string& text, const std::string& where) : s_(text), where_(where) {}

  ConfigValue parse() {
    ConfigValue out;
    skip();
    if (peek() == '[') {
      ++i_;
      std::vector<ConfigValue::Scalar> items;
      skip();
      if (peek() == ']') {
        ++i_;
      } else {
        for (;;) {
          items.push_back(scalar());
          skip();
          if (peek() == ',') {
            ++i_;
            skip();
            if (peek() == ']') {
              ++i_;
              break;
            }
            continue;
          }
          if (peek() == ']') {
            ++i_;
            break;
          }
          fail("expected ',' or ']' in list");
        }
      }
      out.v = std::move(items);
    } else {
      std::visit([&out](auto&& x) { out.v = x; }, scalar());
    }
    skip();
    if (i_ != s_.size()) fail("trailing characters after value");
    return out;
  }

 private:
  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
  void skip() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where_ + ": " + msg); }

  ConfigValue::Scalar scalar() {
    skip();
    if (peek() == '"') {
      ++i_;
      std::string out;
      while (i_ < s_.size() && s_[i_] != '"') {
        if (s_[i_] == '\\' && i_ + 1 < s_.size()) ++i_;
        out += s_[i_++];
      }
      if (peek() != '"') fail("unterminated string");
      ++i_;
      return out;
    }
    std::size_t j = i_;
    while (j < s_.size() && s_[j] != ',' && s_[j] != ']' && s_[j] != ' ' && s_[j] != '\t') ++j;
    const std::string tok = s_.substr(i_, j - i_);
    i_ = j;
    if (tok == "true") return true;
    if (tok == "false") return false;
    double x = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      fail("cannot parse value '" + tok + "' (strings must be quoted)");
    if (!std::isfinite(x)) fail("non-finite number");
    return x;
  }

  const std::string& s_;
  std::string where_;
  std::size_t i_ = 0;
};

}  // namespace detail

/// Ordered key -> value table with typed, validating accessors. Every
/// accessor marks its key as used; `reject_unused` turns leftovers into
/// errors so that misspelled keys never pass silently.
class ConfigTable {
 public:
  static ConfigTable parse(const std::string& text, const std::string& source = "config") {
    ConfigTable t;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string where = source + ":" + std::to_string(lineno);
      // strip comments outside strings
      bool in_str = false;
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
        if (line[i] == '#' && !in_str) {
          line.resize(i);
          break;
        }
      }
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') throw ConfigError(where + ": tables are not supported; use dotted keys");
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
      const std::string key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError(where + ": empty key");
      for (char c : key)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
          throw ConfigError(where + ": invalid character in key '" + key + "'");
      if (t.values_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
      t.values_[key] = detail::ValueParser(detail::trim(line.substr(eq + 1)), where + " (" + key + ")").parse();
      t.lines_[key] = lineno;
    }
    t.source_ = source;
    return t;
  }

  static ConfigTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  /// Canonical text: keys sorted, numbers in shortest round-trip form.
  std::string serialize() const {
    std::string out;
    for (const auto& [k, val] : values_) {
      out += k + " = ";
      if (const auto* list = std::get_if<std::vector<ConfigValue::Scalar>>(&val.v)) {
        out += "[";
        for (std::size_t i = 0; i < list->size(); ++i) out += (i ? ", " : "") + detail::format_scalar((*list)[i]);
        out += "]";
      } else {
        std::visit(
            [&out](auto&& x) {
              using T = std::decay_t<decltype(x)>;
              if constexpr (!std::is_same_v<T, std::vector<ConfigValue::Scalar>>) out += detail::format_scalar(x);
            },
            val.v);
      }
      out += "\n";
    }
    return out;
  }

  bool operator==(const ConfigTable& o) const { return values_ == o.values_; }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, ConfigValue>& values() const { return values_; }

  void set(const std::string& key, ConfigValue v) { values_[key] = std::move(v); }
  void set_number(const std::string& key, double x) { values_[key] = ConfigValue{x}; }
  void set_string(const std::string& key, std::string s) { values_[key] = ConfigValue{std::move(s)}; }

  double number(const std::string& key) const {
    const ConfigValue& v = get(key);
    if (const double* d = std::get_if<double>(&v.v)) return *d;
    fail(key, "expected a number");
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  long integer(const std::string& key) const {
    const double x = number(key);
    if (x != std::floor(x) || std::abs(x) > 9.0e15) fail(key, "expected an integer");
    return static_cast<long>(x);
  }
  long integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const long x = integer(key);
    if (x < 0) fail(key, "seed must be nonnegative");
    return static_cast<std::uint64_t>(x);
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const ConfigValue& v = get(key);
    if (const bool* b = std::get_if<bool>(&v.v)) return *b;
    fail(key, "expected true or false");
  }

  std::string string(const std::string& key) const {
    const ConfigValue& v = get(key);
    if (const std::string* s = std::get_if<std::string>(&v.v)) return *s;
    fail(key, "expected a quoted string");
  }
  std::string string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) const {
    const ConfigValue& v = get(key);
    if (const double* d = std::get_if<double>(&v.v)) return {*d};
    const auto* list = std::get_if<std::vector<ConfigValue::Scalar>>(&v.v);
    if (!list) fail(key, "expected a list of numbers");
    std::vector<double> out;
    for (const auto& s : *list) {
      const double* d = std::get_if<double>(&s);
      if (!d) fail(key, "expected a list of numbers");
      out.push_back(*d);
    }
    return out;
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? numbers(key) : fallback;
  }

  std::vector<std::string> strings(const std::string& key) const {
    const ConfigValue& v = get(key);
    if (const std::string* s = std::get_if<std::string>(&v.v)) return {*s};
    const auto* list = std::get_if<std::vector<ConfigValue::Scalar>>(&v.v);
    if (!list) fail(key, "expected a list of strings");
    std::vector<std::string> out;
    for (const auto& s : *list) {
      const std::string* str = std::get_if<std::string>(&s);
      if (!str) fail(key, "expected a list of strings");
      out.push_back(*str);
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) const {
    return has(key) ? strings(key) : fallback;
  }

  /// Throws on the first key that no accessor has asked for.
  void reject_unused() const {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) fail(k, "unknown key");
  }

 private:
  const ConfigValue& get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(source_ + ": missing required key '" + key + "'");
    used_.insert(key);
    return it->second;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const auto it = lines_.find(key);
    const std::string where = it != lines_.end() ? source_ + ":" + std::to_string(it->second) : source_;
    throw ConfigError(where + ": key '" + key + "': " + msg);
  }

  std::map<std::string, ConfigValue> values_;
  std::map<std::string, int> lines_;
  mutable std::set<std::string> used_;
  std::string source_ = "config";
};

}  // namespace shrinklab

#endif  // SHRINKLAB_CONFIG_HPP_
