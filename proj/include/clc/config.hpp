#pragma once

// Line-oriented `key = value` configuration with dotted section prefixes.
// '#' starts a comment; blank lines are ignored; duplicate keys are errors.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "clc/errors.hpp"

namespace clc {

class Config {
 public:
  static Config parse(std::string_view text, const std::string& origin = "<config>") {
    Config cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos)
        line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) {
        if (end == text.size()) break;
        continue;
      }
      const auto eq = line.find('=');
      const std::string where = origin + ":" + std::to_string(line_no);
      if (eq == std::string_view::npos)
        throw ConfigError(where + ": expected `key = value`");
      const std::string key(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      if (key.empty()) throw ConfigError(where + ": empty key");
      if (!cfg.values_.emplace(key, value).second)
        throw ConfigError(where + ": duplicate key '" + key + "'");
      cfg.order_.push_back(key);
      if (end == text.size()) break;
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  /// Sets or replaces a key (command-line overrides).
  void set(const std::string& key, const std::string& value) {
    if (values_.insert_or_assign(key, value).second) order_.push_back(key);
  }

  const std::string& raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }

  /// Keys in file order.
  const std::vector<std::string>& keys() const { return order_; }

  double get_double(const std::string& key) const { return to_double(key, raw(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long long get_int(const std::string& key) const {
    const std::string& s = raw(key);
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError("key '" + key + "': expected an integer, got '" + s + "'");
    return v;
  }
  long long get_int(const std::string& key, long long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = raw(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + s + "'");
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? raw(key) : fallback;
  }

  /// Comma-separated list of reals.
  std::vector<double> get_list(const std::string& key) const {
    std::vector<double> out;
    std::string_view s = raw(key);
    while (true) {
      const auto comma = s.find(',');
      const std::string item(trim(s.substr(0, comma)));
      if (item.empty()) throw ConfigError("key '" + key + "': empty list element");
      out.push_back(to_double(key, item));
      if (comma == std::string_view::npos) break;
      s = s.substr(comma + 1);
    }
    return out;
  }
  std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? get_list(key) : fallback;
  }

  std::vector<std::string> get_words(const std::string& key,
                                     std::vector<std::string> fallback) const {
    if (!has(key)) return fallback;
    std::vector<std::string> out;
    std::string_view s = raw(key);
    while (true) {
      const auto comma = s.find(',');
      const std::string item(trim(s.substr(0, comma)));
      if (item.empty()) throw ConfigError("key '" + key + "': empty list element");
      out.push_back(item);
      if (comma == std::string_view::npos) break;
      s = s.substr(comma + 1);
    }
    return out;
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static double to_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
      throw ConfigError("key '" + key + "': expected a finite number, got '" + s + "'");
    return v;
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

}  // namespace clc
