// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "emitter/common.hpp"

namespace emitter {

// Flat `key = value` text configuration. Lines starting with '#' are comments.
// Every lookup marks the key as consumed so that leftover (unknown) keys can be
// rejected once all readers have run.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>") {
    KeyValueConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto text = trim(line);
      if (text.empty() || text.front() == '#') continue;
      const auto eq = text.find('=');
      if (eq == std::string::npos) {
        throw FormatError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
      }
      auto key = trim(text.substr(0, eq));
      auto value = trim(text.substr(eq + 1));
      if (key.empty()) throw FormatError(source + ":" + std::to_string(line_no) + ": empty key");
      if (cfg.values_.count(key)) {
        throw FormatError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
      }
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> take(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return take(key).value_or(fallback);
  }

  std::string require_string(const std::string& key) const {
    auto v = take(key);
    if (!v) throw ConfigError("missing required key '" + key + "'");
    return *v;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = take(key);
    if (!v) return fallback;
    double out = 0.0;
    if (!parse_double(*v, out)) throw ConfigError("key '" + key + "': '" + *v + "' is not a number");
    return out;
  }

  template <typename Int>
  Int get_int(const std::string& key, Int fallback) const {
    auto v = take(key);
    if (!v) return fallback;
    Int out{};
    if (!parse_int(*v, out)) throw ConfigError("key '" + key + "': '" + *v + "' is not an integer");
    return out;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = take(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("key '" + key + "': '" + *v + "' is not a boolean");
  }

  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const {
    auto v = take(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& tok : split_list(*v)) {
      double d = 0.0;
      if (!parse_double(tok, d)) throw ConfigError("key '" + key + "': '" + tok + "' is not a number");
      out.push_back(d);
    }
    return out;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
  }

  void reject_unknown() const {
    std::string unknown;
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    }
    if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
  }

  static std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
      if (c == ',' || c == ' ' || c == '\t') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace emitter
