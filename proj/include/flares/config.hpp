// FLARES range-view LiDAR toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flares/error.hpp"

namespace flares {

/// One `[section]` block of a config file. Sections with the same name may
/// repeat (the class map uses one `[class]` block per train id).
struct ConfigSection {
  std::string name;
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback = "") const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw Error("config", "key '" + key + "' is not a number: '" + it->second + "'");
    }
  }

  long get_int(const std::string& key, long fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
      return std::stol(it->second);
    } catch (const std::exception&) {
      throw Error("config", "key '" + key + "' is not an integer: '" + it->second + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error("config", "key '" + key + "' is not a boolean: '" + v + "'");
  }
};

/// Parsed plain-text configuration: `key = value` lines, `#` comments,
/// optional `[section]` headers. Keys before the first header land in an
/// unnamed global section.
struct Config {
  ConfigSection globals;
  std::vector<ConfigSection> sections;

  /// First section with the given name; the globals when name is empty.
  const ConfigSection* find(const std::string& name) const {
    if (name.empty()) return &globals;
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }

  std::vector<const ConfigSection*> all(const std::string& name) const {
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections)
      if (s.name == name) out.push_back(&s);
    return out;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline Config parse_config(std::istream& in, const std::string& origin = "<stream>") {
  Config cfg;
  ConfigSection* current = &cfg.globals;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error("config", origin + ":" + std::to_string(lineno) + ": unterminated section header");
      cfg.sections.push_back({detail::trim(line.substr(1, line.size() - 2)), {}});
      current = &cfg.sections.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config", origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw Error("config", origin + ":" + std::to_string(lineno) + ": empty key");
    current->values[key] = value;
  }
  return cfg;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config", "cannot open config file: " + path);
  return parse_config(in, path);
}

/// Splits a comma-separated list, trimming each element.
inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace flares
