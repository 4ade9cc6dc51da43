#pragma once

// Sectioned key=value configuration files. Unknown keys and missing
// required keys are errors reported with the offending line number.

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace oneflow {

struct ConfigFile {
  // (section, key) -> (value, line number)
  std::map<std::pair<std::string, std::string>, std::pair<std::string, int>> entries;
  std::string text;  // raw contents, hashed for provenance

  bool has(const std::string& section, const std::string& key) const {
    return entries.count({section, key}) > 0;
  }

  std::string get(const std::string& section, const std::string& key) const {
    auto it = entries.find({section, key});
    if (it == entries.end()) {
      throw std::runtime_error("config: missing required key [" + section + "] " + key);
    }
    return it->second.first;
  }

  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const {
    auto it = entries.find({section, key});
    return it == entries.end() ? fallback : it->second.first;
  }

  double get_double(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::runtime_error("config: bad number for " + key + ": " + v);
    return x;
  }

  long long get_int(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::runtime_error("config: bad integer for " + key + ": " + v);
    return x;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline ConfigFile parse_config_text(const std::string& text) {
  ConfigFile cfg;
  cfg.text = text;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = detail::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               ": expected key = value");
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config: line " + std::to_string(lineno) + ": empty key");
    }
    if (cfg.entries.count({section, key})) {
      throw std::runtime_error("config: line " + std::to_string(lineno) + ": duplicate key " +
                               key);
    }
    cfg.entries[{section, key}] = {value, lineno};
  }
  return cfg;
}

inline ConfigFile parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

// Fails on any (section, key) pair outside the allowed schema.
inline void reject_unknown_keys(
    const ConfigFile& cfg,
    const std::map<std::string, std::set<std::string>>& schema) {
  for (const auto& [sk, vl] : cfg.entries) {
    const auto it = schema.find(sk.first);
    if (it == schema.end() || !it->second.count(sk.second)) {
      throw std::runtime_error("config: line " + std::to_string(vl.second) +
                               ": unknown key [" + sk.first + "] " + sk.second);
    }
  }
}

inline std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(detail::trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!detail::trim(cur).empty()) out.push_back(detail::trim(cur));
  return out;
}

}  // namespace oneflow
