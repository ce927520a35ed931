#pragma once

// Flat-table TOML subset used for run configuration: [section] headers,
// key = value lines (strings in double quotes, integers, floats, booleans),
// '#' comments. Every run writes back the resolved values it actually used,
// and that snapshot can be re-fed through --config.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace sidkit::cli {

class RunConfig {
 public:
  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string trimmed = trim(strip_comment(line));
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']')
          throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad section");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        continue;
      }
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      std::string value = trim(trimmed.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        value = value.substr(1, value.size() - 2);
      cfg.set(section.empty() ? key : section + "." + key, value);
    }
    return cfg;
  }

  void set(const std::string& dotted_key, const std::string& value) {
    values_[dotted_key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stoll(it->second);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stoull(it->second);
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stod(it->second);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::runtime_error("config key " + key + ": expected a boolean, got " + it->second);
  }

  // Canonical dump: sections sorted, keys sorted, strings quoted.
  std::string to_toml() const {
    std::map<std::string, std::map<std::string, std::string>> sections;
    for (const auto& [dotted, value] : values_) {
      const std::size_t dot = dotted.find('.');
      if (dot == std::string::npos)
        sections[""][dotted] = value;
      else
        sections[dotted.substr(0, dot)][dotted.substr(dot + 1)] = value;
    }
    std::ostringstream out;
    bool first = true;
    for (const auto& [section, entries] : sections) {
      if (!first) out << "\n";
      first = false;
      if (!section.empty()) out << "[" << section << "]\n";
      for (const auto& [key, value] : entries) out << key << " = " << render(value) << "\n";
    }
    return out.str();
  }

 private:
  static std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_string = !in_string;
      if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
  }

  static std::string trim(const std::string& s) {
    const std::size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const std::size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  }

  static bool plain_scalar(const std::string& v) {
    if (v == "true" || v == "false") return true;
    if (v.empty()) return false;
    char* end = nullptr;
    std::strtod(v.c_str(), &end);
    return end == v.c_str() + v.size();
  }

  static std::string render(const std::string& v) {
    return plain_scalar(v) ? v : "\"" + v + "\"";
  }

  std::map<std::string, std::string> values_;
};

}  // namespace sidkit::cli
