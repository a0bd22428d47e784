#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dvsgait/errors.hpp"

namespace dvsgait {

// Flat key=value run configuration. '#' starts a comment; blank lines are
// skipped. Readers record which keys they consumed so a final
// ensure_all_consumed() can flag typos.
class Config {
 public:
  Config() = default;

  static Config from_string(const std::string& text, const std::string& what = "<config>") {
    Config cfg;
    cfg.what_ = what;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto strip = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
      };
      line = strip(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorKind::config_error,
                    what + ":" + std::to_string(line_no) + ": expected key=value");
      const std::string key = strip(line.substr(0, eq));
      const std::string value = strip(line.substr(eq + 1));
      if (key.empty())
        throw Error(ErrorKind::config_error,
                    what + ":" + std::to_string(line_no) + ": empty key");
      cfg.kv_[key] = value;
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorKind::config_error, "cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str(), path);
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    consumed_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    consumed_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::config_error, what_ + ": key " + key + " is not a number: '" +
                                               it->second + "'");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    consumed_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::config_error,
                  what_ + ": key " + key + " is not an integer: '" + it->second + "'");
    }
  }

  std::size_t get_size(const std::string& key, std::size_t fallback) const {
    return static_cast<std::size_t>(get_u64(key, fallback));
  }

  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const {
    consumed_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<double> out;
    std::istringstream in(it->second);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw Error(ErrorKind::config_error,
                    what_ + ": key " + key + " holds a bad list entry '" + tok + "'");
      }
    }
    if (out.empty())
      throw Error(ErrorKind::config_error, what_ + ": key " + key + " holds an empty list");
    return out;
  }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  // canonical text (sorted keys) for embedding into checkpoints
  std::string to_text() const {
    std::ostringstream out;
    for (const auto& [k, v] : kv_) out << k << "=" << v << "\n";
    return out.str();
  }

  void ensure_all_consumed() const {
    std::vector<std::string> unknown;
    for (const auto& [k, v] : kv_)
      if (!consumed_.count(k)) unknown.push_back(k);
    if (!unknown.empty()) {
      std::string msg = what_ + ": unknown keys:";
      for (const auto& k : unknown) msg += " " + k;
      throw Error(ErrorKind::config_error, msg);
    }
  }

 private:
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> consumed_;
  std::string what_ = "<config>";
};

}  // namespace dvsgait
