#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "tomo/types.hpp"

namespace tomo {

// Flat "key = value" text with optional [section] headers. Keys are stored
// as "section.key"; keys above the first header have no prefix. Lines
// starting with '#' or ';' are comments.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string str(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;  // ConfigError if absent
  double num(const std::string& key, double fallback) const;
  long long integer(const std::string& key, long long fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> list(const std::string& key) const;  // comma separated

  // ConfigError naming the first key not in `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Complex matrices as nested [re, im] pairs, row major.
nlohmann::json matrix_to_json(const Mat& m);
Mat matrix_from_json(const nlohmann::json& j);

// "-" or empty writes to stdout.
void write_output(const std::string& path, const std::string& content);

}  // namespace tomo
