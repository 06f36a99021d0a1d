#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hqclab::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` configuration with `#` comments.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  /// Accepts decimals, fractions `a/b` and powers `b^e`.
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<long> get_ints(const std::string& key, const std::vector<long>& fallback) const;

  /// Throws ConfigError naming the first key outside `allowed`.
  void require_known(const std::set<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> values_;
};

double parse_number(const std::string& text);

}  // namespace hqclab::cli
