#include "hqclab/cli/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hqclab::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_plain(const std::string& t) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + t + "'");
  }
  if (used != t.size()) throw ConfigError("not a number: '" + t + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

double parse_number(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("empty number");
  if (auto p = t.find('^'); p != std::string::npos)
    return std::pow(parse_plain(trim(t.substr(0, p))), parse_plain(trim(t.substr(p + 1))));
  if (auto p = t.find('/'); p != std::string::npos) {
    const double den = parse_plain(trim(t.substr(p + 1)));
    if (den == 0.0) throw ConfigError("division by zero in '" + t + "'");
    return parse_plain(trim(t.substr(0, p))) / den;
  }
  return parse_plain(t);
}

Config Config::parse(std::istream& in, const std::string& source) {
  Config c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (c.has(key)) throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    c.values_[key] = value;
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in, path);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return parse_number(it->second);
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

long Config::get_int(const std::string& key, long fallback) const {
  const double v = get_double(key, double(fallback));
  if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError("key '" + key + "' must be an integer");
  return static_cast<long>(v);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t used = 0;
  std::uint64_t v = 0;
  if (it->second.empty() || !std::isdigit(static_cast<unsigned char>(it->second.front())))
    throw ConfigError("key '" + key + "' must be an unsigned 64-bit integer");
  try {
    v = std::stoull(it->second, &used);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' must be an unsigned 64-bit integer");
  }
  if (used != it->second.size()) throw ConfigError("key '" + key + "' must be an unsigned 64-bit integer");
  return v;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) {
    try {
      out.push_back(parse_number(item));
    } catch (const ConfigError& e) {
      throw ConfigError("key '" + key + "': " + e.what());
    }
  }
  if (out.empty()) throw ConfigError("key '" + key + "' needs at least one value");
  return out;
}

std::vector<long> Config::get_ints(const std::string& key, const std::vector<long>& fallback) const {
  if (!has(key)) return fallback;
  std::vector<long> out;
  for (double v : get_doubles(key, {})) {
    if (v != std::floor(v)) throw ConfigError("key '" + key + "' must list integers");
    out.push_back(static_cast<long>(v));
  }
  return out;
}

void Config::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [k, v] : values_)
    if (!allowed.count(k)) throw ConfigError("unknown config key '" + k + "'");
}

}  // namespace hqclab::cli
