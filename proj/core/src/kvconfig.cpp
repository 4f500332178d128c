#include "plshield/harness/kvconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "plshield/common.hpp"

namespace plshield::harness {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KvConfig KvConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), path);
}

KvConfig KvConfig::from_text(const std::string& text, const std::string& name) {
  KvConfig cfg;
  cfg.name_ = name;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

const std::string& KvConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(name_ + ": missing required key '" + key + "'");
  return it->second;
}

std::string KvConfig::get_or(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long KvConfig::get_long(const std::string& key, long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  const long v = std::strtol(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0')
    throw ConfigError(name_ + ": key '" + key + "' is not an integer: " + it->second);
  return v;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0')
    throw ConfigError(name_ + ": key '" + key + "' is not a number: " + it->second);
  return v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw ConfigError(name_ + ": key '" + key + "' is not a boolean: " + it->second);
}

void KvConfig::merge(const KvConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KvConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

uint64_t KvConfig::fingerprint() const {
  const std::string c = canonical();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : c) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::pair<int, int>> parse_cells(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ';')) {
    const size_t comma = part.find(',');
    if (comma == std::string::npos) {
      if (part.find_first_not_of(" \t") == std::string::npos) continue;
      throw ConfigError("expected 'x,y' cell, got '" + part + "'");
    }
    out.emplace_back(std::atoi(part.substr(0, comma).c_str()),
                     std::atoi(part.substr(comma + 1).c_str()));
  }
  return out;
}

std::vector<uint64_t> parse_u64_list(const std::string& text) {
  std::vector<uint64_t> out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (part.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(std::strtoull(part.c_str(), nullptr, 10));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (part.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(std::strtod(part.c_str(), nullptr));
  }
  return out;
}

}  // namespace plshield::harness
