#pragma once

#include <map>
#include <string>
#include <vector>

namespace plshield::harness {

/// `key = value` configuration text; '#' starts a comment.
class KvConfig {
 public:
  static KvConfig from_file(const std::string& path);
  static KvConfig from_text(const std::string& text, const std::string& name = "<text>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  long get_long(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Later entries override earlier ones.
  void merge(const KvConfig& other);

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Sorted `key=value` lines; the basis of configuration fingerprints.
  std::string canonical() const;
  uint64_t fingerprint() const;

 private:
  std::map<std::string, std::string> values_;
  std::string name_;
};

/// "x,y; x,y; ..." -> list of integer pairs.
std::vector<std::pair<int, int>> parse_cells(const std::string& text);
std::vector<uint64_t> parse_u64_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

}  // namespace plshield::harness
