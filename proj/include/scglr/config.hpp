#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace scglr {

// Flat key = value configuration text: one pair per line, '#' starts a
// comment, blank lines ignored, later duplicate keys rejected.
// Serialisation is canonical (sorted keys), so parse -> serialise ->
// parse is the identity on the map.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& what);
  static KeyValueConfig load(const std::string& path);
  std::string serialise() const;
  void save(const std::string& path) const;

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list of numbers; "a:b" expands to the integer range.
  std::vector<double> get_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace scglr
