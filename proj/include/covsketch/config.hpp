#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace covsketch {

// Flat key=value configuration in the TOML subset we need: comments (#),
// optional [section] headers (keys become "section.key"), quoted strings,
// numbers, booleans and one-line arrays such as `m = [40, 80, 160]`.
class ConfigMap {
 public:
  static ConfigMap parse(std::istream& in);
  static ConfigMap parse_string(const std::string& text);
  static ConfigMap load(const std::string& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, std::optional<std::string> fallback = std::nullopt) const;
  double get_double(const std::string& key, std::optional<double> fallback = std::nullopt) const;
  long long get_int(const std::string& key, std::optional<long long> fallback = std::nullopt) const;
  bool get_bool(const std::string& key, std::optional<bool> fallback = std::nullopt) const;
  std::vector<double> get_doubles(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt) const;
  std::vector<long long> get_ints(const std::string& key, std::optional<std::vector<long long>> fallback = std::nullopt) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  const std::string* find(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

}  // namespace covsketch
