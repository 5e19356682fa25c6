#include "covsketch/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "covsketch/errors.hpp"

namespace covsketch {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

// Drops a trailing # comment that is not inside quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

double to_double(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (trim(raw.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected a number, got '" + raw + "'");
}

long long to_int(const std::string& key, const std::string& raw) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(raw, &used);
    if (trim(raw.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected an integer, got '" + raw + "'");
}

std::vector<std::string> split_array(const std::string& key, const std::string& raw) {
  std::string body = trim(raw);
  if (body.empty() || body.front() != '[') return {body};
  if (body.back() != ']') throw ConfigError("config key '" + key + "': unterminated array");
  body = body.substr(1, body.size() - 2);
  std::vector<std::string> items;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(unquote(item));
  }
  return items;
}

}  // namespace

ConfigMap ConfigMap::parse(std::istream& in) {
  ConfigMap cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    cfg.values_[key] = unquote(trim(line.substr(eq + 1)));
  }
  return cfg;
}

ConfigMap ConfigMap::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

ConfigMap ConfigMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse(in);
}

const std::string* ConfigMap::find(const std::string& key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string ConfigMap::get_string(const std::string& key, std::optional<std::string> fallback) const {
  if (const auto* v = find(key)) return *v;
  if (fallback) return *fallback;
  throw ConfigError("missing config key '" + key + "'");
}

double ConfigMap::get_double(const std::string& key, std::optional<double> fallback) const {
  if (const auto* v = find(key)) return to_double(key, *v);
  if (fallback) return *fallback;
  throw ConfigError("missing config key '" + key + "'");
}

long long ConfigMap::get_int(const std::string& key, std::optional<long long> fallback) const {
  if (const auto* v = find(key)) return to_int(key, *v);
  if (fallback) return *fallback;
  throw ConfigError("missing config key '" + key + "'");
}

bool ConfigMap::get_bool(const std::string& key, std::optional<bool> fallback) const {
  if (const auto* v = find(key)) {
    std::string s = *v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + *v + "'");
  }
  if (fallback) return *fallback;
  throw ConfigError("missing config key '" + key + "'");
}

std::vector<double> ConfigMap::get_doubles(const std::string& key, std::optional<std::vector<double>> fallback) const {
  if (const auto* v = find(key)) {
    std::vector<double> out;
    for (const auto& item : split_array(key, *v)) out.push_back(to_double(key, item));
    return out;
  }
  if (fallback) return *fallback;
  throw ConfigError("missing config key '" + key + "'");
}

std::vector<long long> ConfigMap::get_ints(const std::string& key, std::optional<std::vector<long long>> fallback) const {
  if (const auto* v = find(key)) {
    std::vector<long long> out;
    for (const auto& item : split_array(key, *v)) out.push_back(to_int(key, item));
    return out;
  }
  if (fallback) return *fallback;
  throw ConfigError("missing config key '" + key + "'");
}

}  // namespace covsketch
