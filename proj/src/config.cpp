#include "scglr/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "scglr/errors.hpp"

namespace scglr {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text,
                                     const std::string& what) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UserError(what + ": line " + std::to_string(lineno) +
                      " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw UserError(what + ": line " + std::to_string(lineno) +
                      " has an empty key");
    if (cfg.values_.count(key))
      throw UserError(what + ": duplicate key '" + key + "' at line " +
                      std::to_string(lineno));
    cfg.values_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::string KeyValueConfig::serialise() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

void KeyValueConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write config '" + path + "'");
  out << serialise();
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key,
                                  double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  char* end = nullptr;
  const double out = std::strtod(v->c_str(), &end);
  if (end == v->c_str() || *end != '\0')
    throw UserError("config key '" + key + "': '" + *v + "' is not a number");
  return out;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const double d = get_double(key, fallback);
  const int i = static_cast<int>(d);
  if (d != i)
    throw UserError("config key '" + key + "' must be an integer");
  return i;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw UserError("config key '" + key + "': '" + *v + "' is not a boolean");
}

std::vector<double> KeyValueConfig::get_list(const std::string& key) const {
  std::vector<double> out;
  const auto v = get(key);
  if (!v) return out;
  const auto colon = v->find(':');
  if (colon != std::string::npos && v->find(',') == std::string::npos) {
    const int lo = static_cast<int>(std::strtol(v->c_str(), nullptr, 10));
    const int hi = static_cast<int>(
        std::strtol(v->c_str() + colon + 1, nullptr, 10));
    if (hi < lo)
      throw UserError("config key '" + key + "': empty range '" + *v + "'");
    for (int x = lo; x <= hi; ++x) out.push_back(x);
    return out;
  }
  std::istringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double d = std::strtod(item.c_str(), &end);
    if (end == item.c_str())
      throw UserError("config key '" + key + "': '" + item +
                      "' is not a number");
    out.push_back(d);
  }
  return out;
}

}  // namespace scglr
