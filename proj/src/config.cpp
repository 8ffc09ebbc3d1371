#include "pdt/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "pdt/belief_mdp.hpp"
#include "pdt/error.hpp"

namespace pdt {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
  KeyValueConfig cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in);
}

const std::string* KeyValueConfig::raw(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  double v = fallback;
  if (const auto* s = raw(key)) {
    auto res = std::from_chars(s->data(), s->data() + s->size(), v);
    if (res.ec != std::errc{} || res.ptr != s->data() + s->size())
      throw ConfigError(key + ": not a number: '" + *s + "'");
  }
  resolved_[key] = format_double(v);
  return v;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  std::int64_t v = fallback;
  if (const auto* s = raw(key)) {
    auto res = std::from_chars(s->data(), s->data() + s->size(), v);
    if (res.ec != std::errc{} || res.ptr != s->data() + s->size())
      throw ConfigError(key + ": not an integer: '" + *s + "'");
  }
  resolved_[key] = std::to_string(v);
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  bool v = fallback;
  if (const auto* s = raw(key)) {
    if (*s == "true" || *s == "1" || *s == "yes") {
      v = true;
    } else if (*s == "false" || *s == "0" || *s == "no") {
      v = false;
    } else {
      throw ConfigError(key + ": not a boolean: '" + *s + "'");
    }
  }
  resolved_[key] = v ? "true" : "false";
  return v;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto* s = raw(key);
  std::string v = s ? *s : fallback;
  resolved_[key] = v;
  return v;
}

std::map<std::string, std::string> KeyValueConfig::unused() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : values_)
    if (!resolved_.count(k)) out.emplace(k, v);
  return out;
}

void KeyValueConfig::write_resolved(std::ostream& out) const {
  for (const auto& [k, v] : resolved_) out << k << " = " << v << '\n';
}

}  // namespace pdt
