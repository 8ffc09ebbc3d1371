#pragma once

// Flat key-value run configuration.
//
//   # comment
//   [env.component]
//   horizon = 10
//   cost.test = -10000
//
// Section headers prefix the keys that follow ("env.component.horizon").
// Every lookup records the value actually used, so the resolved file lists
// all defaults that were applied.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace pdt {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  // Keys that were set but never looked up; typically typos.
  std::map<std::string, std::string> unused() const;

  // Resolved key-value pairs in sorted order, one "key = value" per line.
  void write_resolved(std::ostream& out) const;

 private:
  const std::string* raw(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> resolved_;
};

}  // namespace pdt
