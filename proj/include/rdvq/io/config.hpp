#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rdvq {

// Line-oriented `[section]` / `key = value` configuration. Every key has a
// registered default; unknown sections or keys are rejected. Values may be
// overridden from the environment as RDVQ_<SECTION>_<KEY> (upper case).
class Config {
 public:
  // All registered keys at their defaults.
  Config();

  static Config parse(const std::string& text, const std::string& source = "<string>");
  static Config load(const std::string& path);

  // Applies RDVQ_* environment overrides; returns the number applied.
  int apply_env();

  void set(const std::string& section, const std::string& key, const std::string& value);
  bool has(const std::string& section, const std::string& key) const;

  const std::string& get(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  long get_int(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::vector<long> get_int_list(const std::string& section, const std::string& key) const;

  // Sorted, fully resolved text; parse(canonical()) reproduces the config.
  std::string canonical() const;
  uint64_t hash() const;

  static std::vector<std::pair<std::string, std::string>> registered_keys();

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace rdvq
