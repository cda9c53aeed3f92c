#include "rdvq/io/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rdvq/common.hpp"

extern char** environ;

namespace rdvq {

namespace {

struct Entry {
  const char* section;
  const char* key;
  const char* value;
};

// Desk-scale defaults. Paper-scale values are expressible through the same keys.
constexpr Entry kDefaults[] = {
    {"model", "input_bins", "40"},
    {"model", "conv0_width", "1"},
    {"model", "widths", "64,128,256,256"},
    {"model", "strides", "1,2,2,2"},
    {"model", "convs_per_block", "2"},
    {"model", "kernel_width", "9"},
    {"model", "batchnorm", "true"},
    {"model", "embed_dim", "256"},
    {"model", "image_dim", "64"},
    {"quantizer", "codebook_size", "1024"},
    {"quantizer", "gamma", "0.99"},
    {"quantizer", "jitter", "0.12"},
    {"quantizer", "eps_smooth", "1e-05"},
    {"quantizer", "reinit_dead_codes", "false"},
    {"train", "lr", "0.0002"},
    {"train", "lr_decay", "0.95"},
    {"train", "decay_every", "3"},
    {"train", "batch_size", "32"},
    {"train", "epochs", "30"},
    {"train", "seed", "1"},
    {"train", "adam_beta1", "0.9"},
    {"train", "adam_beta2", "0.999"},
    {"train", "adam_eps", "1e-08"},
    {"train", "recall_n", "10"},
    {"eval", "metric", "cosine"},
    {"eval", "unit_embedding", "codebook"},
    {"eval", "speaker_mode", "across"},
    {"eval", "aggregation", "cell"},
    {"eval", "max_triples", "5000"},
    {"eval", "threads", "1"},
    {"eval", "word_match", "midpoint"},
    {"synth", "phones", "12"},
    {"synth", "words", "40"},
    {"synth", "speakers", "20"},
    {"synth", "train_utts", "2000"},
    {"synth", "val_utts", "200"},
    {"synth", "image_dim", "64"},
    {"synth", "min_words", "4"},
    {"synth", "max_words", "8"},
    {"synth", "min_phone_frames", "6"},
    {"synth", "max_phone_frames", "12"},
    {"synth", "zipf", "1.0"},
    {"synth", "function_words", "4"},
    {"synth", "frame_noise", "0.5"},
    {"synth", "image_noise", "0.1"},
    {"synth", "template_margin", "3.0"},
    {"synth", "seed", "1"},
};

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\'')))
    return v.substr(1, v.size() - 2);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
    std::string inner = v.substr(1, v.size() - 2), out;
    for (char c : inner)
      if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
    return out;
  }
  return v;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

Config::Config() {
  for (const auto& e : kDefaults) values_[e.section][e.key] = e.value;
}

std::vector<std::pair<std::string, std::string>> Config::registered_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : kDefaults) out.emplace_back(e.section, e.key);
  return out;
}

bool Config::has(const std::string& section, const std::string& key) const {
  auto it = values_.find(section);
  return it != values_.end() && it->second.count(key) > 0;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  if (!has(section, key)) throw DataError("unknown config key '" + section + "." + key + "'");
  values_[section][key] = value;
}

Config Config::parse(const std::string& text, const std::string& source) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw DataError(str_cat(source, ":", lineno, ": malformed section header"));
      section = trim(line.substr(1, line.size() - 2));
      if (!cfg.values_.count(section))
        throw DataError(str_cat(source, ":", lineno, ": unknown section [", section, "]"));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(str_cat(source, ":", lineno, ": expected 'key = value'"));
    if (section.empty())
      throw DataError(str_cat(source, ":", lineno, ": key outside of a [section]"));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    if (!cfg.has(section, key))
      throw DataError(str_cat(source, ":", lineno, ": unknown key '", key, "' in [", section, "]"));
    cfg.values_[section][key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

int Config::apply_env() {
  // A variable naming a known section but no known key is almost always a typo.
  for (char** e = environ; *e; ++e) {
    const std::string entry = *e;
    const std::string name = entry.substr(0, entry.find('='));
    for (const auto& [section, keys] : values_) {
      const std::string prefix = "RDVQ_" + upper(section) + "_";
      if (name.rfind(prefix, 0) != 0) continue;
      bool known = false;
      for (const auto& [key, value] : keys) known = known || name == prefix + upper(key);
      if (!known) throw DataError("environment variable " + name + " names no config key");
    }
  }
  int applied = 0;
  for (auto& [section, keys] : values_)
    for (auto& [key, value] : keys) {
      const std::string name = "RDVQ_" + upper(section) + "_" + upper(key);
      if (const char* v = std::getenv(name.c_str())) {
        value = unquote(trim(v));
        ++applied;
      }
    }
  return applied;
}

const std::string& Config::get(const std::string& section, const std::string& key) const {
  auto s = values_.find(section);
  if (s == values_.end() || !s->second.count(key))
    throw DataError("unknown config key '" + section + "." + key + "'");
  return s->second.at(key);
}

double Config::get_double(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0')
    throw DataError("config " + section + "." + key + ": expected a number, got '" + v + "'");
  return d;
}

long Config::get_int(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  char* end = nullptr;
  const long n = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0')
    throw DataError("config " + section + "." + key + ": expected an integer, got '" + v + "'");
  return n;
}

bool Config::get_bool(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw DataError("config " + section + "." + key + ": expected true/false, got '" + v + "'");
}

std::vector<long> Config::get_int_list(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  std::vector<long> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    char* end = nullptr;
    const long n = std::strtol(item.c_str(), &end, 10);
    if (item.empty() || *end != '\0')
      throw DataError("config " + section + "." + key + ": bad list element '" + item + "'");
    out.push_back(n);
  }
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [section, keys] : values_) {
    out += "[" + section + "]\n";
    for (const auto& [key, value] : keys) out += key + " = " + value + "\n";
  }
  return out;
}

uint64_t Config::hash() const { return fnv1a64(canonical()); }

}  // namespace rdvq
