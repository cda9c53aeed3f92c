#include "rdvq/common.hpp"

#include <atomic>
#include <iostream>

namespace rdvq {

namespace {
std::atomic<int> g_verbosity{1};
}

void set_log_verbosity(int level) { g_verbosity = level; }
int log_verbosity() { return g_verbosity; }

void log_info(const std::string& msg) {
  if (g_verbosity > 0) std::cerr << "LOG: " << msg << '\n';
}

void log_warn(const std::string& msg) { std::cerr << "WARNING: " << msg << '\n'; }

uint64_t fnv1a64(const void* data, std::size_t n, uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace rdvq
