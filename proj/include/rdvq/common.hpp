#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rdvq {

using Rng = std::mt19937_64;

// Bad flags or arguments on the command line. Maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data. Maps to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t batch)
      : std::runtime_error(what), batch_(batch) {}
  std::size_t batch() const { return batch_; }

 private:
  std::size_t batch_;
};

namespace detail {
inline void append(std::ostringstream&) {}
template <typename Head, typename... Tail>
void append(std::ostringstream& os, const Head& h, const Tail&... t) {
  os << h;
  append(os, t...);
}
}  // namespace detail

template <typename... Args>
std::string str_cat(const Args&... args) {
  std::ostringstream os;
  detail::append(os, args...);
  return os.str();
}

// Verbosity is process-wide; 0 silences info lines.
void set_log_verbosity(int level);
int log_verbosity();
void log_info(const std::string& msg);
void log_warn(const std::string& msg);

uint64_t fnv1a64(const void* data, std::size_t n, uint64_t seed = 14695981039346656037ull);
inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace rdvq
