#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rdvq/simd/kernels.hpp"

namespace rdvq::simd {

namespace {

bool cpu_has_avx2() {
#if defined(RDVQ_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Level initial_level() {
  Level level = cpu_has_avx2() ? Level::kAvx2 : Level::kScalar;
  if (const char* env = std::getenv("RDVQ_SIMD")) {
    const Level wanted = parse_level(env);
    if (wanted == Level::kScalar || cpu_has_avx2()) level = wanted;
  }
  return level;
}

std::atomic<Level>& current() {
  static std::atomic<Level> level{initial_level()};
  return level;
}

template <typename T>
KernelTable<T> scalar_table() {
  return {&scalar::gemm<T>, &scalar::dot<T>, &scalar::sqdist<T>, &scalar::axpy<T>};
}

}  // namespace

bool level_supported(Level level) { return level == Level::kScalar || cpu_has_avx2(); }

Level active_level() { return current().load(); }

void set_active_level(Level level) {
  if (!level_supported(level))
    throw std::invalid_argument(std::string("SIMD level not supported: ") + level_name(level));
  current() = level;
}

const char* level_name(Level level) { return level == Level::kAvx2 ? "avx2" : "scalar"; }

Level parse_level(const std::string& name) {
  if (name == "scalar") return Level::kScalar;
  if (name == "avx2") return Level::kAvx2;
  throw std::invalid_argument("unknown SIMD level '" + name + "' (expected scalar|avx2)");
}

template <>
const KernelTable<float>& kernel_table<float>(Level level) {
  static const KernelTable<float> scalar_k = scalar_table<float>();
#if defined(RDVQ_HAVE_AVX2)
  static const KernelTable<float> avx2_k = {&avx2::gemm_f32, &avx2::dot_f32, &avx2::sqdist_f32,
                                            &avx2::axpy_f32};
  if (level == Level::kAvx2) return avx2_k;
#else
  (void)level;
#endif
  return scalar_k;
}

template <>
const KernelTable<double>& kernel_table<double>(Level level) {
  static const KernelTable<double> scalar_k = scalar_table<double>();
#if defined(RDVQ_HAVE_AVX2)
  // No packed double GEMM; double precision is only used by gradient tests.
  static const KernelTable<double> avx2_k = {&scalar::gemm<double>, &avx2::dot_f64,
                                             &avx2::sqdist_f64, &avx2::axpy_f64};
  if (level == Level::kAvx2) return avx2_k;
#else
  (void)level;
#endif
  return scalar_k;
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* in, T* out) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock)
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t r1 = std::min(rows, r0 + kBlock), c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = in[r * cols + c];
    }
}

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  const auto& kt = kernels<T>();
  std::vector<T> at, bt;
  if (trans_a) {
    at.resize(m * k);
    transpose(k, m, a, at.data());
    a = at.data();
  }
  if (trans_b) {
    bt.resize(k * n);
    transpose(n, k, b, bt.data());
    b = bt.data();
  }
  kt.gemm(m, n, k, a, b, c, accumulate);
}

template <typename T>
std::pair<std::size_t, T> nearest_row(const T* x, const T* table, std::size_t rows,
                                      std::size_t dim) {
  const auto& kt = kernels<T>();
  std::size_t best = 0;
  T best_d = std::numeric_limits<T>::infinity();
  for (std::size_t r = 0; r < rows; ++r) {
    const T d = kt.sqdist(dim, x, table + r * dim);
    if (d < best_d) {
      best_d = d;
      best = r;
    }
  }
  return {best, best_d};
}

template void transpose<float>(std::size_t, std::size_t, const float*, float*);
template void transpose<double>(std::size_t, std::size_t, const double*, double*);
template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                          const float*, float*, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                           const double*, double*, bool);
template std::pair<std::size_t, float> nearest_row<float>(const float*, const float*, std::size_t,
                                                          std::size_t);
template std::pair<std::size_t, double> nearest_row<double>(const double*, const double*,
                                                            std::size_t, std::size_t);

}  // namespace rdvq::simd
