#pragma once

// Inner-loop arithmetic used by the network, the quantizer and the
// evaluators. Every kernel has a portable scalar reference; an AVX2/FMA
// variant is picked at runtime when the CPU supports it. Both are exposed so
// tests can compare them directly.

#include <cstddef>
#include <string>
#include <utility>

namespace rdvq::simd {

enum class Level { kScalar, kAvx2 };

template <typename T>
struct KernelTable {
  // C[M x N] (+)= A[M x K] * B[K x N]; all row-major and contiguous.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
               bool accumulate);
  T (*dot)(std::size_t n, const T* x, const T* y);
  T (*sqdist)(std::size_t n, const T* x, const T* y);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
};

bool level_supported(Level level);
Level active_level();
// Throws std::invalid_argument when the level is not supported on this CPU.
void set_active_level(Level level);
const char* level_name(Level level);
// Parses "scalar" / "avx2"; throws on anything else.
Level parse_level(const std::string& name);

template <typename T>
const KernelTable<T>& kernel_table(Level level);

template <typename T>
inline const KernelTable<T>& kernels() {
  return kernel_table<T>(active_level());
}

// General product with optional transposes, built on the table's gemm.
// op(A) is M x K, op(B) is K x N.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate);

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* in, T* out);

// Index of the row of table[rows x dim] nearest to x in squared Euclidean
// distance, and that distance. Ties go to the lowest index.
template <typename T>
std::pair<std::size_t, T> nearest_row(const T* x, const T* table, std::size_t rows,
                                      std::size_t dim);

namespace scalar {
template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
          bool accumulate);
template <typename T>
T dot(std::size_t n, const T* x, const T* y);
template <typename T>
T sqdist(std::size_t n, const T* x, const T* y);
template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y);
}  // namespace scalar

#if defined(RDVQ_HAVE_AVX2)
namespace avx2 {
void gemm_f32(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
              float* c, bool accumulate);
float dot_f32(std::size_t n, const float* x, const float* y);
double dot_f64(std::size_t n, const double* x, const double* y);
float sqdist_f32(std::size_t n, const float* x, const float* y);
double sqdist_f64(std::size_t n, const double* x, const double* y);
void axpy_f32(std::size_t n, float alpha, const float* x, float* y);
void axpy_f64(std::size_t n, double alpha, const double* x, double* y);
}  // namespace avx2
#endif

}  // namespace rdvq::simd
