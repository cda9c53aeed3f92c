// Compiled with -mavx2 -mfma; only reached through the runtime dispatcher.

#include <immintrin.h>

#include <algorithm>
#include <cstring>
#include <vector>

#include "rdvq/simd/kernels.hpp"

namespace rdvq::simd::avx2 {

namespace {

constexpr std::size_t kNr = 16;   // columns per micro-tile
constexpr std::size_t kMr = 6;    // rows per micro-tile
constexpr std::size_t kKc = 256;  // depth of a packed panel
constexpr std::size_t kMc = 96;   // rows of a packed A block
constexpr std::size_t kNc = 2048; // columns of a packed B block

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d high64 = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
}

// Accumulates an MR x 16 tile: C[rows, 0:16] += apack[kc x MR] * bpack[kc x 16].
// `nrows` < MR and `ncols` < 16 mark edge tiles whose packed operands are zero padded.
void micro_tile(std::size_t kc, const float* apack, const float* bpack, float* c, std::size_t ldc,
                std::size_t nrows, std::size_t ncols) {
  __m256 acc0[kMr], acc1[kMr];
  for (std::size_t r = 0; r < kMr; ++r) {
    acc0[r] = _mm256_setzero_ps();
    acc1[r] = _mm256_setzero_ps();
  }
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(bpack + p * kNr);
    const __m256 b1 = _mm256_loadu_ps(bpack + p * kNr + 8);
    const float* ap = apack + p * kMr;
    for (std::size_t r = 0; r < kMr; ++r) {
      const __m256 av = _mm256_broadcast_ss(ap + r);
      acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
    }
  }
  if (nrows == kMr && ncols == kNr) {
    for (std::size_t r = 0; r < kMr; ++r) {
      float* crow = c + r * ldc;
      _mm256_storeu_ps(crow, _mm256_add_ps(_mm256_loadu_ps(crow), acc0[r]));
      _mm256_storeu_ps(crow + 8, _mm256_add_ps(_mm256_loadu_ps(crow + 8), acc1[r]));
    }
    return;
  }
  alignas(32) float tmp[kMr][kNr];
  for (std::size_t r = 0; r < kMr; ++r) {
    _mm256_store_ps(tmp[r], acc0[r]);
    _mm256_store_ps(tmp[r] + 8, acc1[r]);
  }
  for (std::size_t r = 0; r < nrows; ++r)
    for (std::size_t j = 0; j < ncols; ++j) c[r * ldc + j] += tmp[r][j];
}

}  // namespace

void gemm_f32(std::size_t m, std::size_t n, std::size_t k, const float* a, const float* b,
              float* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0f);
  if (m == 0 || n == 0 || k == 0) return;
  std::vector<float> apack(kMc * kKc);
  std::vector<float> bpack(kKc * kNc);
  for (std::size_t j0 = 0; j0 < n; j0 += kNc) {
    const std::size_t nb = std::min(kNc, n - j0);
    const std::size_t ntiles = (nb + kNr - 1) / kNr;
    for (std::size_t p0 = 0; p0 < k; p0 += kKc) {
      const std::size_t kc = std::min(kKc, k - p0);
      for (std::size_t p = 0; p < kc; ++p) {
        const float* brow = b + (p0 + p) * n + j0;
        for (std::size_t t = 0; t < ntiles; ++t) {
          float* dst = bpack.data() + t * kc * kNr + p * kNr;
          const std::size_t nc = std::min(kNr, nb - t * kNr);
          std::memcpy(dst, brow + t * kNr, nc * sizeof(float));
          for (std::size_t j = nc; j < kNr; ++j) dst[j] = 0.0f;
        }
      }
      for (std::size_t i0 = 0; i0 < m; i0 += kMc) {
        const std::size_t mb = std::min(kMc, m - i0);
        const std::size_t mtiles = (mb + kMr - 1) / kMr;
        for (std::size_t t = 0; t < mtiles; ++t) {
          float* dst = apack.data() + t * kMr * kc;
          for (std::size_t r = 0; r < kMr; ++r) {
            const std::size_t i = t * kMr + r;
            if (i < mb) {
              const float* arow = a + (i0 + i) * k + p0;
              for (std::size_t p = 0; p < kc; ++p) dst[p * kMr + r] = arow[p];
            } else {
              for (std::size_t p = 0; p < kc; ++p) dst[p * kMr + r] = 0.0f;
            }
          }
        }
        for (std::size_t jt = 0; jt < ntiles; ++jt) {
          const std::size_t nc = std::min(kNr, nb - jt * kNr);
          for (std::size_t t = 0; t < mtiles; ++t)
            micro_tile(kc, apack.data() + t * kMr * kc, bpack.data() + jt * kc * kNr,
                       c + (i0 + t * kMr) * n + j0 + jt * kNr, n, std::min(kMr, mb - t * kMr), nc);
        }
      }
    }
  }
}

float dot_f32(std::size_t n, const float* x, const float* y) {
  __m256 acc0 = _mm256_setzero_ps(), acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
  float s = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double dot_f64(std::size_t n, const double* x, const double* y) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

float sqdist_f32(std::size_t n, const float* x, const float* y) {
  __m256 acc0 = _mm256_setzero_ps(), acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m256 d0 = _mm256_sub_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i));
    const __m256 d1 = _mm256_sub_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8));
    acc0 = _mm256_fmadd_ps(d0, d0, acc0);
    acc1 = _mm256_fmadd_ps(d1, d1, acc1);
  }
  for (; i + 8 <= n; i += 8) {
    const __m256 d0 = _mm256_sub_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i));
    acc0 = _mm256_fmadd_ps(d0, d0, acc0);
  }
  float s = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) {
    const float d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

double sqdist_f64(std::size_t n, const double* x, const double* y) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void axpy_f32(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace rdvq::simd::avx2
