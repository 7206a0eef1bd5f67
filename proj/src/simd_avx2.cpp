#include "tmach/simd.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#include <immintrin.h>
#define TMACH_AVX2_TARGET __attribute__((target("avx2,fma")))
#define TMACH_HAVE_AVX2_KERNELS 1
#else
#define TMACH_HAVE_AVX2_KERNELS 0
#endif

namespace tmach::simd::avx2 {

#if TMACH_HAVE_AVX2_KERNELS

namespace {

TMACH_AVX2_TARGET inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

}  // namespace

TMACH_AVX2_TARGET double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

TMACH_AVX2_TARGET void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

TMACH_AVX2_TARGET void gemv(const double* rows, std::size_t nrows, std::size_t d, const double* x,
                            double* out) {
  std::size_t k = 0;
  // Four rows at a time share each load of x.
  for (; k + 4 <= nrows; k += 4) {
    const double* r0 = rows + k * d;
    const double* r1 = r0 + d;
    const double* r2 = r1 + d;
    const double* r3 = r2 + d;
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd();
    __m256d a3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= d; i += 4) {
      const __m256d xv = _mm256_loadu_pd(x + i);
      a0 = _mm256_fmadd_pd(_mm256_loadu_pd(r0 + i), xv, a0);
      a1 = _mm256_fmadd_pd(_mm256_loadu_pd(r1 + i), xv, a1);
      a2 = _mm256_fmadd_pd(_mm256_loadu_pd(r2 + i), xv, a2);
      a3 = _mm256_fmadd_pd(_mm256_loadu_pd(r3 + i), xv, a3);
    }
    double s0 = hsum(a0), s1 = hsum(a1), s2 = hsum(a2), s3 = hsum(a3);
    for (; i < d; ++i) {
      s0 += r0[i] * x[i];
      s1 += r1[i] * x[i];
      s2 += r2[i] * x[i];
      s3 += r3[i] * x[i];
    }
    out[k] = s0;
    out[k + 1] = s1;
    out[k + 2] = s2;
    out[k + 3] = s3;
  }
  for (; k < nrows; ++k) out[k] = dot(rows + k * d, x, d);
}

TMACH_AVX2_TARGET void ger(const double* coeffs, std::size_t nrows, std::size_t d, const double* x,
                           double* rows) {
  for (std::size_t k = 0; k < nrows; ++k) {
    if (coeffs[k] != 0.0) axpy(coeffs[k], x, rows + k * d, d);
  }
}

#else

// No AVX2 on this target; the table entries alias the scalar kernels and
// avx2_available() reports false so they are never selected.
double dot(const double* a, const double* b, std::size_t n) { return scalar::dot(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { scalar::axpy(alpha, x, y, n); }
void gemv(const double* rows, std::size_t nrows, std::size_t d, const double* x, double* out) {
  scalar::gemv(rows, nrows, d, x, out);
}
void ger(const double* coeffs, std::size_t nrows, std::size_t d, const double* x, double* rows) {
  scalar::ger(coeffs, nrows, d, x, rows);
}

#endif

}  // namespace tmach::simd::avx2
