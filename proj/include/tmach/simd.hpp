#pragma once

// Dense double-precision kernels used by every inner loop in the library.
//
// Each kernel has a scalar reference implementation (namespace scalar) and an
// AVX2+FMA variant (namespace avx2). The free functions in tmach::simd forward
// to whichever backend is active; the active backend is chosen once at startup
// from CPUID and can be overridden with TMACH_SIMD=scalar|avx2 or set_backend().
//
// Summation order is fixed per backend, so results are bit-reproducible for a
// given backend but differ between backends at the rounding level.

#include <cstddef>
#include <span>

namespace tmach::simd {

enum class Backend { scalar, avx2 };

/// True when the CPU and the build both support the AVX2 kernels.
bool avx2_available();

Backend active_backend();

/// Switches the dispatch table. Returns false (and leaves the backend
/// unchanged) when the requested backend is unavailable.
bool set_backend(Backend backend);

const char* backend_name(Backend backend);

/// sum_i a[i] * b[i]
double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// out[k] = <rows[k*d .. k*d+d), x> for k < out.size(); rows is row-major.
void gemv(std::span<const double> rows, std::span<const double> x, std::span<double> out);

/// rows[k*d .. k*d+d) += coeffs[k] * x for k < coeffs.size().
void ger(std::span<const double> coeffs, std::span<const double> x, std::span<double> rows);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* rows, std::size_t nrows, std::size_t d, const double* x, double* out);
void ger(const double* coeffs, std::size_t nrows, std::size_t d, const double* x, double* rows);
}  // namespace scalar

namespace avx2 {
// Only callable when avx2_available() is true.
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* rows, std::size_t nrows, std::size_t d, const double* x, double* out);
void ger(const double* coeffs, std::size_t nrows, std::size_t d, const double* x, double* rows);
}  // namespace avx2

}  // namespace tmach::simd
