#include "tmach/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace tmach::simd {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* rows, std::size_t nrows, std::size_t d, const double* x, double* out) {
  for (std::size_t k = 0; k < nrows; ++k) out[k] = dot(rows + k * d, x, d);
}

void ger(const double* coeffs, std::size_t nrows, std::size_t d, const double* x, double* rows) {
  for (std::size_t k = 0; k < nrows; ++k) {
    if (coeffs[k] != 0.0) axpy(coeffs[k], x, rows + k * d, d);
  }
}

}  // namespace scalar

namespace {

struct KernelTable {
  Backend backend;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*gemv)(const double*, std::size_t, std::size_t, const double*, double*);
  void (*ger)(const double*, std::size_t, std::size_t, const double*, double*);
};

constexpr KernelTable kScalarTable{Backend::scalar, scalar::dot, scalar::axpy, scalar::gemv,
                                   scalar::ger};
constexpr KernelTable kAvx2Table{Backend::avx2, avx2::dot, avx2::axpy, avx2::gemv, avx2::ger};

bool detect_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const bool has_avx2 = detect_avx2();
  if (const char* env = std::getenv("TMACH_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return &kScalarTable;
  }
  return has_avx2 ? &kAvx2Table : &kScalarTable;
}

std::atomic<const KernelTable*>& table() {
  static std::atomic<const KernelTable*> t{initial_table()};
  return t;
}

const KernelTable& current() { return *table().load(std::memory_order_acquire); }

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string("simd::") + what + ": length mismatch");
}

}  // namespace

bool avx2_available() {
  static const bool available = detect_avx2();
  return available;
}

Backend active_backend() { return current().backend; }

bool set_backend(Backend backend) {
  if (backend == Backend::avx2 && !avx2_available()) return false;
  table().store(backend == Backend::avx2 ? &kAvx2Table : &kScalarTable, std::memory_order_release);
  return true;
}

const char* backend_name(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "dot");
  return current().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same_size(x.size(), y.size(), "axpy");
  current().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> rows, std::span<const double> x, std::span<double> out) {
  require_same_size(rows.size(), out.size() * x.size(), "gemv");
  current().gemv(rows.data(), out.size(), x.size(), x.data(), out.data());
}

void ger(std::span<const double> coeffs, std::span<const double> x, std::span<double> rows) {
  require_same_size(rows.size(), coeffs.size() * x.size(), "ger");
  current().ger(coeffs.data(), coeffs.size(), x.size(), x.data(), rows.data());
}

}  // namespace tmach::simd
