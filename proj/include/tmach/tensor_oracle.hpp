#pragma once

// Explicit dense tensors of small degree and dimension. Everything here costs
// O(d^q) and exists to check the factored code paths against the definitions.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tmach {

class DenseTensor {
 public:
  static constexpr std::size_t kDefaultMaxEntries = 10'000'000;

  /// Zero tensor of the given degree and dimension. Throws DimensionError when
  /// degree or dim is zero, or when dim^degree exceeds max_entries.
  DenseTensor(std::size_t degree, std::size_t dim, std::size_t max_entries = kDefaultMaxEntries);

  std::size_t degree() const { return degree_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }

  /// Row-major entries, first index slowest.
  std::span<const double> entries() const { return entries_; }
  std::span<double> entries() { return entries_; }

  double& at(std::span<const std::size_t> index);
  double at(std::span<const std::size_t> index) const;

  /// Flat offset of a multi-index.
  std::size_t offset(std::span<const std::size_t> index) const;

  /// sqrt(<T, T>)
  double frobenius() const;

  double max_abs_entry() const;

  bool operator==(const DenseTensor&) const = default;

 private:
  std::size_t degree_;
  std::size_t dim_;
  std::vector<double> entries_;
};

/// True when dim^degree <= max_entries; the size is written to size_out.
bool tensor_size_within(std::size_t degree, std::size_t dim, std::size_t max_entries,
                        std::size_t* size_out = nullptr);

/// Outer product v_1 o ... o v_q.
DenseTensor segre(std::span<const std::vector<double>> vectors,
                  std::size_t max_entries = DenseTensor::kDefaultMaxEntries);

/// x o x o ... o x (q times): all degree-q monomials of x.
DenseTensor self_power(std::span<const double> x, std::size_t degree,
                       std::size_t max_entries = DenseTensor::kDefaultMaxEntries);

double inner(const DenseTensor& a, const DenseTensor& b);

struct SpectralNormOptions {
  std::size_t restarts = 10;
  std::size_t iters = 200;
  double tol = 1e-10;
  std::uint64_t seed = 0;
};

/// Lower estimate of sup |<T, v_1 o ... o v_q>| over unit vectors, from
/// multi-restart higher-order power iteration. The returned value is attained
/// by the final unit vectors of the best restart.
double spectral_norm(const DenseTensor& t, const SpectralNormOptions& options = {});

/// Exact largest singular value of a degree-2 tensor viewed as a d x d matrix.
double matrix_operator_norm(const DenseTensor& t);

/// sum_i signs[i] * x_i^(q).
DenseTensor rademacher_sum(std::span<const std::vector<double>> points, std::span<const double> signs,
                           std::size_t degree,
                           std::size_t max_entries = DenseTensor::kDefaultMaxEntries);

}  // namespace tmach
