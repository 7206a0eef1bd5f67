#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tmach/model.hpp"

namespace tmach {

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }

  bool operator==(const Matrix&) const = default;
};

enum class Task { regression, binary };
enum class PrepState { raw, column_normalized, row_normalized };

struct Dataset {
  Matrix x;
  std::vector<double> y;
  Task task = Task::regression;
  PrepState state = PrepState::raw;
  /// Train-derived column divisors (1 for zero columns), empty while raw.
  std::vector<double> column_divisors;

  std::size_t size() const { return x.rows; }
  std::size_t dim() const { return x.cols; }
  std::span<const double> row(std::size_t i) const { return x.row(i); }

  /// Copy of the rows listed in `indices`, same task and state.
  Dataset subset(std::span<const std::size_t> indices) const;
};

/// Reads `label idx:val idx:val ...` lines with strictly increasing 1-based
/// indices. Blank lines and lines starting with '#' are skipped. Throws
/// DataError with line and column on malformed input.
Dataset parse_sparse_text(std::istream& in);

/// Writes the sparse text format, omitting zero entries.
void write_sparse_text(std::ostream& out, const Dataset& data);

/// Rectangular numeric CSV with an optional header row (detected when any cell
/// of the first row is not numeric). A negative label_column counts from the end.
Dataset parse_csv(std::istream& in, int label_column);

/// Remaps {0,1} labels to {-1,+1} and sets task = binary. Returns true when a
/// remap happened. Throws DataError when other label values are present.
bool normalize_binary_labels(Dataset& data);

/// Scales each train column by its Euclidean norm (zero columns untouched),
/// applies the same divisors to test, then scales every row of both sets to
/// unit norm (zero rows untouched).
std::pair<Dataset, Dataset> preprocess(const Dataset& train, const Dataset& test);

/// Applies stored column divisors then row normalization to one set.
Dataset apply_preprocessing(const Dataset& data, std::span<const double> column_divisors);

/// Seeded permutation of 0..n-1 split into k contiguous, near-equal folds.
std::vector<std::vector<std::size_t>> kfold(std::size_t n, std::size_t k, std::uint64_t seed);

struct Metrics {
  Task task = Task::regression;
  /// ||pred - truth|| / ||truth|| for regression, error rate for binary.
  double value = 0.0;
};

/// Binary decisions use sign(f) with f = 0 mapped to +1.
Metrics metric(std::span<const double> pred, std::span<const double> truth, Task task);

std::vector<double> predict(const TmParams& params, const Dataset& data);

struct SynthTask {
  Dataset train;
  Dataset test;
  TmParams truth;
};

/// Ground truth init_random(d, q, r_true, 1, seed); rows uniform on the unit
/// sphere; train targets get Normal(0, noise_sd^2) noise, test targets are exact.
SynthTask synth_tm_task(std::uint64_t seed, std::size_t dim, std::size_t degree, std::size_t rank_true,
                        std::size_t n_train, std::size_t n_test, double noise_sd);

}  // namespace tmach
