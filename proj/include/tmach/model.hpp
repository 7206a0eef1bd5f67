#pragma once

// The Tensor Machine hypothesis
//
//   f(x) = w0 + <w1, x> + sum_{p=2..q} sum_{i=1..r} prod_{j=1..p} <w_j^{p,i}, x>
//
// All coefficients live in one flat vector, in this order:
//   bias, linear (d), then for p = 2..q, i = 1..r, j = 1..p the factor w_j^{p,i} (d each).
// Everything after the bias is therefore a row-major matrix with d columns
// whose first row is the linear vector; evaluation is one matrix-vector
// product followed by per-term products.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace tmach {

struct TmShape {
  std::size_t dim = 1;
  std::size_t degree = 1;
  std::size_t rank = 0;

  /// 1 + d + sum_{p=2..q} p*r*d
  std::size_t parameter_count() const { return 1 + dim * row_count(); }

  /// Rows of the coefficient matrix: the linear vector plus every factor vector.
  std::size_t row_count() const;

  /// Row index of w_j^{p,i} (p in 2..q, i in 0..r-1, j in 0..p-1).
  std::size_t factor_row(std::size_t p, std::size_t i, std::size_t j) const;

  /// Throws DimensionError unless dim >= 1 and degree >= 1.
  void validate() const;

  bool operator==(const TmShape&) const = default;
};

/// Shared storage for parameters and gradients of the same shape.
class TmCoefficients {
 public:
  explicit TmCoefficients(TmShape shape);
  TmCoefficients(TmShape shape, std::vector<double> values);

  const TmShape& shape() const { return shape_; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double bias() const { return values_[0]; }
  double& bias() { return values_[0]; }

  std::span<const double> linear() const { return row(0); }
  std::span<double> linear() { return row(0); }

  std::span<const double> factor(std::size_t p, std::size_t i, std::size_t j) const {
    return row(shape_.factor_row(p, i, j));
  }
  std::span<double> factor(std::size_t p, std::size_t i, std::size_t j) {
    return row(shape_.factor_row(p, i, j));
  }

  /// Linear vector followed by every factor vector, row-major with d columns.
  std::span<const double> rows() const { return values().subspan(1); }
  std::span<double> rows() { return values().subspan(1); }

  bool operator==(const TmCoefficients&) const = default;

 protected:
  std::span<const double> row(std::size_t k) const {
    return values().subspan(1 + k * shape_.dim, shape_.dim);
  }
  std::span<double> row(std::size_t k) { return values().subspan(1 + k * shape_.dim, shape_.dim); }

 private:
  TmShape shape_;
  std::vector<double> values_;
};

class TmParams : public TmCoefficients {
 public:
  using TmCoefficients::TmCoefficients;
  bool operator==(const TmParams&) const = default;
};

class TmGradient : public TmCoefficients {
 public:
  using TmCoefficients::TmCoefficients;
  bool operator==(const TmGradient&) const = default;
};

/// Value of one rank-one term prod_j s_j given the inner products s_j, and
/// coeffs[j] = scale * prod_{k != j} s_k computed from prefix/suffix products.
double rank_one_cofactors(std::span<const double> inner_products, double scale,
                          std::span<double> coeffs);

/// Scratch space for repeated evaluation of one parameter set. Not thread-safe;
/// use one per thread.
class TmWorkspace {
 public:
  explicit TmWorkspace(const TmShape& shape);

  /// f(x); keeps the row inner products for a following accumulate_gradient.
  double forward(const TmParams& params, std::span<const double> x);

  /// grad += dloss * df/dtheta at the x passed to the last forward().
  void accumulate_gradient(std::span<const double> x, double dloss, TmGradient& grad);

 private:
  TmShape shape_;
  std::vector<double> inner_;
  std::vector<double> coeffs_;
};

/// f(x). Throws DimensionError on a length mismatch and std::invalid_argument
/// on non-finite input.
double evaluate(const TmParams& params, std::span<const double> x);

/// Gradient of dloss * f(x) with respect to every coefficient.
TmGradient grad_point(const TmParams& params, std::span<const double> x, double dloss);

/// w0 = 0; every other coefficient i.i.d. Normal(0, alpha^2).
TmParams init_random(std::size_t dim, std::size_t degree, std::size_t rank, double alpha,
                     std::uint64_t seed);
TmParams init_random(std::size_t dim, std::size_t degree, std::size_t rank, double alpha,
                     std::mt19937_64& rng);

std::vector<double> flatten(const TmCoefficients& coefficients);
TmParams unflatten(std::span<const double> values, const TmShape& shape);

struct ModelFile {
  TmParams params;
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

/// "tm v1 d q r alpha seed" then one coefficient per line in flatten order.
void write_model(std::ostream& out, const TmParams& params, double alpha, std::uint64_t seed);
ModelFile read_model(std::istream& in);

}  // namespace tmach
