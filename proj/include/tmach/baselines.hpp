#pragma once

// Comparison methods: Kar-Karnick random polynomial features (optionally with a
// CRAFTMaps-style Gaussian down-projection) fed to ridge regression, exact
// polynomial kernel ridge regression, and quadratic Factorization Machines.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmach/data.hpp"
#include "tmach/lbfgs.hpp"
#include "tmach/objective.hpp"

namespace tmach {

enum class DegreePolicy {
  homogeneous,  // every feature has degree q
  stratified,   // features split evenly over degrees 1..q, plus one constant feature
};

DegreePolicy parse_degree_policy(const std::string& name);
const char* to_string(DegreePolicy policy);

struct Projection {
  std::size_t up = 0;    // input features
  std::size_t down = 0;  // output features
  std::uint64_t seed = 0;
  Matrix weights;        // up x down, i.i.d. Normal(0, 1/down)
};

struct FeatureMap {
  std::size_t dim = 0;
  std::size_t degree = 0;  // q used to build the map
  std::size_t feature_count = 0;  // r, excluding the constant feature
  DegreePolicy policy = DegreePolicy::homogeneous;
  std::uint64_t seed = 0;
  std::vector<std::size_t> degrees;  // per feature
  /// Sign vectors of all features stacked row-major (sum of degrees rows, dim columns).
  std::vector<double> signs;
  bool constant_feature = false;
  double scale = 1.0;  // 1/sqrt(r)
  std::optional<Projection> projection;

  /// Columns produced by apply_map.
  std::size_t output_dim() const;
};

FeatureMap kk_map(std::uint64_t seed, std::size_t dim, std::size_t degree, std::size_t features,
                  DegreePolicy policy);

/// Row i: scale * prod_j <sign_j^f, x_i> per feature (and scale for the
/// constant feature), then multiplied by the projection when present.
Matrix apply_map(const FeatureMap& map, const Matrix& x);

/// Attaches a Gaussian projection from the r random features (r divisible by
/// 4) to r/4. A constant feature, if any, passes through unprojected.
FeatureMap craftmaps_project(const FeatureMap& map_up, std::uint64_t seed);

/// `kk v1 seed d q r policy` and optionally ` proj seed up down`; the map is
/// regenerated from the descriptor rather than stored.
void write_feature_map(std::ostream& out, const FeatureMap& map);
FeatureMap read_feature_map(std::istream& in);

/// Regression: solves (Z^T Z + lambda I) w = Z^T y by Cholesky.
/// Binary: minimizes (1/n) sum logistic(z_i . w, y_i) + lambda ||w||^2 with L-BFGS.
std::vector<double> ridge_on_features(const Matrix& z, std::span<const double> y, double lambda, Task task,
                                      const BatchSolverConfig& solver = {});

std::vector<double> linear_predict(const Matrix& z, std::span<const double> w);

struct KrrOptions {
  std::size_t degree = 2;
  double lambda = 1e-6;
  std::size_t cap = 40000;  // training rows kept; larger sets are subsampled
  std::uint64_t seed = 0;
};

/// Kernel (x.z + 1)^q; solves (K + lambda I) a = y and predicts k(x_test, .)^T a.
std::vector<double> krr_poly(const Matrix& x_train, std::span<const double> y, const Matrix& x_test,
                             const KrrOptions& options);

/// The training kernel matrix (x_i.x_j + 1)^q.
Matrix poly_kernel(const Matrix& a, const Matrix& b, std::size_t degree);

struct FmParams {
  double w0 = 0.0;
  std::vector<double> w;  // d
  Matrix v;               // d x m

  std::size_t dim() const { return w.size(); }
  std::size_t factors() const { return v.cols; }
};

/// w0 + w.x + (1/2) sum_f [(sum_i V_if x_i)^2 - sum_i V_if^2 x_i^2]
double fm2_eval(const FmParams& params, std::span<const double> x);

struct FmFitOptions {
  std::size_t factors = 2;  // m
  double lambda = 1e-5;
  LossKind loss = LossKind::squared;
  double alpha = 0.1;  // init scale of V
  std::uint64_t seed = 0;
  BatchSolverConfig solver;
};

/// Value and gradient of the FM objective over `data` (flat layout w0, w, V row-major).
double fm2_objective(std::span<const double> flat, const Dataset& data, std::size_t factors, double lambda,
                     LossKind loss, std::span<double> grad);

FmParams fm2_fit(const Dataset& data, const FmFitOptions& options);

FmParams fm_unflatten(std::span<const double> flat, std::size_t dim, std::size_t factors);
std::vector<double> fm_flatten(const FmParams& params);

}  // namespace tmach
