#include "tmach/baselines.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "tmach/errors.hpp"
#include "tmach/rng.hpp"
#include "tmach/simd.hpp"
#include "tmach/text.hpp"

namespace tmach {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_eigen(const Matrix& m) {
  return {m.values.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}

void require_finite(const Matrix& m, const char* what) {
  for (double v : m.values) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
  }
}

}  // namespace

DegreePolicy parse_degree_policy(const std::string& name) {
  if (name == "homogeneous") return DegreePolicy::homogeneous;
  if (name == "stratified") return DegreePolicy::stratified;
  throw std::invalid_argument("unknown degree policy '" + name + "'");
}

const char* to_string(DegreePolicy policy) {
  return policy == DegreePolicy::homogeneous ? "homogeneous" : "stratified";
}

std::size_t FeatureMap::output_dim() const {
  const std::size_t random = projection ? projection->down : feature_count;
  return random + (constant_feature ? 1 : 0);
}

FeatureMap kk_map(std::uint64_t seed, std::size_t dim, std::size_t degree, std::size_t features,
                  DegreePolicy policy) {
  if (features == 0) throw std::invalid_argument("kk_map: need at least one feature");
  if (dim == 0 || degree == 0) throw std::invalid_argument("kk_map: dim and degree must be positive");

  FeatureMap map;
  map.dim = dim;
  map.degree = degree;
  map.feature_count = features;
  map.policy = policy;
  map.seed = seed;
  map.scale = 1.0 / std::sqrt(static_cast<double>(features));
  if (policy == DegreePolicy::homogeneous) {
    map.degrees.assign(features, degree);
  } else {
    // Even split over degrees 1..q, remainder to the lowest degrees.
    for (std::size_t p = 1; p <= degree; ++p) {
      const std::size_t count = features / degree + (p <= features % degree ? 1 : 0);
      map.degrees.insert(map.degrees.end(), count, p);
    }
    map.constant_feature = true;
  }

  const std::size_t rows = std::accumulate(map.degrees.begin(), map.degrees.end(), std::size_t{0});
  map.signs.resize(rows * dim);
  auto rng = make_rng(seed, stream::kSigns);
  std::bernoulli_distribution coin(0.5);
  for (double& s : map.signs) s = coin(rng) ? 1.0 : -1.0;
  return map;
}

Matrix apply_map(const FeatureMap& map, const Matrix& x) {
  if (x.cols != map.dim) {
    throw DimensionError("apply_map: data has " + std::to_string(x.cols) + " columns, map expects " +
                         std::to_string(map.dim));
  }
  const std::size_t sign_rows = map.signs.size() / map.dim;
  Matrix raw(x.rows, map.feature_count);
  std::vector<double> inner(sign_rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    simd::gemv(map.signs, x.row(i), inner);
    std::size_t row = 0;
    for (std::size_t f = 0; f < map.feature_count; ++f) {
      double prod = map.scale;
      for (std::size_t j = 0; j < map.degrees[f]; ++j) prod *= inner[row + j];
      raw(i, f) = prod;
      row += map.degrees[f];
    }
  }

  Matrix out(x.rows, map.output_dim());
  const std::size_t random_cols = map.projection ? map.projection->down : map.feature_count;
  if (map.projection) {
    RowMatrix projected = as_eigen(raw) * as_eigen(map.projection->weights);
    for (std::size_t i = 0; i < x.rows; ++i) {
      for (std::size_t k = 0; k < random_cols; ++k) out(i, k) = projected(i, k);
    }
  } else {
    for (std::size_t i = 0; i < x.rows; ++i) std::copy_n(raw.row(i).begin(), random_cols, out.row(i).begin());
  }
  if (map.constant_feature) {
    for (std::size_t i = 0; i < x.rows; ++i) out(i, random_cols) = map.scale;
  }
  return out;
}

FeatureMap craftmaps_project(const FeatureMap& map_up, std::uint64_t seed) {
  const std::size_t up = map_up.feature_count;
  if (map_up.projection) throw std::invalid_argument("craftmaps_project: map is already projected");
  if (up < 4 || up % 4 != 0) {
    throw std::invalid_argument("craftmaps_project: up-projection size " + std::to_string(up) +
                                " is not a positive multiple of 4");
  }
  FeatureMap map = map_up;
  Projection proj;
  proj.up = up;
  proj.down = up / 4;
  proj.seed = seed;
  proj.weights = Matrix(proj.up, proj.down);
  auto rng = make_rng(seed, stream::kProjection);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(proj.down)));
  for (double& w : proj.weights.values) w = normal(rng);
  map.projection = std::move(proj);
  return map;
}

void write_feature_map(std::ostream& out, const FeatureMap& map) {
  out << "kk v1 " << map.seed << ' ' << map.dim << ' ' << map.degree << ' ' << map.feature_count << ' '
      << to_string(map.policy);
  if (map.projection) {
    out << " proj " << map.projection->seed << ' ' << map.projection->up << ' ' << map.projection->down;
  }
  out << '\n';
}

FeatureMap read_feature_map(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("feature map: empty descriptor");
  std::istringstream s(line);
  std::string magic, version, policy;
  std::uint64_t seed = 0;
  std::size_t dim = 0, degree = 0, features = 0;
  if (!(s >> magic >> version >> seed >> dim >> degree >> features >> policy) || magic != "kk" ||
      version != "v1") {
    throw DataError("feature map: bad descriptor '" + line + "'");
  }
  FeatureMap map = kk_map(seed, dim, degree, features, parse_degree_policy(policy));
  std::string tag;
  if (s >> tag) {
    std::uint64_t proj_seed = 0;
    std::size_t up = 0, down = 0;
    if (tag != "proj" || !(s >> proj_seed >> up >> down)) throw DataError("feature map: bad projection");
    map = craftmaps_project(map, proj_seed);
    if (map.projection->up != up || map.projection->down != down) {
      throw DataError("feature map: projection dimensions disagree with the map");
    }
  }
  return map;
}

std::vector<double> linear_predict(const Matrix& z, std::span<const double> w) {
  if (w.size() != z.cols) throw DimensionError("linear_predict: weight length mismatch");
  std::vector<double> out(z.rows);
  simd::gemv(z.values, w, out);
  return out;
}

std::vector<double> ridge_on_features(const Matrix& z, std::span<const double> y, double lambda, Task task,
                                      const BatchSolverConfig& solver) {
  if (!(lambda > 0.0)) throw std::invalid_argument("ridge_on_features: lambda must be positive");
  if (y.size() != z.rows) throw DimensionError("ridge_on_features: target length mismatch");
  require_finite(z, "ridge_on_features");
  const auto zm = as_eigen(z);
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));

  if (task == Task::regression) {
    Eigen::MatrixXd gram = zm.transpose() * zm;
    gram.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw SolverError("ridge_on_features: Cholesky factorization failed");
    Eigen::VectorXd w = llt.solve(zm.transpose() * yv);
    return {w.data(), w.data() + w.size()};
  }

  const double inv_n = 1.0 / static_cast<double>(z.rows);
  ValueGradFn fn = [&](std::span<const double> w, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
    double value = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) {
      auto row = z.row(i);
      const LossValue l = loss_value_grad(LossKind::logistic, simd::dot(row, w), y[i]);
      value += l.value;
      simd::axpy(l.derivative, row, g);
    }
    for (std::size_t k = 0; k < w.size(); ++k) g[k] = g[k] * inv_n + 2.0 * lambda * w[k];
    return value * inv_n + lambda * simd::dot(w, w);
  };
  return minimize_lbfgs(fn, std::vector<double>(z.cols, 0.0), solver).x;
}

Matrix poly_kernel(const Matrix& a, const Matrix& b, std::size_t degree) {
  if (a.cols != b.cols) throw DimensionError("poly_kernel: column mismatch");
  Matrix k(a.rows, b.rows);
  const bool symmetric = &a == &b;
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = symmetric ? i : 0; j < b.rows; ++j) {
      const double v = std::pow(simd::dot(a.row(i), b.row(j)) + 1.0, static_cast<double>(degree));
      k(i, j) = v;
      if (symmetric) k(j, i) = v;
    }
  }
  return k;
}

std::vector<double> krr_poly(const Matrix& x_train, std::span<const double> y, const Matrix& x_test,
                             const KrrOptions& options) {
  if (!(options.lambda > 0.0)) throw std::invalid_argument("krr_poly: lambda must be positive");
  if (y.size() != x_train.rows) throw DimensionError("krr_poly: target length mismatch");
  if (x_train.cols != x_test.cols) throw DimensionError("krr_poly: train/test column mismatch");
  if (x_train.rows == 0) throw std::invalid_argument("krr_poly: empty training set");
  if (options.cap == 0) throw std::invalid_argument("krr_poly: cap must be positive");

  const Matrix* xs = &x_train;
  std::span<const double> ys = y;
  Matrix sub_x;
  std::vector<double> sub_y;
  if (x_train.rows > options.cap) {
    std::vector<std::size_t> idx(x_train.rows);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto rng = make_rng(options.seed, stream::kSubsample);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(options.cap);
    std::sort(idx.begin(), idx.end());
    sub_x = Matrix(options.cap, x_train.cols);
    sub_y.resize(options.cap);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::copy_n(x_train.row(idx[k]).begin(), x_train.cols, sub_x.row(k).begin());
      sub_y[k] = y[idx[k]];
    }
    xs = &sub_x;
    ys = sub_y;
  }

  Matrix k = poly_kernel(*xs, *xs, options.degree);
  for (double v : k.values) {
    if (!std::isfinite(v)) throw SolverError("krr_poly: kernel matrix has non-finite entries; rescale the inputs");
  }
  Eigen::MatrixXd km = as_eigen(k);
  km.diagonal().array() += options.lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(km);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(km, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    std::ostringstream msg;
    msg << "krr_poly: Cholesky of K + lambda I failed (lambda=" << options.lambda
        << ", eigenvalue range [" << ev.minCoeff() << ", " << ev.maxCoeff() << "])";
    throw SolverError(msg.str());
  }
  const Eigen::Map<const Eigen::VectorXd> yv(ys.data(), static_cast<Eigen::Index>(ys.size()));
  const Eigen::VectorXd coef = llt.solve(yv);

  std::vector<double> pred(x_test.rows);
  for (std::size_t i = 0; i < x_test.rows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < xs->rows; ++j) {
      sum += std::pow(simd::dot(x_test.row(i), xs->row(j)) + 1.0, static_cast<double>(options.degree)) *
             coef(static_cast<Eigen::Index>(j));
    }
    pred[i] = sum;
  }
  return pred;
}

namespace {

// s[f] = sum_i V_if x_i; returns sum_f sum_i V_if^2 x_i^2 in `squares`.
void fm_factor_sums(const FmParams& p, std::span<const double> x, std::vector<double>& s, double& squares) {
  const std::size_t m = p.factors();
  s.assign(m, 0.0);
  squares = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (x[i] == 0.0) continue;
    auto vi = p.v.row(i);
    simd::axpy(x[i], vi, s);
    squares += x[i] * x[i] * simd::dot(vi, vi);
  }
}

}  // namespace

double fm2_eval(const FmParams& params, std::span<const double> x) {
  if (x.size() != params.dim() || params.v.rows != params.dim()) {
    throw DimensionError("fm2_eval: dimension mismatch");
  }
  std::vector<double> s;
  double squares = 0.0;
  fm_factor_sums(params, x, s, squares);
  return params.w0 + simd::dot(params.w, x) + 0.5 * (simd::dot(s, s) - squares);
}

FmParams fm_unflatten(std::span<const double> flat, std::size_t dim, std::size_t factors) {
  if (flat.size() != 1 + dim + dim * factors) throw DimensionError("fm_unflatten: length mismatch");
  FmParams p;
  p.w0 = flat[0];
  p.w.assign(flat.begin() + 1, flat.begin() + 1 + static_cast<std::ptrdiff_t>(dim));
  p.v = Matrix(dim, factors);
  std::copy(flat.begin() + 1 + static_cast<std::ptrdiff_t>(dim), flat.end(), p.v.values.begin());
  return p;
}

std::vector<double> fm_flatten(const FmParams& params) {
  std::vector<double> flat;
  flat.reserve(1 + params.w.size() + params.v.values.size());
  flat.push_back(params.w0);
  flat.insert(flat.end(), params.w.begin(), params.w.end());
  flat.insert(flat.end(), params.v.values.begin(), params.v.values.end());
  return flat;
}

double fm2_objective(std::span<const double> flat, const Dataset& data, std::size_t factors, double lambda,
                     LossKind loss, std::span<double> grad) {
  const std::size_t d = data.dim();
  if (flat.size() != 1 + d + d * factors || grad.size() != flat.size()) {
    throw DimensionError("fm2_objective: parameter length mismatch");
  }
  const FmParams p = fm_unflatten(flat, d, factors);
  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> s;
  double squares = 0.0;
  double value = 0.0;
  double* gw = grad.data() + 1;
  double* gv = grad.data() + 1 + d;
  for (std::size_t n = 0; n < data.size(); ++n) {
    auto x = data.row(n);
    fm_factor_sums(p, x, s, squares);
    const double f = p.w0 + simd::dot(p.w, x) + 0.5 * (simd::dot(s, s) - squares);
    const LossValue l = loss_value_grad(loss, f, data.y[n]);
    value += l.value;
    grad[0] += l.derivative;
    for (std::size_t i = 0; i < d; ++i) {
      if (x[i] == 0.0) continue;
      gw[i] += l.derivative * x[i];
      // d f / d V_if = x_i s_f - V_if x_i^2
      auto vi = p.v.row(i);
      double* g = gv + i * factors;
      const double a = l.derivative * x[i];
      const double b = l.derivative * x[i] * x[i];
      for (std::size_t f2 = 0; f2 < factors; ++f2) g[f2] += a * s[f2] - b * vi[f2];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (double& g : grad) g *= inv_n;
  auto reg = flat.subspan(1);
  simd::axpy(2.0 * lambda, reg, grad.subspan(1));
  return value * inv_n + lambda * simd::dot(reg, reg);
}

FmParams fm2_fit(const Dataset& data, const FmFitOptions& options) {
  if (options.factors == 0) throw std::invalid_argument("fm2_fit: need at least one factor");
  if (!(options.lambda >= 0.0)) throw std::invalid_argument("fm2_fit: lambda must be nonnegative");
  const std::size_t d = data.dim();
  FmParams init;
  init.w.assign(d, 0.0);
  init.v = Matrix(d, options.factors);
  auto rng = make_rng(options.seed, stream::kInit);
  std::normal_distribution<double> normal(0.0, options.alpha);
  for (double& v : init.v.values) v = normal(rng);

  ValueGradFn fn = [&](std::span<const double> flat, std::span<double> g) {
    return fm2_objective(flat, data, options.factors, options.lambda, options.loss, g);
  };
  LbfgsResult opt = minimize_lbfgs(fn, fm_flatten(init), options.solver);
  return fm_unflatten(opt.x, d, options.factors);
}

}  // namespace tmach
