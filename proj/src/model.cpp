#include "tmach/model.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "tmach/errors.hpp"
#include "tmach/rng.hpp"
#include "tmach/simd.hpp"
#include "tmach/text.hpp"

namespace tmach {

namespace {

// sum_{p=2..q} p
std::size_t factor_rows_per_rank(std::size_t degree) {
  return degree < 2 ? 0 : degree * (degree + 1) / 2 - 1;
}

}  // namespace

std::size_t TmShape::row_count() const { return 1 + rank * factor_rows_per_rank(degree); }

std::size_t TmShape::factor_row(std::size_t p, std::size_t i, std::size_t j) const {
  if (p < 2 || p > degree || i >= rank || j >= p) {
    throw DimensionError("TmShape: factor index out of range");
  }
  return 1 + rank * factor_rows_per_rank(p - 1) + i * p + j;
}

void TmShape::validate() const {
  if (dim == 0) throw DimensionError("TmShape: dimension must be positive");
  if (degree == 0) throw DimensionError("TmShape: degree must be positive");
}

TmCoefficients::TmCoefficients(TmShape shape) : shape_(shape) {
  shape_.validate();
  values_.assign(shape_.parameter_count(), 0.0);
}

TmCoefficients::TmCoefficients(TmShape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  shape_.validate();
  if (values_.size() != shape_.parameter_count()) {
    throw DimensionError("TmCoefficients: expected " + std::to_string(shape_.parameter_count()) +
                         " values, got " + std::to_string(values_.size()));
  }
}

double rank_one_cofactors(std::span<const double> inner_products, double scale,
                          std::span<double> coeffs) {
  const std::size_t p = inner_products.size();
  // coeffs[j] <- prod_{k<j} s_k, then multiplied by the running suffix product.
  double prefix = 1.0;
  for (std::size_t j = 0; j < p; ++j) {
    coeffs[j] = prefix;
    prefix *= inner_products[j];
  }
  double suffix = scale;
  for (std::size_t j = p; j-- > 0;) {
    coeffs[j] *= suffix;
    suffix *= inner_products[j];
  }
  return prefix;
}

TmWorkspace::TmWorkspace(const TmShape& shape)
    : shape_(shape), inner_(shape.row_count()), coeffs_(shape.row_count()) {}

double TmWorkspace::forward(const TmParams& params, std::span<const double> x) {
  simd::gemv(params.rows(), x, inner_);
  double f = params.bias() + inner_[0];
  std::size_t row = 1;
  for (std::size_t p = 2; p <= shape_.degree; ++p) {
    for (std::size_t i = 0; i < shape_.rank; ++i) {
      double term = 1.0;
      for (std::size_t j = 0; j < p; ++j) term *= inner_[row + j];
      f += term;
      row += p;
    }
  }
  return f;
}

void TmWorkspace::accumulate_gradient(std::span<const double> x, double dloss, TmGradient& grad) {
  grad.bias() += dloss;
  coeffs_[0] = dloss;
  std::size_t row = 1;
  for (std::size_t p = 2; p <= shape_.degree; ++p) {
    for (std::size_t i = 0; i < shape_.rank; ++i) {
      rank_one_cofactors(std::span<const double>(inner_).subspan(row, p), dloss,
                         std::span<double>(coeffs_).subspan(row, p));
      row += p;
    }
  }
  simd::ger(coeffs_, x, grad.rows());
}

namespace {

void check_point(const TmShape& shape, std::span<const double> x) {
  if (x.size() != shape.dim) {
    throw DimensionError("evaluate: point has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(shape.dim));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("evaluate: non-finite input");
  }
}

}  // namespace

double evaluate(const TmParams& params, std::span<const double> x) {
  check_point(params.shape(), x);
  TmWorkspace ws(params.shape());
  return ws.forward(params, x);
}

TmGradient grad_point(const TmParams& params, std::span<const double> x, double dloss) {
  check_point(params.shape(), x);
  TmWorkspace ws(params.shape());
  ws.forward(params, x);
  TmGradient grad(params.shape());
  ws.accumulate_gradient(x, dloss, grad);
  return grad;
}

TmParams init_random(std::size_t dim, std::size_t degree, std::size_t rank, double alpha,
                     std::mt19937_64& rng) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("init_random: alpha must be positive");
  }
  TmParams params(TmShape{dim, degree, rank});
  std::normal_distribution<double> normal(0.0, alpha);
  for (double& v : params.rows()) v = normal(rng);
  return params;
}

TmParams init_random(std::size_t dim, std::size_t degree, std::size_t rank, double alpha,
                     std::uint64_t seed) {
  auto rng = make_rng(seed, stream::kInit);
  return init_random(dim, degree, rank, alpha, rng);
}

std::vector<double> flatten(const TmCoefficients& coefficients) {
  auto v = coefficients.values();
  return {v.begin(), v.end()};
}

TmParams unflatten(std::span<const double> values, const TmShape& shape) {
  return TmParams(shape, std::vector<double>(values.begin(), values.end()));
}

void write_model(std::ostream& out, const TmParams& params, double alpha, std::uint64_t seed) {
  const TmShape& s = params.shape();
  out << "tm v1 " << s.dim << ' ' << s.degree << ' ' << s.rank << ' ' << format_double(alpha) << ' '
      << seed << '\n';
  for (double v : params.values()) out << format_double(v) << '\n';
}

ModelFile read_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("model: empty file");
  std::istringstream header(line);
  std::string magic, version, alpha_text;
  TmShape shape;
  std::uint64_t seed = 0;
  if (!(header >> magic >> version >> shape.dim >> shape.degree >> shape.rank >> alpha_text >> seed) ||
      magic != "tm" || version != "v1") {
    throw DataError("model: bad header '" + line + "'");
  }
  auto alpha = parse_double(alpha_text);
  if (!alpha) throw DataError("model: bad alpha '" + alpha_text + "'");
  if (shape.dim == 0 || shape.degree == 0) throw DataError("model: invalid shape in header");

  std::vector<double> values;
  values.reserve(shape.parameter_count());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto v = parse_double(line);
    if (!v) throw DataError("model: bad value on line " + std::to_string(line_no));
    values.push_back(*v);
  }
  if (values.size() != shape.parameter_count()) {
    throw DataError("model: expected " + std::to_string(shape.parameter_count()) + " values, found " +
                    std::to_string(values.size()));
  }
  return ModelFile{TmParams(shape, std::move(values)), *alpha, seed};
}

}  // namespace tmach
