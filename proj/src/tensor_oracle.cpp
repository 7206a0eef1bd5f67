#include "tmach/tensor_oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "tmach/errors.hpp"
#include "tmach/simd.hpp"

namespace tmach {

bool tensor_size_within(std::size_t degree, std::size_t dim, std::size_t max_entries,
                        std::size_t* size_out) {
  std::size_t size = 1;
  for (std::size_t k = 0; k < degree; ++k) {
    if (dim != 0 && size > max_entries / dim) return false;
    size *= dim;
  }
  if (size > max_entries) return false;
  if (size_out) *size_out = size;
  return true;
}

DenseTensor::DenseTensor(std::size_t degree, std::size_t dim, std::size_t max_entries)
    : degree_(degree), dim_(dim) {
  if (degree == 0 || dim == 0) throw DimensionError("DenseTensor: degree and dim must be positive");
  std::size_t size = 0;
  if (!tensor_size_within(degree, dim, max_entries, &size)) {
    throw DimensionError("DenseTensor: " + std::to_string(dim) + "^" + std::to_string(degree) +
                         " entries exceeds cap of " + std::to_string(max_entries));
  }
  entries_.assign(size, 0.0);
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != degree_) throw DimensionError("DenseTensor: index has wrong degree");
  std::size_t off = 0;
  for (std::size_t i : index) {
    if (i >= dim_) throw DimensionError("DenseTensor: index out of range");
    off = off * dim_ + i;
  }
  return off;
}

double& DenseTensor::at(std::span<const std::size_t> index) { return entries_[offset(index)]; }
double DenseTensor::at(std::span<const std::size_t> index) const { return entries_[offset(index)]; }

double DenseTensor::frobenius() const { return std::sqrt(simd::dot(entries_, entries_)); }

double DenseTensor::max_abs_entry() const {
  double m = 0.0;
  for (double v : entries_) m = std::max(m, std::abs(v));
  return m;
}

namespace {

// Writes the Kronecker product of the d^(k) tensor `prev` with `v` into `next`
// so that the new last index runs fastest.
void kron_append(std::span<const double> prev, std::span<const double> v, std::vector<double>& next) {
  next.resize(prev.size() * v.size());
  std::size_t o = 0;
  for (double p : prev) {
    for (double e : v) next[o++] = p * e;
  }
}

}  // namespace

DenseTensor segre(std::span<const std::vector<double>> vectors, std::size_t max_entries) {
  if (vectors.empty()) throw DimensionError("segre: need at least one vector");
  const std::size_t d = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != d) throw DimensionError("segre: vectors have different lengths");
  }
  DenseTensor t(vectors.size(), d, max_entries);
  std::vector<double> cur(vectors.front());
  std::vector<double> next;
  for (std::size_t j = 1; j < vectors.size(); ++j) {
    kron_append(cur, vectors[j], next);
    cur.swap(next);
  }
  std::copy(cur.begin(), cur.end(), t.entries().begin());
  return t;
}

DenseTensor self_power(std::span<const double> x, std::size_t degree, std::size_t max_entries) {
  if (degree == 0) throw DimensionError("self_power: degree must be positive");
  std::vector<std::vector<double>> copies(degree, std::vector<double>(x.begin(), x.end()));
  return segre(copies, max_entries);
}

double inner(const DenseTensor& a, const DenseTensor& b) {
  if (a.degree() != b.degree() || a.dim() != b.dim()) {
    throw DimensionError("inner: tensors are not conformal");
  }
  return simd::dot(a.entries(), b.entries());
}

namespace {

// c[i_k] = sum over all other indices of T[i] * prod_{j != k} v_j[i_j].
void contract_all_but(const DenseTensor& t, const std::vector<std::vector<double>>& v, std::size_t mode,
                      std::vector<double>& c) {
  const std::size_t q = t.degree();
  const std::size_t d = t.dim();
  c.assign(d, 0.0);
  std::vector<std::size_t> idx(q, 0);
  auto entries = t.entries();
  for (std::size_t off = 0; off < entries.size(); ++off) {
    double w = entries[off];
    if (w != 0.0) {
      for (std::size_t j = 0; j < q; ++j) {
        if (j != mode) w *= v[j][idx[j]];
      }
      c[idx[mode]] += w;
    }
    for (std::size_t j = q; j-- > 0;) {
      if (++idx[j] < d) break;
      idx[j] = 0;
    }
  }
}

double normalize(std::vector<double>& v) {
  const double n = std::sqrt(simd::dot(v, v));
  if (n > 0.0) {
    for (double& e : v) e /= n;
  }
  return n;
}

double multilinear_value(const DenseTensor& t, const std::vector<std::vector<double>>& v) {
  std::vector<double> c;
  contract_all_but(t, v, 0, c);
  return simd::dot(c, v[0]);
}

}  // namespace

double spectral_norm(const DenseTensor& t, const SpectralNormOptions& options) {
  if (options.restarts == 0 || options.iters == 0) {
    throw std::invalid_argument("spectral_norm: restarts and iters must be positive");
  }
  for (double e : t.entries()) {
    if (!std::isfinite(e)) throw std::invalid_argument("spectral_norm: non-finite entry");
  }
  const std::size_t q = t.degree();
  const std::size_t d = t.dim();
  if (t.max_abs_entry() == 0.0) return 0.0;

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> c;
  double best = 0.0;
  for (std::size_t restart = 0; restart < options.restarts; ++restart) {
    std::vector<std::vector<double>> v(q, std::vector<double>(d));
    for (auto& vec : v) {
      do {
        for (double& e : vec) e = normal(rng);
      } while (normalize(vec) == 0.0);
    }
    double prev = -1.0;
    for (std::size_t it = 0; it < options.iters; ++it) {
      double value = 0.0;
      for (std::size_t mode = 0; mode < q; ++mode) {
        contract_all_but(t, v, mode, c);
        value = normalize(c);
        if (value == 0.0) break;
        v[mode] = c;
      }
      if (value == 0.0) break;
      if (std::abs(value - prev) <= options.tol * value) break;
      prev = value;
    }
    best = std::max(best, std::abs(multilinear_value(t, v)));
  }
  return best;
}

double matrix_operator_norm(const DenseTensor& t) {
  if (t.degree() != 2) throw DimensionError("matrix_operator_norm: tensor must have degree 2");
  const auto d = static_cast<Eigen::Index>(t.dim());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      t.entries().data(), d, d);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

DenseTensor rademacher_sum(std::span<const std::vector<double>> points, std::span<const double> signs,
                           std::size_t degree, std::size_t max_entries) {
  if (points.size() != signs.size()) throw DimensionError("rademacher_sum: signs/points length mismatch");
  if (points.empty()) throw DimensionError("rademacher_sum: no points");
  const std::size_t d = points.front().size();
  DenseTensor sum(degree, d, max_entries);
  std::vector<double> cur, next;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != d) throw DimensionError("rademacher_sum: points have different lengths");
    cur = points[i];
    for (std::size_t k = 1; k < degree; ++k) {
      kron_append(cur, points[i], next);
      cur.swap(next);
    }
    simd::axpy(signs[i], cur, sum.entries());
  }
  return sum;
}

}  // namespace tmach
