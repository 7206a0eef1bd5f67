#include "tmach/generalization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "tmach/errors.hpp"
#include "tmach/model.hpp"
#include "tmach/rng.hpp"
#include "tmach/simd.hpp"

namespace tmach {

namespace {

double dimension_term(const BoundInputs& in) {
  const double d = static_cast<double>(in.dim);
  const double q = static_cast<double>(in.degree);
  return std::sqrt(q * d * std::log(d)) + std::sqrt(d);
}

void check_points(std::span<const std::vector<double>> points, std::span<const std::vector<double>> signs) {
  if (points.empty()) throw std::invalid_argument("rademacher: need at least one point");
  const std::size_t d = points.front().size();
  if (d == 0) throw DimensionError("rademacher: points must have positive dimension");
  for (const auto& x : points) {
    if (x.size() != d) throw DimensionError("rademacher: points differ in dimension");
  }
  for (const auto& s : signs) {
    if (s.size() != points.size()) throw DimensionError("rademacher: sign vector length differs from n");
  }
}

void project_to_ball(std::span<double> w, double radius) {
  const double norm = std::sqrt(simd::dot(w, w));
  if (norm > radius) {
    const double shrink = radius / norm;
    for (double& v : w) v *= shrink;
  }
}

// Rank-one correlation (1/n) sum_i sigma_i prod_j <w_j, x_i>, optionally with
// its gradient with respect to the stacked factors.
class Correlation {
 public:
  Correlation(std::span<const std::vector<double>> points, std::size_t degree)
      : points_(points), degree_(degree), dim_(points.front().size()), inner_(degree), coeffs_(degree) {}

  double value(std::span<const double> w, std::span<const double> sigma, std::span<double> grad) {
    const bool want_grad = !grad.empty();
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    const double scale = 1.0 / static_cast<double>(points_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      simd::gemv(w, points_[i], inner_);
      const double weight = sigma[i] * scale;
      total += weight * rank_one_cofactors(inner_, weight, coeffs_);
      if (want_grad) simd::ger(coeffs_, points_[i], grad);
    }
    return total;
  }

  std::size_t size() const { return degree_ * dim_; }

 private:
  std::span<const std::vector<double>> points_;
  std::size_t degree_;
  std::size_t dim_;
  std::vector<double> inner_;
  std::vector<double> coeffs_;
};

}  // namespace

void BoundInputs::validate() const {
  if (dim == 0 || degree == 0 || rank == 0 || n == 0) {
    throw std::invalid_argument("bound: d, q, r and n must be positive");
  }
  for (double v : {b, b_x, c}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("bound: B, B_x and c must be positive");
  }
}

double bound_thm1(const BoundInputs& in) {
  in.validate();
  const double q = static_cast<double>(in.degree);
  return in.c * static_cast<double>(in.rank) * std::pow(1.0 + 8.0 * in.b * in.b_x, q) * q * q *
         dimension_term(in) / std::sqrt(static_cast<double>(in.n));
}

double bound_thm2(const BoundInputs& in) {
  in.validate();
  const double q = static_cast<double>(in.degree);
  return in.c * std::pow(8.0 * in.b * in.b_x, q) * q * dimension_term(in) /
         std::sqrt(static_cast<double>(in.n));
}

std::vector<std::vector<double>> draw_signs(std::size_t n, std::size_t draws, std::uint64_t seed) {
  auto rng = make_rng(seed, stream::kSigns);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::vector<double>> out(draws, std::vector<double>(n));
  for (auto& s : out) {
    for (double& v : s) v = coin(rng) ? 1.0 : -1.0;
  }
  return out;
}

MonteCarlo summarize(std::vector<double> per_draw) {
  MonteCarlo mc;
  mc.per_draw = std::move(per_draw);
  const std::size_t k = mc.per_draw.size();
  if (k == 0) return mc;
  double sum = 0.0;
  for (double v : mc.per_draw) sum += v;
  mc.mean = sum / static_cast<double>(k);
  if (k > 1) {
    double ss = 0.0;
    for (double v : mc.per_draw) ss += (v - mc.mean) * (v - mc.mean);
    mc.std_error = std::sqrt(ss / static_cast<double>(k - 1) / static_cast<double>(k));
  }
  return mc;
}

MonteCarlo empirical_rademacher_upper(std::span<const std::vector<double>> points, std::size_t degree, double b,
                                      std::span<const std::vector<double>> signs,
                                      const SpectralNormOptions& norm) {
  check_points(points, signs);
  const double factor = std::pow(b, static_cast<double>(degree)) / static_cast<double>(points.size());
  std::vector<double> values;
  values.reserve(signs.size());
  for (const auto& s : signs) {
    const DenseTensor t = rademacher_sum(points, s, degree);
    double spectral = 0.0;
    if (degree == 1) {
      spectral = t.frobenius();
    } else if (degree == 2) {
      spectral = matrix_operator_norm(t);
    } else {
      spectral = spectral_norm(t, norm);
    }
    values.push_back(factor * spectral);
  }
  return summarize(std::move(values));
}

MonteCarlo empirical_rademacher_lower(std::span<const std::vector<double>> points, std::size_t degree, double b,
                                      std::span<const std::vector<double>> signs,
                                      const LowerEstimateOptions& options) {
  check_points(points, signs);
  if (degree == 0) throw std::invalid_argument("rademacher: degree must be positive");
  if (options.restarts == 0 || options.iters == 0) {
    throw std::invalid_argument("rademacher: restarts and iters must be positive");
  }
  const std::size_t d = points.front().size();
  Correlation corr(points, degree);
  std::vector<double> w(corr.size()), trial(corr.size()), grad(corr.size());
  auto rng = make_rng(options.seed, stream::kRestarts);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> values;
  values.reserve(signs.size());
  for (const auto& sigma : signs) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t restart = 0; restart < options.restarts; ++restart) {
      for (double& v : w) v = normal(rng);
      for (std::size_t j = 0; j < degree; ++j) {
        auto block = std::span<double>(w).subspan(j * d, d);
        const double norm = std::sqrt(simd::dot(block, block));
        for (double& v : block) v *= b / norm;
      }
      double value = corr.value(w, sigma, grad);
      double step = 1.0;
      for (std::size_t it = 0; it < options.iters && step > 1e-14; ++it) {
        trial = w;
        simd::axpy(step, grad, trial);
        for (std::size_t j = 0; j < degree; ++j) project_to_ball(std::span<double>(trial).subspan(j * d, d), b);
        const double candidate = corr.value(trial, sigma, {});
        if (candidate > value) {
          w.swap(trial);
          value = corr.value(w, sigma, grad);
          step *= 2.0;
        } else {
          step *= 0.5;
        }
      }
      best = std::max(best, value);
    }
    values.push_back(best);
  }
  return summarize(std::move(values));
}

MaxEntryCheck max_entry_check(std::span<const std::vector<double>> points, std::size_t degree,
                              std::span<const std::vector<double>> signs) {
  check_points(points, signs);
  double max_norm = 0.0;
  for (const auto& x : points) max_norm = std::max(max_norm, std::sqrt(simd::dot(x, x)));
  std::vector<double> lhs;
  lhs.reserve(signs.size());
  for (const auto& s : signs) lhs.push_back(rademacher_sum(points, s, degree).max_abs_entry());
  MaxEntryCheck out;
  out.lhs = summarize(std::move(lhs));
  out.rhs = std::sqrt(static_cast<double>(points.size())) * std::pow(max_norm, static_cast<double>(degree));
  return out;
}

}  // namespace tmach
