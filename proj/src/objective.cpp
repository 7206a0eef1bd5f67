#include "tmach/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tmach/errors.hpp"
#include "tmach/simd.hpp"

namespace tmach {

void ObjectiveConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("objective: lambda must be a finite nonnegative number");
  }
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

LossValue loss_value_grad(LossKind loss, double f, double y) {
  if (loss == LossKind::squared) {
    const double r = f - y;
    return {0.5 * r * r, r};
  }
  if (y != 1.0 && y != -1.0) {
    throw std::invalid_argument("logistic loss: label must be -1 or +1, got " + std::to_string(y));
  }
  const double z = -y * f;
  // sigmoid(z) computed on the side that does not overflow.
  const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return {softplus(z), -y * sig};
}

namespace {

void check_compatible(const TmParams& params, const Dataset& data) {
  if (data.dim() != params.shape().dim) {
    throw DimensionError("objective: data has " + std::to_string(data.dim()) + " features, model expects " +
                         std::to_string(params.shape().dim));
  }
}

}  // namespace

double objective_value_grad_into(const TmParams& params, const Dataset& data, const ObjectiveConfig& cfg,
                                 std::optional<std::span<const std::size_t>> index_set, TmGradient& grad) {
  cfg.validate();
  check_compatible(params, data);
  if (index_set && index_set->empty()) throw std::invalid_argument("objective: empty index set");
  if (!index_set && data.size() == 0) throw std::invalid_argument("objective: empty dataset");

  if (!(grad.shape() == params.shape())) grad = TmGradient(params.shape());
  std::fill(grad.values().begin(), grad.values().end(), 0.0);

  TmWorkspace ws(params.shape());
  const std::size_t m = index_set ? index_set->size() : data.size();
  double data_term = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = index_set ? (*index_set)[k] : k;
    if (i >= data.size()) throw DimensionError("objective: row index out of range");
    auto x = data.row(i);
    const double f = ws.forward(params, x);
    const LossValue l = loss_value_grad(cfg.loss, f, data.y[i]);
    data_term += l.value;
    ws.accumulate_gradient(x, l.derivative, grad);
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  for (double& g : grad.values()) g *= inv_m;

  auto reg_rows = params.rows();
  const double reg = cfg.lambda * simd::dot(reg_rows, reg_rows);
  if (cfg.lambda != 0.0) simd::axpy(2.0 * cfg.lambda, reg_rows, grad.rows());
  return data_term * inv_m + reg;
}

ValueGrad objective_value_grad(const TmParams& params, const Dataset& data, const ObjectiveConfig& cfg,
                               std::optional<std::span<const std::size_t>> index_set) {
  TmGradient grad(params.shape());
  const double value = objective_value_grad_into(params, data, cfg, index_set, grad);
  return {value, std::move(grad)};
}

double objective_value(const TmParams& params, const Dataset& data, const ObjectiveConfig& cfg) {
  cfg.validate();
  check_compatible(params, data);
  TmWorkspace ws(params.shape());
  double data_term = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    data_term += loss_value_grad(cfg.loss, ws.forward(params, data.row(i)), data.y[i]).value;
  }
  auto reg_rows = params.rows();
  return data_term / static_cast<double>(data.size()) + cfg.lambda * simd::dot(reg_rows, reg_rows);
}

}  // namespace tmach
