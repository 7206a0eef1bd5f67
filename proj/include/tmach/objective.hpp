#pragma once

// Regularized empirical risk
//
//   (1/m) sum_{i in S} loss(f(x_i), y_i) + lambda ||w1||^2 + lambda sum_{p,i,j} ||w_j^{p,i}||^2
//
// The bias is not regularized. Mini-batch evaluations (S a strict subset) keep
// the full regularizer.

#include <optional>
#include <span>
#include <utility>

#include "tmach/data.hpp"
#include "tmach/model.hpp"

namespace tmach {

enum class LossKind { squared, logistic };

struct ObjectiveConfig {
  double lambda = 0.0;
  LossKind loss = LossKind::squared;

  void validate() const;
};

struct LossValue {
  double value;
  double derivative;  // d loss / d f
};

/// squared: (1/2)(f - y)^2. logistic: log(1 + exp(-y f)) with y in {-1, +1}.
LossValue loss_value_grad(LossKind loss, double f, double y);

/// log(1 + exp(z)) without overflow.
double softplus(double z);

struct ValueGrad {
  double value;
  TmGradient grad;
};

/// Objective value and gradient over the rows in index_set (all rows when
/// nullopt). Accumulates in index order, single-threaded.
ValueGrad objective_value_grad(const TmParams& params, const Dataset& data, const ObjectiveConfig& cfg,
                               std::optional<std::span<const std::size_t>> index_set = std::nullopt);

/// Same as above, writing the gradient into `grad` (reshaped as needed).
double objective_value_grad_into(const TmParams& params, const Dataset& data, const ObjectiveConfig& cfg,
                                 std::optional<std::span<const std::size_t>> index_set, TmGradient& grad);

double objective_value(const TmParams& params, const Dataset& data, const ObjectiveConfig& cfg);

}  // namespace tmach
