#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"
#include "tmach/data.hpp"
#include "tmach/errors.hpp"
#include "tmach/objective.hpp"

namespace {

using namespace tmach;
using tmach::testing::gaussian;

Dataset random_data(std::size_t n, std::size_t d, Task task, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset data;
  data.x = Matrix(n, d);
  data.x.values = gaussian(n * d, rng, 0.5);
  data.task = task;
  data.y = gaussian(n, rng);
  if (task == Task::binary) {
    for (double& y : data.y) y = y >= 0 ? 1.0 : -1.0;
  }
  return data;
}

TEST(Loss, SquaredAndLogisticValues) {
  const LossValue sq = loss_value_grad(LossKind::squared, 1.5, 1.5);
  EXPECT_EQ(sq.value, 0.0);
  EXPECT_EQ(sq.derivative, 0.0);
  const LossValue sq2 = loss_value_grad(LossKind::squared, 3.0, 1.0);
  EXPECT_EQ(sq2.value, 2.0);
  EXPECT_EQ(sq2.derivative, 2.0);

  const LossValue lg = loss_value_grad(LossKind::logistic, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(lg.value, std::log(2.0));
  EXPECT_DOUBLE_EQ(lg.derivative, -0.5);
}

TEST(Loss, LogisticIsOverflowSafeWithCorrectSign) {
  for (double f : {50.0, 800.0, -800.0}) {
    for (double y : {-1.0, 1.0}) {
      const LossValue l = loss_value_grad(LossKind::logistic, f, y);
      EXPECT_TRUE(std::isfinite(l.value));
      EXPECT_TRUE(std::isfinite(l.derivative));
    }
  }
  const LossValue l = loss_value_grad(LossKind::logistic, 50.0, -1.0);
  EXPECT_NEAR(l.value, 50.0, 1e-12);
  const double h = 1e-5;
  const double fd = (loss_value_grad(LossKind::logistic, 50.0 + h, -1.0).value -
                     loss_value_grad(LossKind::logistic, 50.0 - h, -1.0).value) /
                    (2 * h);
  EXPECT_NEAR(l.derivative, fd, 1e-8);
  EXPECT_GT(l.derivative, 0.0);
}

TEST(Loss, LogisticRejectsOtherLabels) {
  EXPECT_THROW(loss_value_grad(LossKind::logistic, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(loss_value_grad(LossKind::logistic, 0.0, 2.0), std::invalid_argument);
}

TEST(Objective, ZeroParamsGiveHalfMeanSquaredTarget) {
  const Dataset data = random_data(13, 4, Task::regression, 1);
  const TmParams zero(TmShape{4, 3, 2});
  double expected = 0.0;
  for (double y : data.y) expected += 0.5 * y * y;
  expected /= 13.0;
  EXPECT_NEAR(objective_value(zero, data, {0.7, LossKind::squared}), expected, 1e-15);
}

TEST(Objective, SinglePointIsChainRule) {
  const Dataset data = random_data(1, 3, Task::regression, 2);
  const TmParams p = init_random(3, 3, 2, 0.5, 3);
  const ValueGrad vg = objective_value_grad(p, data, {0.0, LossKind::squared});
  const double f = evaluate(p, data.row(0));
  const LossValue l = loss_value_grad(LossKind::squared, f, data.y[0]);
  EXPECT_DOUBLE_EQ(vg.value, l.value);
  const TmGradient g = grad_point(p, data.row(0), l.derivative);
  for (std::size_t k = 0; k < g.values().size(); ++k) EXPECT_NEAR(vg.grad.values()[k], g.values()[k], 1e-14);
}

TEST(Objective, GradientMatchesCentralDifferences) {
  for (LossKind loss : {LossKind::squared, LossKind::logistic}) {
    const Dataset data = random_data(17, 5, loss == LossKind::logistic ? Task::binary : Task::regression, 4);
    const TmParams p = init_random(5, 3, 2, 0.6, 5);
    const ObjectiveConfig cfg{1e-3, loss};
    const ValueGrad vg = objective_value_grad(p, data, cfg);
    auto flat = flatten(p);
    const double h = 1e-6;
    for (std::size_t k = 0; k < flat.size(); ++k) {
      const double saved = flat[k];
      flat[k] = saved + h;
      const double up = objective_value(unflatten(flat, p.shape()), data, cfg);
      flat[k] = saved - h;
      const double down = objective_value(unflatten(flat, p.shape()), data, cfg);
      flat[k] = saved;
      const double fd = (up - down) / (2 * h);
      const double an = vg.grad.values()[k];
      EXPECT_LE(std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1.0}), 1e-6);
    }
  }
}

TEST(Objective, PartitionRecombinesDataTermsExactly) {
  const Dataset data = random_data(12, 3, Task::regression, 6);
  const TmParams p = init_random(3, 2, 2, 0.5, 7);
  const ObjectiveConfig with_reg{0.3, LossKind::squared}, no_reg{0.0, LossKind::squared};
  const std::vector<std::size_t> a{0, 2, 5, 7, 9}, b{1, 3, 4, 6, 8, 10, 11};
  const double reg = objective_value(p, data, with_reg) - objective_value(p, data, no_reg);
  const double va = objective_value_grad(p, data, no_reg, a).value;
  const double vb = objective_value_grad(p, data, no_reg, b).value;
  EXPECT_NEAR(objective_value(p, data, no_reg), (5 * va + 7 * vb) / 12.0, 1e-15);
  // Every subset carries the full regularizer once.
  EXPECT_NEAR(objective_value_grad(p, data, with_reg, a).value - va, reg, 1e-15);
}

TEST(Objective, RegularizerGradientIsTwoLambdaParams) {
  Dataset data = random_data(5, 3, Task::regression, 8);
  const TmParams p = init_random(3, 3, 1, 0.5, 9);
  const double lambda = 0.25;
  const ValueGrad with = objective_value_grad(p, data, {lambda, LossKind::squared});
  const ValueGrad without = objective_value_grad(p, data, {0.0, LossKind::squared});
  EXPECT_EQ(with.grad.bias(), without.grad.bias());
  for (std::size_t k = 1; k < p.values().size(); ++k) {
    EXPECT_NEAR(with.grad.values()[k] - without.grad.values()[k], 2 * lambda * p.values()[k], 1e-15);
  }
}

TEST(Objective, MonotoneInLambda) {
  const Dataset data = random_data(9, 3, Task::binary, 10);
  const TmParams p = init_random(3, 2, 2, 0.5, 11);
  double prev = -1.0;
  for (double lambda : {0.0, 1e-6, 1e-3, 0.1, 1.0}) {
    const double v = objective_value(p, data, {lambda, LossKind::logistic});
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Objective, Errors) {
  const Dataset data = random_data(4, 3, Task::regression, 12);
  const TmParams p = init_random(3, 2, 1, 0.5, 13);
  const std::vector<std::size_t> none;
  EXPECT_THROW(objective_value_grad(p, data, {0.0, LossKind::squared}, none), std::invalid_argument);
  const std::vector<std::size_t> bad{0, 4};
  EXPECT_THROW(objective_value_grad(p, data, {0.0, LossKind::squared}, bad), DimensionError);
  EXPECT_THROW(objective_value(init_random(2, 2, 1, 0.5, 1), data, {}), DimensionError);
  EXPECT_THROW(objective_value(p, data, {-1.0, LossKind::squared}), std::invalid_argument);
}

}  // namespace
