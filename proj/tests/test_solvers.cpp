#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <sstream>

#include "support.hpp"
#include "tmach/errors.hpp"
#include "tmach/solvers.hpp"

namespace {

using namespace tmach;
using tmach::testing::gaussian;

double test_relerr(const TmParams& p, const Dataset& test) { return metric(predict(p, test), test.y, test.task).value; }

TEST(Lbfgs, QuadraticBowl) {
  // f(x) = sum_k (k+1) (x_k - 1)^2
  ValueGradFn fn = [](std::span<const double> x, std::span<double> g) {
    double v = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      v += (k + 1.0) * (x[k] - 1) * (x[k] - 1);
      g[k] = 2.0 * (k + 1.0) * (x[k] - 1);
    }
    return v;
  };
  const LbfgsResult r = minimize_lbfgs(fn, std::vector<double>(8, -3.0), {});
  EXPECT_EQ(r.status, LbfgsStatus::gradient_converged);
  for (double v : r.x) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(Lbfgs, Rosenbrock) {
  ValueGradFn fn = [](std::span<const double> x, std::span<double> g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2 * a - 400 * x[0] * b;
    g[1] = 200 * b;
    return a * a + 100 * b * b;
  };
  BatchSolverConfig cfg;
  cfg.objective_rel_tol = 0.0;
  const LbfgsResult r = minimize_lbfgs(fn, {-1.2, 1.0}, cfg);
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x[1], 1.0, 1e-5);
}

TEST(Lbfgs, RejectsNonFiniteStartAndBadConfig) {
  ValueGradFn fn = [](std::span<const double> x, std::span<double> g) {
    g[0] = 1.0;
    return std::log(x[0]);
  };
  EXPECT_THROW(minimize_lbfgs(fn, {-1.0}, {}), SolverError);
  BatchSolverConfig bad;
  bad.c1 = 0.95;
  EXPECT_THROW(minimize_lbfgs(fn, {1.0}, bad), std::invalid_argument);
  bad = {};
  bad.memory = 0;
  EXPECT_THROW(minimize_lbfgs(fn, {1.0}, bad), std::invalid_argument);
}

TEST(Lbfgs, UnboundedBelowFlagsLineSearchFailure) {
  // Slope never flattens and the value never stops dropping: the line search
  // keeps expanding and runs out of evaluations.
  ValueGradFn fn = [](std::span<const double> x, std::span<double> g) {
    g[0] = -1.0;
    return -x[0];
  };
  BatchSolverConfig cfg;
  cfg.max_line_search_steps = 10;
  const LbfgsResult r = minimize_lbfgs(fn, {0.0}, cfg);
  EXPECT_EQ(r.status, LbfgsStatus::line_search_failed);
  EXPECT_GT(r.x[0], 0.0);
}

TEST(FitBatch, AffineModelMatchesNormalEquations) {
  std::mt19937_64 rng(1);
  const std::size_t n = 30, d = 4;
  Dataset data;
  data.x = Matrix(n, d);
  data.x.values = gaussian(n * d, rng);
  data.y = gaussian(n, rng);
  const double lambda = 0.05;

  // (1/n) A^T A theta + 2 lambda D theta = (1/n) A^T y with A = [1 X], D = diag(0, 1, ..., 1).
  Eigen::MatrixXd a(n, d + 1);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    for (std::size_t j = 0; j < d; ++j) a(i, j + 1) = data.x(i, j);
    y(i) = data.y[i];
  }
  Eigen::MatrixXd lhs = a.transpose() * a / n;
  for (std::size_t j = 1; j <= d; ++j) lhs(j, j) += 2 * lambda;
  const Eigen::VectorXd theta = lhs.partialPivLu().solve(a.transpose() * y / n);

  BatchSolverConfig cfg;
  cfg.grad_tol = 1e-12;
  cfg.objective_rel_tol = 0.0;
  const FitResult fit = fit_batch(init_random(d, 1, 0, 0.1, 2), data, {lambda, LossKind::squared}, cfg);
  for (std::size_t k = 0; k <= d; ++k) EXPECT_NEAR(fit.params.values()[k], theta(k), 1e-6);
}

TEST(FitBatch, StationaryStartReturnsImmediately) {
  std::mt19937_64 rng(3);
  Dataset data;
  data.x = Matrix(10, 3);
  data.x.values = gaussian(30, rng);
  data.y.assign(10, 0.0);
  const FitResult fit = fit_batch(TmParams(TmShape{3, 3, 2}), data, {1e-3, LossKind::squared}, {});
  EXPECT_EQ(fit.report.iterations, 0u);
  EXPECT_EQ(fit.report.trace.size(), 1u);
  EXPECT_EQ(fit.report.status, "gradient_converged");
}

TEST(FitBatch, TraceSatisfiesSufficientDecreaseAndIsDeterministic) {
  const SynthTask task = synth_tm_task(4, 6, 3, 2, 300, 50, 0.05);
  const TmParams init = init_random(6, 3, 2, 0.3, 5);
  BatchSolverConfig cfg;
  cfg.max_iters = 60;
  const FitResult a = fit_batch(init, task.train, {1e-4, LossKind::squared}, cfg);
  const FitResult b = fit_batch(init, task.train, {1e-4, LossKind::squared}, cfg);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.report.trace.size(), a.report.iterations + 1);
  for (const LbfgsStep& s : a.report.steps) {
    EXPECT_LT(s.directional_derivative, 0.0);
    EXPECT_LE(s.objective, s.previous_objective + cfg.c1 * s.step_length * s.directional_derivative);
  }
  for (std::size_t k = 1; k < a.report.trace.size(); ++k) {
    EXPECT_LE(a.report.trace[k].objective, a.report.trace[k - 1].objective);
  }
}

TEST(FitBatch, RecoversRankOneQuadratic) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SynthTask task = synth_tm_task(seed, 10, 2, 1, 2000, 500, 0.0);
    const FitResult fit = fit_batch(init_random(10, 2, 2, 0.1, seed), task.train, {1e-8, LossKind::squared}, {});
    EXPECT_LE(test_relerr(fit.params, task.test), 0.05) << "seed " << seed;
  }
}

TEST(FitBatch, RejectsShapeMismatch) {
  const SynthTask task = synth_tm_task(1, 4, 2, 1, 20, 5, 0.0);
  EXPECT_THROW(fit_batch(init_random(3, 2, 1, 0.1, 1), task.train, {}, {}), DimensionError);
}

TEST(FitStochastic, SingleBlockWithoutAdaptationIsGradientDescent) {
  const SynthTask task = synth_tm_task(7, 5, 3, 1, 64, 8, 0.0);
  const TmParams init = init_random(5, 3, 2, 0.3, 8);
  const ObjectiveConfig obj{1e-3, LossKind::squared};
  StochasticSolverConfig cfg;
  cfg.epochs = 5;
  cfg.minibatch_count = 1;
  cfg.adaptive = false;
  cfg.base_step = 0.05;
  const FitResult fit = fit_stochastic(init, task.train, obj, cfg);

  TmParams gd = init;
  for (int step = 0; step < 5; ++step) {
    const ValueGrad vg = objective_value_grad(gd, task.train, obj);
    for (std::size_t k = 0; k < gd.values().size(); ++k) gd.values()[k] -= 0.05 * vg.grad.values()[k];
  }
  EXPECT_EQ(fit.params, gd);
  EXPECT_EQ(fit.report.trace.size(), 6u);
}

TEST(FitStochastic, ConfigValidation) {
  const SynthTask task = synth_tm_task(1, 3, 2, 1, 10, 5, 0.0);
  const TmParams init = init_random(3, 2, 1, 0.1, 1);
  StochasticSolverConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(fit_stochastic(init, task.train, {}, cfg), std::invalid_argument);
  cfg = {};
  cfg.minibatch_count = 11;
  EXPECT_THROW(fit_stochastic(init, task.train, {}, cfg), std::invalid_argument);
  EXPECT_EQ(StochasticSolverConfig{}.minibatches_for(10), 4u);
  EXPECT_EQ(StochasticSolverConfig{}.minibatches_for(1), 1u);
}

TEST(FitStochastic, DeterministicGivenSeed) {
  const SynthTask task = synth_tm_task(2, 5, 2, 1, 200, 10, 0.0);
  const TmParams init = init_random(5, 2, 2, 0.3, 2);
  StochasticSolverConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 9;
  const FitResult a = fit_stochastic(init, task.train, {}, cfg);
  const FitResult b = fit_stochastic(init, task.train, {}, cfg);
  EXPECT_EQ(a.params, b.params);
  cfg.seed = 10;
  EXPECT_NE(fit_stochastic(init, task.train, {}, cfg).params, a.params);
}

TEST(FitStochastic, DivergenceHalvesStepThenFails) {
  const SynthTask task = synth_tm_task(3, 5, 3, 1, 100, 10, 0.0);
  const TmParams init = init_random(5, 3, 2, 0.3, 3);
  StochasticSolverConfig cfg;
  cfg.epochs = 3;
  cfg.base_step = 1e6;
  try {
    fit_stochastic(init, task.train, {}, cfg);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
  }
}

TEST(FitStochastic, RecoversRankOneQuadratic) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SynthTask task = synth_tm_task(seed, 10, 2, 1, 2000, 500, 0.0);
    StochasticSolverConfig cfg;
    cfg.epochs = 50;
    cfg.base_step = 0.05;
    cfg.seed = seed;
    const FitResult fit =
        fit_stochastic(init_random(10, 2, 2, 0.1, seed), task.train, {1e-8, LossKind::squared}, cfg);
    EXPECT_LE(test_relerr(fit.params, task.test), 0.08) << "seed " << seed;
  }
}

TEST(FitReport, TraceCsvLayout) {
  const SynthTask task = synth_tm_task(1, 3, 2, 1, 30, 5, 0.0);
  BatchSolverConfig cfg;
  cfg.max_iters = 3;
  const FitResult fit = fit_batch(init_random(3, 2, 1, 0.1, 1), task.train, {}, cfg);
  std::ostringstream plain, timed;
  write_trace_csv(plain, fit.report, false);
  write_trace_csv(timed, fit.report, true);
  std::istringstream in(plain.str());
  std::string comment, header;
  std::getline(in, comment);
  std::getline(in, header);
  EXPECT_EQ(comment.rfind("# solver=batch", 0), 0u);
  EXPECT_EQ(header, "iter,objective,grad_norm");
  EXPECT_NE(timed.str().find("iter,objective,grad_norm,seconds\n"), std::string::npos);
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, fit.report.trace.size());

  std::ostringstream log;
  write_fit_log(log, fit.report);
  EXPECT_NE(log.str().find("config.lambda 0"), std::string::npos);
}

}  // namespace
