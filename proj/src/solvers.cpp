#include "tmach/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "tmach/errors.hpp"
#include "tmach/rng.hpp"
#include "tmach/text.hpp"

namespace tmach {

namespace {

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

const char* loss_name(LossKind loss) { return loss == LossKind::squared ? "squared" : "logistic"; }

void echo_common(FitReport& report, const TmParams& init, const ObjectiveConfig& objective) {
  const TmShape& s = init.shape();
  report.config.emplace_back("dim", std::to_string(s.dim));
  report.config.emplace_back("degree", std::to_string(s.degree));
  report.config.emplace_back("rank", std::to_string(s.rank));
  report.config.emplace_back("lambda", format_double(objective.lambda));
  report.config.emplace_back("loss", loss_name(objective.loss));
}

void check_shapes(const TmParams& init, const Dataset& data) {
  if (init.shape().dim != data.dim()) {
    throw DimensionError("fit: model dimension " + std::to_string(init.shape().dim) + " does not match data (" +
                         std::to_string(data.dim()) + ")");
  }
  if (data.size() == 0) throw std::invalid_argument("fit: empty dataset");
}

}  // namespace

FitResult fit_batch(const TmParams& init, const Dataset& data, const ObjectiveConfig& objective,
                    const BatchSolverConfig& cfg) {
  check_shapes(init, data);
  objective.validate();
  cfg.validate();
  const TmShape shape = init.shape();

  TmParams work(shape);
  TmGradient grad(shape);
  ValueGradFn fn = [&](std::span<const double> x, std::span<double> g) {
    std::copy(x.begin(), x.end(), work.values().begin());
    const double value = objective_value_grad_into(work, data, objective, std::nullopt, grad);
    std::copy(grad.values().begin(), grad.values().end(), g.begin());
    return value;
  };
  LbfgsResult opt = minimize_lbfgs(fn, flatten(init), cfg);

  FitResult result{unflatten(opt.x, shape), {}};
  FitReport& report = result.report;
  report.solver = "batch";
  report.iterations = opt.iterations();
  report.seconds = opt.seconds;
  report.status = to_string(opt.status);
  report.line_search_failed = opt.status == LbfgsStatus::line_search_failed;
  report.trace.push_back({0, opt.initial_objective, opt.initial_grad_inf_norm, 0.0});
  for (std::size_t k = 0; k < opt.steps.size(); ++k) {
    const LbfgsStep& s = opt.steps[k];
    report.trace.push_back({k + 1, s.objective, s.grad_inf_norm, s.seconds});
  }
  report.steps = std::move(opt.steps);
  echo_common(report, init, objective);
  report.config.emplace_back("solver", "batch");
  report.config.emplace_back("max_iters", std::to_string(cfg.max_iters));
  report.config.emplace_back("memory", std::to_string(cfg.memory));
  report.config.emplace_back("c1", format_double(cfg.c1));
  report.config.emplace_back("c2", format_double(cfg.c2));
  report.config.emplace_back("grad_tol", format_double(cfg.grad_tol));
  report.config.emplace_back("objective_rel_tol", format_double(cfg.objective_rel_tol));
  return result;
}

std::size_t StochasticSolverConfig::minibatches_for(std::size_t n) const {
  std::size_t k = minibatch_count;
  if (k == 0) k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

void StochasticSolverConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("stochastic solver: epochs must be at least 1");
  if (!(base_step > 0.0) || !std::isfinite(base_step)) {
    throw std::invalid_argument("stochastic solver: base_step must be positive");
  }
  if (!(adaptive_epsilon > 0.0)) throw std::invalid_argument("stochastic solver: adaptive_epsilon must be positive");
}

FitResult fit_stochastic(const TmParams& init, const Dataset& data, const ObjectiveConfig& objective,
                         const StochasticSolverConfig& cfg) {
  check_shapes(init, data);
  objective.validate();
  cfg.validate();
  const std::size_t n = data.size();
  if (cfg.minibatch_count > n) {
    throw std::invalid_argument("stochastic solver: minibatch_count exceeds the number of rows");
  }
  const std::size_t batches = cfg.minibatches_for(n);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  TmParams params = init;
  TmGradient grad(init.shape());
  const double initial = objective_value_grad_into(params, data, objective, std::nullopt, grad);
  if (!std::isfinite(initial)) throw SolverError("stochastic solver: non-finite objective at the initial point");

  FitResult result{init, {}};
  FitReport& report = result.report;
  report.solver = "stochastic";
  report.seed = cfg.seed;
  report.trace.push_back({0, initial, inf_norm(grad.values()), 0.0});

  TmParams best = params;
  double best_value = initial;
  const double blowup = 10.0 * std::max(initial, std::numeric_limits<double>::min());
  double base_step = cfg.base_step;
  std::vector<double> accum(params.values().size(), 0.0);

  auto rng = make_rng(cfg.seed, stream::kShuffle);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> block;

  std::size_t epoch = 0;
  while (epoch < cfg.epochs) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const double step =
        cfg.decay == StepDecay::inv_sqrt ? base_step / std::sqrt(1.0 + static_cast<double>(epoch)) : base_step;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t len = n / batches + (b < n % batches ? 1 : 0);
      // Rows within a block are visited in index order, so a single block
      // accumulates exactly like the full-batch objective.
      block.assign(perm.begin() + pos, perm.begin() + pos + len);
      std::sort(block.begin(), block.end());
      pos += len;
      objective_value_grad_into(params, data, objective, std::span<const std::size_t>(block), grad);
      auto p = params.values();
      auto g = grad.values();
      if (cfg.adaptive) {
        for (std::size_t k = 0; k < p.size(); ++k) {
          accum[k] += g[k] * g[k];
          p[k] -= step * g[k] / (std::sqrt(accum[k]) + cfg.adaptive_epsilon);
        }
      } else {
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= step * g[k];
      }
    }

    const double value = objective_value_grad_into(params, data, objective, std::nullopt, grad);
    if (!std::isfinite(value) || value > blowup) {
      if (report.restarts >= cfg.max_restarts) {
        throw SolverError("stochastic solver: objective diverged (" + format_double(value) + " vs initial " +
                          format_double(initial) + ") after " + std::to_string(report.restarts) +
                          " step halvings; last base_step " + format_double(base_step));
      }
      ++report.restarts;
      base_step *= 0.5;
      params = best;
      std::fill(accum.begin(), accum.end(), 0.0);
      continue;
    }
    ++epoch;
    report.trace.push_back({epoch, value, inf_norm(grad.values()), elapsed()});
    if (value < best_value) {
      best_value = value;
      best = params;
    }
  }

  result.params = std::move(params);
  report.iterations = epoch;
  report.seconds = elapsed();
  report.status = "epochs_completed";
  echo_common(report, init, objective);
  report.config.emplace_back("solver", "stochastic");
  report.config.emplace_back("epochs", std::to_string(cfg.epochs));
  report.config.emplace_back("minibatches", std::to_string(batches));
  report.config.emplace_back("base_step", format_double(cfg.base_step));
  report.config.emplace_back("final_base_step", format_double(base_step));
  report.config.emplace_back("decay", cfg.decay == StepDecay::constant ? "constant" : "inv_sqrt");
  report.config.emplace_back("adaptive", cfg.adaptive ? "1" : "0");
  report.config.emplace_back("seed", std::to_string(cfg.seed));
  return result;
}

void write_fit_log(std::ostream& out, const FitReport& report) {
  out << "solver " << report.solver << '\n';
  out << "status " << report.status << '\n';
  out << "iterations " << report.iterations << '\n';
  out << "seconds " << format_double(report.seconds) << '\n';
  out << "seed " << report.seed << '\n';
  if (report.restarts > 0) out << "restarts " << report.restarts << '\n';
  if (report.line_search_failed) out << "line_search_failed 1\n";
  for (const auto& [key, value] : report.config) out << "config." << key << ' ' << value << '\n';
  for (const TraceRow& row : report.trace) {
    out << "iter " << row.iter << " objective " << format_double(row.objective) << " grad_norm "
        << format_double(row.grad_norm) << " seconds " << format_double(row.seconds) << '\n';
  }
}

void write_trace_csv(std::ostream& out, const FitReport& report, bool include_timings) {
  out << "# solver=" << report.solver << " status=" << report.status << " iterations=" << report.iterations
      << " seed=" << report.seed;
  if (include_timings) out << " wall_seconds=" << format_double(report.seconds);
  out << '\n';
  out << (include_timings ? "iter,objective,grad_norm,seconds\n" : "iter,objective,grad_norm\n");
  for (const TraceRow& row : report.trace) {
    out << row.iter << ',' << format_double(row.objective) << ',' << format_double(row.grad_norm);
    if (include_timings) out << ',' << format_double(row.seconds);
    out << '\n';
  }
}

}  // namespace tmach
