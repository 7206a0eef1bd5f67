#include "tmach/lbfgs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "tmach/errors.hpp"
#include "tmach/simd.hpp"

namespace tmach {

void BatchSolverConfig::validate() const {
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw std::invalid_argument("lbfgs: need 0 < c1 < c2 < 1");
  if (memory == 0) throw std::invalid_argument("lbfgs: memory must be at least 1");
  if (max_line_search_steps == 0) throw std::invalid_argument("lbfgs: line search needs at least one step");
}

const char* to_string(LbfgsStatus status) {
  switch (status) {
    case LbfgsStatus::gradient_converged: return "gradient_converged";
    case LbfgsStatus::objective_converged: return "objective_converged";
    case LbfgsStatus::max_iterations: return "max_iterations";
    case LbfgsStatus::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

namespace {

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

struct TrialPoint {
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;  // phi'(step)
  bool finite = true;
  std::vector<double> x;
  std::vector<double> grad;
};

class LineSearch {
 public:
  LineSearch(const ValueGradFn& fn, const BatchSolverConfig& cfg, std::span<const double> x,
             std::span<const double> dir, double value0, double slope0)
      : fn_(fn), cfg_(cfg), x_(x), dir_(dir), value0_(value0), slope0_(slope0) {}

  /// Returns true when a strong Wolfe point was found; `best` then holds it.
  /// On failure `best` holds the lowest sufficient-decrease point seen, if
  /// any (best.step > 0).
  bool run(double initial_step, TrialPoint& best) {
    TrialPoint prev;
    prev.step = 0.0;
    prev.value = value0_;
    prev.slope = slope0_;
    best = prev;

    double step = initial_step;
    for (bool first = true; evaluations_ < cfg_.max_line_search_steps; first = false) {
      TrialPoint cur = evaluate(step);
      if (!cur.finite || cur.value > value0_ + cfg_.c1 * step * slope0_ || (!first && cur.value >= prev.value)) {
        return zoom(std::move(prev), std::move(cur), best);
      }
      remember(cur, best);
      if (std::abs(cur.slope) <= -cfg_.c2 * slope0_) {
        best = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(std::move(cur), std::move(prev), best);
      prev = std::move(cur);
      step *= 2.0;
    }
    return false;
  }

 private:
  TrialPoint evaluate(double step) {
    ++evaluations_;
    TrialPoint t;
    t.step = step;
    t.x.assign(x_.begin(), x_.end());
    simd::axpy(step, dir_, t.x);
    t.grad.assign(x_.size(), 0.0);
    t.value = fn_(t.x, t.grad);
    t.finite = std::isfinite(t.value) && all_finite(t.grad);
    t.slope = t.finite ? simd::dot(t.grad, dir_) : 0.0;
    return t;
  }

  void remember(const TrialPoint& t, TrialPoint& best) const {
    if (t.finite && t.step > 0.0 && t.value <= value0_ + cfg_.c1 * t.step * slope0_ &&
        (best.step == 0.0 || t.value < best.value)) {
      best = t;
    }
  }

  // lo satisfies sufficient decrease with the lowest value seen so far; the
  // interval between lo and hi contains a strong Wolfe point.
  bool zoom(TrialPoint lo, TrialPoint hi, TrialPoint& best) {
    remember(lo, best);
    while (evaluations_ < cfg_.max_line_search_steps) {
      const double width = hi.step - lo.step;
      double step = lo.step + 0.5 * width;
      if (hi.finite) {
        const double d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (lo.step - hi.step);
        const double disc = d1 * d1 - lo.slope * hi.slope;
        if (disc >= 0.0) {
          const double d2 = std::copysign(std::sqrt(disc), width);
          const double cubic =
              hi.step - width * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
          const double a = std::min(lo.step, hi.step) + 0.1 * std::abs(width);
          const double b = std::max(lo.step, hi.step) - 0.1 * std::abs(width);
          if (std::isfinite(cubic) && cubic >= a && cubic <= b) step = cubic;
        }
      }
      if (std::abs(width) <= std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(lo.step))) {
        return false;
      }
      TrialPoint cur = evaluate(step);
      if (!cur.finite || cur.value > value0_ + cfg_.c1 * step * slope0_ || cur.value >= lo.value) {
        hi = std::move(cur);
        continue;
      }
      remember(cur, best);
      if (std::abs(cur.slope) <= -cfg_.c2 * slope0_) {
        best = std::move(cur);
        return true;
      }
      if (cur.slope * (hi.step - lo.step) >= 0.0) hi = std::move(lo);
      lo = std::move(cur);
    }
    return false;
  }

  const ValueGradFn& fn_;
  const BatchSolverConfig& cfg_;
  std::span<const double> x_;
  std::span<const double> dir_;
  double value0_;
  double slope0_;
  std::size_t evaluations_ = 0;
};

struct CurvaturePair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

// dir = -H g via the two-loop recursion.
void two_loop(const std::deque<CurvaturePair>& memory, std::span<const double> grad, std::vector<double>& dir) {
  dir.assign(grad.begin(), grad.end());
  std::vector<double> alpha(memory.size());
  for (std::size_t k = memory.size(); k-- > 0;) {
    alpha[k] = memory[k].rho * simd::dot(memory[k].s, dir);
    simd::axpy(-alpha[k], memory[k].y, dir);
  }
  if (!memory.empty()) {
    const auto& last = memory.back();
    const double gamma = simd::dot(last.s, last.y) / simd::dot(last.y, last.y);
    for (double& v : dir) v *= gamma;
  }
  for (std::size_t k = 0; k < memory.size(); ++k) {
    const double beta = memory[k].rho * simd::dot(memory[k].y, dir);
    simd::axpy(alpha[k] - beta, memory[k].s, dir);
  }
  for (double& v : dir) v = -v;
}

}  // namespace

LbfgsResult minimize_lbfgs(const ValueGradFn& fn, std::vector<double> x0, const BatchSolverConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  LbfgsResult result;
  result.x = std::move(x0);
  std::vector<double> grad(result.x.size(), 0.0);
  double value = fn(result.x, grad);
  if (!std::isfinite(value) || !all_finite(grad)) {
    throw SolverError("lbfgs: non-finite objective or gradient at the initial point");
  }
  result.initial_objective = value;
  result.initial_grad_inf_norm = inf_norm(grad);
  result.objective = value;
  result.grad_inf_norm = result.initial_grad_inf_norm;
  if (result.grad_inf_norm <= cfg.grad_tol) {
    result.status = LbfgsStatus::gradient_converged;
    result.seconds = elapsed();
    return result;
  }

  std::deque<CurvaturePair> memory;
  std::vector<double> dir;
  result.status = LbfgsStatus::max_iterations;
  while (result.steps.size() < cfg.max_iters) {
    two_loop(memory, grad, dir);
    double slope = simd::dot(grad, dir);
    if (!(slope < 0.0)) {
      // Not a descent direction; restart from steepest descent.
      memory.clear();
      two_loop(memory, grad, dir);
      slope = simd::dot(grad, dir);
    }
    double initial_step = 1.0;
    if (memory.empty()) initial_step = 1.0 / std::sqrt(simd::dot(grad, grad));

    LineSearch search(fn, cfg, result.x, dir, value, slope);
    TrialPoint accepted;
    const bool ok = search.run(initial_step, accepted);
    if (!ok && accepted.step == 0.0) {
      result.status = LbfgsStatus::line_search_failed;
      break;
    }

    CurvaturePair pair;
    pair.s.resize(result.x.size());
    pair.y.resize(result.x.size());
    for (std::size_t k = 0; k < result.x.size(); ++k) {
      pair.s[k] = accepted.x[k] - result.x[k];
      pair.y[k] = accepted.grad[k] - grad[k];
    }
    const double sy = simd::dot(pair.s, pair.y);
    const double prev_value = value;
    result.x = std::move(accepted.x);
    grad = std::move(accepted.grad);
    value = accepted.value;
    const double gnorm = inf_norm(grad);
    result.steps.push_back({value, gnorm, elapsed(), prev_value, accepted.step, slope});

    if (sy > 1e-12 * std::sqrt(simd::dot(pair.s, pair.s) * simd::dot(pair.y, pair.y))) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (memory.size() > cfg.memory) memory.pop_front();
    }

    if (!ok) {
      result.status = LbfgsStatus::line_search_failed;
      break;
    }
    if (gnorm <= cfg.grad_tol) {
      result.status = LbfgsStatus::gradient_converged;
      break;
    }
    const double scale =
        std::max({std::abs(prev_value), std::abs(value), std::numeric_limits<double>::min()});
    if (prev_value - value <= cfg.objective_rel_tol * scale) {
      result.status = LbfgsStatus::objective_converged;
      break;
    }
  }
  result.objective = value;
  result.grad_inf_norm = inf_norm(grad);
  result.seconds = elapsed();
  return result;
}

}  // namespace tmach
