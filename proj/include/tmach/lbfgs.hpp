#pragma once

// Limited-memory BFGS over a flat parameter vector, with a line search that
// enforces the strong Wolfe conditions (bracketing then zoom with safeguarded
// cubic interpolation).

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace tmach {

/// Writes the gradient at x into grad and returns the objective value.
using ValueGradFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct BatchSolverConfig {
  std::size_t max_iters = 500;
  std::size_t memory = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  double grad_tol = 1e-6;  // on the infinity norm
  double objective_rel_tol = 1e-9;
  std::size_t max_line_search_steps = 50;

  void validate() const;
};

enum class LbfgsStatus {
  gradient_converged,
  objective_converged,
  max_iterations,
  line_search_failed,
};

const char* to_string(LbfgsStatus status);

struct LbfgsStep {
  double objective;         // after the step
  double grad_inf_norm;     // after the step
  double seconds;           // since the solver started
  double previous_objective;
  double step_length;
  double directional_derivative;  // g_k^T d_k, negative
};

struct LbfgsResult {
  std::vector<double> x;
  double objective = 0.0;
  double grad_inf_norm = 0.0;
  double initial_objective = 0.0;
  double initial_grad_inf_norm = 0.0;
  std::vector<LbfgsStep> steps;
  LbfgsStatus status = LbfgsStatus::max_iterations;
  double seconds = 0.0;

  std::size_t iterations() const { return steps.size(); }
};

/// Throws SolverError when the objective or gradient is non-finite at x0.
/// A line-search failure returns the best iterate with status line_search_failed.
LbfgsResult minimize_lbfgs(const ValueGradFn& fn, std::vector<double> x0, const BatchSolverConfig& cfg);

}  // namespace tmach
