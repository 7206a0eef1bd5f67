#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tmach/data.hpp"
#include "tmach/lbfgs.hpp"
#include "tmach/model.hpp"
#include "tmach/objective.hpp"

namespace tmach {

enum class StepDecay {
  constant,  // base_step every epoch
  inv_sqrt,  // base_step / sqrt(1 + epoch)
};

struct StochasticSolverConfig {
  std::size_t epochs = 50;
  /// 0 selects ceil(sqrt(n)); always clipped to [1, n].
  std::size_t minibatch_count = 0;
  double base_step = 0.01;
  StepDecay decay = StepDecay::constant;
  /// Per-coordinate step scaling by accumulated squared gradients.
  bool adaptive = true;
  double adaptive_epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t max_restarts = 3;

  std::size_t minibatches_for(std::size_t n) const;
  void validate() const;
};

struct TraceRow {
  std::size_t iter;  // 0 is the initial point
  double objective;
  double grad_norm;  // infinity norm of the full gradient
  double seconds;
};

struct FitReport {
  std::string solver;  // "batch" or "stochastic"
  std::vector<TraceRow> trace;
  std::size_t iterations = 0;  // accepted steps (batch) or completed epochs (stochastic)
  double seconds = 0.0;
  std::uint64_t seed = 0;
  std::string status;
  bool line_search_failed = false;
  std::size_t restarts = 0;  // stochastic divergence restarts
  /// key=value echo of every setting that influenced the fit.
  std::vector<std::pair<std::string, std::string>> config;
  /// Batch only: per accepted step (previous objective, step length, g^T d).
  std::vector<LbfgsStep> steps;
};

struct FitResult {
  TmParams params;
  FitReport report;
};

FitResult fit_batch(const TmParams& init, const Dataset& data, const ObjectiveConfig& objective,
                    const BatchSolverConfig& cfg);

/// Throws SolverError when the divergence detector gives up.
FitResult fit_stochastic(const TmParams& init, const Dataset& data, const ObjectiveConfig& objective,
                         const StochasticSolverConfig& cfg);

/// One `key value` pair per line, then one line per trace row.
void write_fit_log(std::ostream& out, const FitReport& report);

/// `# ...` summary comment line, then `iter,objective,grad_norm[,seconds]`.
/// Without timings the body depends only on the inputs and seeds.
void write_trace_csv(std::ostream& out, const FitReport& report, bool include_timings);

}  // namespace tmach
