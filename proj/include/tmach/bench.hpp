#pragma once

// Experiment drivers shared by the command line: single fits, k-fold grid
// search and the saturation benchmark against kernel ridge regression.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tmach/data.hpp"
#include "tmach/solvers.hpp"

namespace tmach {

enum class SolverKind { batch, stochastic };

struct TrainConfig {
  std::size_t degree = 2;
  std::size_t rank = 2;
  double lambda = 1e-5;
  double alpha = 0.1;
  std::uint64_t seed = 0;
  SolverKind solver = SolverKind::batch;
  BatchSolverConfig batch;
  StochasticSolverConfig stochastic;  // its seed is overwritten by `seed`
};

/// Squared loss for regression, logistic for binary labels.
LossKind loss_for(Task task);

/// init_random(d, q, r, alpha, seed) followed by the configured solver.
FitResult train_tm(const Dataset& train, const TrainConfig& cfg);

struct CvCell {
  double lambda = 0.0;
  double alpha = 0.0;
  std::vector<double> fold_metrics;
  double mean = 0.0;
};

struct CvResult {
  std::vector<CvCell> cells;  // lambda-major, grid order
  std::size_t best = 0;
};

/// Grid search over (lambda, alpha) with k folds from kfold(n, k, seed).
/// Each fold is preprocessed with its own training statistics when
/// `preprocess_folds` is set. Ties go to the larger lambda, then the smaller alpha.
CvResult cross_validate(const Dataset& train, const std::vector<double>& lambdas, const std::vector<double>& alphas,
                        std::size_t folds, const TrainConfig& base, bool preprocess_folds);

void write_cv_table(std::ostream& out, const CvResult& result);

struct BenchConfig {
  std::vector<std::string> methods{"krr", "tm-batch"};
  std::size_t trials = 3;
  std::size_t max_sweeps = 6;
  double saturation = 0.02;  // stop when the gain drops below this fraction of err(krr)
  std::uint64_t seed = 0;
  TrainConfig tm;            // degree, rank, lambda, alpha for both TM solvers
  double ridge_lambda = 1e-6;
  double krr_lambda = 1e-6;
  std::size_t krr_cap = 40000;
  double fm_lambda = 1e-5;
};

struct BenchRow {
  std::string method;
  double err = 0.0;
  double seconds = 0.0;
  double relerr = 0.0;
  double reltime = 0.0;
  std::string major_param;  // "-" for krr
  std::string status = "ok";
};

/// (err - err_krr) / err_krr
double relative_error(double err, double err_krr);
/// time / time_krr
double relative_time(double seconds, double seconds_krr);

bool is_bench_method(const std::string& name);

/// Runs KRR first, then every other method with a doubling sweep of its major
/// parameter. Method failures become rows with a non-ok status.
std::vector<BenchRow> run_bench(const Dataset& train, const Dataset& test, const BenchConfig& cfg);

/// Header `method,err,seconds,relerr,reltime,major_param,status`.
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace tmach
