#include "tmach/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "tmach/baselines.hpp"
#include "tmach/text.hpp"

namespace tmach {

LossKind loss_for(Task task) { return task == Task::binary ? LossKind::logistic : LossKind::squared; }

FitResult train_tm(const Dataset& train, const TrainConfig& cfg) {
  const TmParams init = init_random(train.dim(), cfg.degree, cfg.rank, cfg.alpha, cfg.seed);
  const ObjectiveConfig objective{cfg.lambda, loss_for(train.task)};
  StochasticSolverConfig sc = cfg.stochastic;
  sc.seed = cfg.seed;
  FitResult result = cfg.solver == SolverKind::batch ? fit_batch(init, train, objective, cfg.batch)
                                                     : fit_stochastic(init, train, objective, sc);
  result.report.seed = cfg.seed;
  result.report.config.emplace_back("alpha", format_double(cfg.alpha));
  return result;
}

CvResult cross_validate(const Dataset& train, const std::vector<double>& lambdas, const std::vector<double>& alphas,
                        std::size_t folds, const TrainConfig& base, bool preprocess_folds) {
  if (lambdas.empty() || alphas.empty()) throw std::invalid_argument("cv: grids must be nonempty");
  const auto fold_sets = kfold(train.size(), folds, base.seed);

  // Split and preprocess once; every grid cell reuses the same folds.
  std::vector<std::pair<Dataset, Dataset>> splits;
  for (std::size_t f = 0; f < fold_sets.size(); ++f) {
    std::vector<std::size_t> fit_rows;
    for (std::size_t g = 0; g < fold_sets.size(); ++g) {
      if (g != f) fit_rows.insert(fit_rows.end(), fold_sets[g].begin(), fold_sets[g].end());
    }
    std::sort(fit_rows.begin(), fit_rows.end());
    std::vector<std::size_t> held = fold_sets[f];
    std::sort(held.begin(), held.end());
    Dataset fit = train.subset(fit_rows);
    Dataset val = train.subset(held);
    splits.push_back(preprocess_folds ? preprocess(fit, val) : std::make_pair(std::move(fit), std::move(val)));
  }

  CvResult result;
  for (double lambda : lambdas) {
    for (double alpha : alphas) {
      CvCell cell;
      cell.lambda = lambda;
      cell.alpha = alpha;
      TrainConfig cfg = base;
      cfg.lambda = lambda;
      cfg.alpha = alpha;
      for (const auto& [fit, val] : splits) {
        const FitResult fr = train_tm(fit, cfg);
        cell.fold_metrics.push_back(metric(predict(fr.params, val), val.y, val.task).value);
      }
      double sum = 0.0;
      for (double m : cell.fold_metrics) sum += m;
      cell.mean = sum / static_cast<double>(cell.fold_metrics.size());
      result.cells.push_back(std::move(cell));
    }
  }

  auto better = [](const CvCell& a, const CvCell& b) {
    if (a.mean != b.mean) return a.mean < b.mean;
    if (a.lambda != b.lambda) return a.lambda > b.lambda;
    return a.alpha < b.alpha;
  };
  for (std::size_t k = 1; k < result.cells.size(); ++k) {
    if (better(result.cells[k], result.cells[result.best])) result.best = k;
  }
  return result;
}

void write_cv_table(std::ostream& out, const CvResult& result) {
  out << "lambda,alpha,fold,metric\n";
  for (const CvCell& cell : result.cells) {
    for (std::size_t f = 0; f < cell.fold_metrics.size(); ++f) {
      out << format_double(cell.lambda) << ',' << format_double(cell.alpha) << ',' << f << ','
          << format_double(cell.fold_metrics[f]) << '\n';
    }
    out << format_double(cell.lambda) << ',' << format_double(cell.alpha) << ",mean," << format_double(cell.mean)
        << '\n';
  }
}

double relative_error(double err, double err_krr) { return (err - err_krr) / err_krr; }

double relative_time(double seconds, double seconds_krr) { return seconds / seconds_krr; }

namespace {

constexpr const char* kMethods[] = {"tm-batch", "tm-stochastic", "kk", "craftmaps", "krr", "fm2"};

struct Outcome {
  double err = 0.0;
  double seconds = 0.0;
};

// One method at one major-parameter value for one trial seed; returns the test error.
using MethodRun = std::function<double(std::size_t major, std::uint64_t seed)>;

std::size_t sweep_floor(const std::string& method) {
  if (method == "tm-batch") return 25;
  if (method == "tm-stochastic") return 5;
  if (method == "kk" || method == "craftmaps") return 64;
  if (method == "fm2") return 2;
  return 0;
}

MethodRun make_run(const std::string& method, const Dataset& train, const Dataset& test, const BenchConfig& cfg) {
  const std::size_t q = cfg.tm.degree;
  auto err_of = [&test](std::span<const double> pred) { return metric(pred, test.y, test.task).value; };
  if (method == "tm-batch" || method == "tm-stochastic") {
    const bool batch = method == "tm-batch";
    return [&, batch, err_of](std::size_t major, std::uint64_t seed) {
      TrainConfig tc = cfg.tm;
      tc.seed = seed;
      tc.solver = batch ? SolverKind::batch : SolverKind::stochastic;
      if (batch) {
        tc.batch.max_iters = major;
      } else {
        tc.stochastic.epochs = major;
      }
      return err_of(predict(train_tm(train, tc).params, test));
    };
  }
  if (method == "kk" || method == "craftmaps") {
    const bool craft = method == "craftmaps";
    return [&, craft, q, err_of](std::size_t major, std::uint64_t seed) {
      FeatureMap map = kk_map(seed, train.dim(), q, craft ? 4 * major : major, DegreePolicy::stratified);
      if (craft) map = craftmaps_project(map, seed);
      const auto w = ridge_on_features(apply_map(map, train.x), train.y, cfg.ridge_lambda, train.task);
      return err_of(linear_predict(apply_map(map, test.x), w));
    };
  }
  if (method == "krr") {
    return [&, q, err_of](std::size_t, std::uint64_t seed) {
      KrrOptions opts{q, cfg.krr_lambda, cfg.krr_cap, seed};
      return err_of(krr_poly(train.x, train.y, test.x, opts));
    };
  }
  if (method == "fm2") {
    return [&, err_of](std::size_t major, std::uint64_t seed) {
      FmFitOptions opts;
      opts.factors = major;
      opts.lambda = cfg.fm_lambda;
      opts.loss = loss_for(train.task);
      opts.alpha = cfg.tm.alpha;
      opts.seed = seed;
      const FmParams p = fm2_fit(train, opts);
      std::vector<double> pred(test.size());
      for (std::size_t i = 0; i < test.size(); ++i) pred[i] = fm2_eval(p, test.row(i));
      return err_of(pred);
    };
  }
  throw std::invalid_argument("unknown bench method '" + method + "'");
}

Outcome average_trials(const MethodRun& run, std::size_t major, const BenchConfig& cfg) {
  Outcome o;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const auto start = std::chrono::steady_clock::now();
    o.err += run(major, cfg.seed + t);
    o.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  o.err /= static_cast<double>(cfg.trials);
  o.seconds /= static_cast<double>(cfg.trials);
  return o;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

bool is_bench_method(const std::string& name) {
  return std::find(std::begin(kMethods), std::end(kMethods), name) != std::end(kMethods);
}

std::vector<BenchRow> run_bench(const Dataset& train, const Dataset& test, const BenchConfig& cfg) {
  if (std::find(cfg.methods.begin(), cfg.methods.end(), "krr") == cfg.methods.end()) {
    throw std::invalid_argument("bench: method list must include krr");
  }
  for (const auto& m : cfg.methods) {
    if (!is_bench_method(m)) throw std::invalid_argument("bench: unknown method '" + m + "'");
  }
  if (cfg.trials == 0 || cfg.max_sweeps == 0) throw std::invalid_argument("bench: trials and max sweeps must be positive");

  BenchRow krr{"krr", 0.0, 0.0, 0.0, 1.0, "-", "ok"};
  try {
    const Outcome o = average_trials(make_run("krr", train, test, cfg), 0, cfg);
    krr.err = o.err;
    krr.seconds = o.seconds;
  } catch (const std::exception& e) {
    krr.status = "failed: " + sanitize(e.what());
    krr.err = krr.seconds = krr.relerr = krr.reltime = std::numeric_limits<double>::quiet_NaN();
  }

  std::vector<BenchRow> rows;
  for (const auto& method : cfg.methods) {
    if (method == "krr") {
      rows.push_back(krr);
      continue;
    }
    BenchRow row{method, 0.0, 0.0, 0.0, 0.0, "", "ok"};
    try {
      const MethodRun run = make_run(method, train, test, cfg);
      std::size_t major = sweep_floor(method);
      Outcome current = average_trials(run, major, cfg);
      for (std::size_t sweep = 1; sweep < cfg.max_sweeps; ++sweep) {
        const Outcome next = average_trials(run, 2 * major, cfg);
        const bool saturated = current.err - next.err < cfg.saturation * krr.err;
        major *= 2;
        current = next;
        if (saturated) break;
      }
      row.err = current.err;
      row.seconds = current.seconds;
      row.major_param = std::to_string(major);
    } catch (const std::exception& e) {
      row.status = "failed: " + sanitize(e.what());
      row.err = row.seconds = std::numeric_limits<double>::quiet_NaN();
    }
    row.relerr = relative_error(row.err, krr.err);
    row.reltime = relative_time(row.seconds, krr.seconds);
    rows.push_back(row);
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "method,err,seconds,relerr,reltime,major_param,status\n";
  for (const BenchRow& r : rows) {
    out << r.method << ',' << format_double(r.err) << ',' << format_double(r.seconds) << ','
        << format_double(r.relerr) << ',' << format_double(r.reltime) << ',' << r.major_param << ',' << r.status
        << '\n';
  }
}

}  // namespace tmach
