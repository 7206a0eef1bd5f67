#include "tmach/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "tmach/bench.hpp"
#include "tmach/errors.hpp"
#include "tmach/generalization.hpp"
#include "tmach/rng.hpp"
#include "tmach/simd.hpp"
#include "tmach/text.hpp"

namespace tmach {

namespace {

struct Options {
  std::string data;
  std::string test;
  std::string format;
  int label_col = 0;
  std::string task = "reg";
  std::size_t degree = 2;
  std::size_t rank = 2;
  std::string solver = "batch";
  std::string lambda = "1e-5";
  std::string alpha = "0.1";
  std::uint64_t seed = 0;
  std::size_t epochs = 50;
  std::size_t iters = 500;
  std::size_t minibatches = 0;
  double step = 0.01;
  std::string out;
  std::string model;
  std::string methods = "krr,tm-batch,tm-stochastic,kk,craftmaps,fm2";
  std::size_t krr_cap = 40000;
  double krr_lambda = 1e-6;
  double ridge_lambda = 1e-6;
  std::size_t trials = 3;
  std::size_t max_sweeps = 6;
  std::size_t folds = 10;
  std::string preprocess = "full";
  std::string trace;
  bool timings = false;
  std::string synth;
  std::size_t draws = 200;
  std::size_t restarts = 20;
  std::size_t n = 20;
  std::size_t dim = 3;
  double b = 1.0;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> values;
  for (const auto& part : split(text, ',')) {
    const auto v = parse_double(part);
    if (!v) throw std::invalid_argument(std::string(flag) + ": '" + part + "' is not a number");
    values.push_back(*v);
  }
  if (values.empty()) throw std::invalid_argument(std::string(flag) + ": empty list");
  return values;
}

double parse_single(const std::string& text, const char* flag) {
  const auto values = parse_list(text, flag);
  if (values.size() != 1) throw std::invalid_argument(std::string(flag) + " takes one value for this command");
  return values.front();
}

std::ifstream open_in(const std::string& path) {
  if (path.empty()) throw DataError("missing input path");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

Task parse_task(const std::string& name) { return name == "cls" ? Task::binary : Task::regression; }

Dataset load(const std::string& path, const Options& o, std::ostream& err) {
  auto in = open_in(path);
  std::string format = o.format;
  if (format.empty()) format = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0 ? "csv" : "svm";
  Dataset data = format == "csv" ? parse_csv(in, o.label_col) : parse_sparse_text(in);
  if (parse_task(o.task) == Task::binary && normalize_binary_labels(data)) {
    err << "warning: " << path << ": labels {0,1} remapped to {-1,+1}\n";
  }
  return data;
}

// Sparse files only record the largest index present, so a test file may come
// out narrower than the training data.
void widen(Dataset& data, std::size_t dim) {
  if (data.dim() == dim) return;
  if (data.dim() > dim) {
    throw DimensionError("data has " + std::to_string(data.dim()) + " features, model expects " +
                         std::to_string(dim));
  }
  Matrix x(data.size(), dim);
  for (std::size_t i = 0; i < data.size(); ++i) std::copy_n(data.row(i).begin(), data.dim(), x.row(i).begin());
  data.x = std::move(x);
}

Dataset empty_like(const Dataset& data) {
  Dataset e;
  e.x = Matrix(0, data.dim());
  e.task = data.task;
  return e;
}

std::string colnorms_path(const std::string& model) { return model + ".colnorms"; }

void write_colnorms(const std::string& path, std::span<const double> divisors) {
  auto out = open_out(path);
  for (double v : divisors) out << format_double(v) << '\n';
}

std::vector<double> read_colnorms(const std::string& path) {
  std::ifstream in(path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    const auto v = parse_double(line);
    if (!v) throw DataError("'" + path + "': bad column divisor '" + line + "'");
    values.push_back(*v);
  }
  return values;
}

struct LoadedModel {
  ModelFile file;
  std::vector<double> divisors;  // empty when the model was trained on unprocessed data
};

LoadedModel load_model(const std::string& path) {
  auto in = open_in(path);
  LoadedModel m{read_model(in), {}};
  if (std::ifstream(colnorms_path(path))) m.divisors = read_colnorms(colnorms_path(path));
  return m;
}

Dataset prepare_for_model(Dataset data, const LoadedModel& m) {
  widen(data, m.file.params.shape().dim);
  if (!m.divisors.empty()) data = apply_preprocessing(data, m.divisors);
  return data;
}

TrainConfig train_config(const Options& o) {
  TrainConfig tc;
  tc.degree = o.degree;
  tc.rank = o.rank;
  tc.seed = o.seed;
  tc.solver = o.solver == "stochastic" ? SolverKind::stochastic : SolverKind::batch;
  tc.batch.max_iters = o.iters;
  tc.stochastic.epochs = o.epochs;
  tc.stochastic.minibatch_count = o.minibatches;
  tc.stochastic.base_step = o.step;
  return tc;
}

std::string metric_name(Task task) { return task == Task::binary ? "error_rate" : "relerr"; }

std::string six_digits(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw std::invalid_argument("train: --out is required");
  Dataset train = load(o.data, o, err);
  if (o.preprocess == "full") train = preprocess(train, empty_like(train)).first;

  TrainConfig tc = train_config(o);
  tc.lambda = parse_single(o.lambda, "--lambda");
  tc.alpha = parse_single(o.alpha, "--alpha");
  const FitResult fit = train_tm(train, tc);

  {
    auto model = open_out(o.out);
    write_model(model, fit.params, tc.alpha, tc.seed);
  }
  if (o.preprocess == "full") {
    write_colnorms(colnorms_path(o.out), train.column_divisors);
  } else {
    std::remove(colnorms_path(o.out).c_str());
  }
  {
    auto trace = open_out(o.trace.empty() ? o.out + ".trace.csv" : o.trace);
    write_trace_csv(trace, fit.report, o.timings);
  }
  {
    auto log = open_out(o.out + ".log");
    write_fit_log(log, fit.report);
  }

  out << "status " << fit.report.status << " iterations " << fit.report.iterations << " objective "
      << six_digits(fit.report.trace.back().objective) << '\n';
  const Metrics train_metric = metric(predict(fit.params, train), train.y, train.task);
  out << "train_" << metric_name(train.task) << ' ' << six_digits(train_metric.value) << '\n';
  if (!o.test.empty()) {
    Dataset test = load(o.test, o, err);
    widen(test, train.dim());
    if (o.preprocess == "full") test = apply_preprocessing(test, train.column_divisors);
    const Metrics m = metric(predict(fit.params, test), test.y, test.task);
    out << "test_" << metric_name(test.task) << ' ' << six_digits(m.value) << '\n';
  }
  return exit_code::kOk;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
  const LoadedModel m = load_model(o.model);
  const Dataset data = prepare_for_model(load(o.data.empty() ? o.test : o.data, o, err), m);
  const auto pred = predict(m.file.params, data);
  std::ofstream file;
  if (!o.out.empty()) file = open_out(o.out);
  std::ostream& sink = o.out.empty() ? out : file;
  for (double v : pred) sink << format_double(v) << '\n';
  return exit_code::kOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  const LoadedModel m = load_model(o.model);
  const Dataset data = prepare_for_model(load(o.test.empty() ? o.data : o.test, o, err), m);
  out << six_digits(metric(predict(m.file.params, data), data.y, data.task).value) << '\n';
  return exit_code::kOk;
}

int cmd_cv(const Options& o, bool lambda_given, bool alpha_given, std::ostream& out, std::ostream& err) {
  const Dataset train = load(o.data, o, err);
  const auto lambdas = lambda_given ? parse_list(o.lambda, "--lambda") : std::vector<double>{1e-6, 1e-5, 1e-4, 1e-3};
  const auto alphas = alpha_given ? parse_list(o.alpha, "--alpha") : std::vector<double>{0.01, 0.05, 0.1, 0.5, 1.0};
  const CvResult cv = cross_validate(train, lambdas, alphas, o.folds, train_config(o), o.preprocess == "full");
  const CvCell& best = cv.cells[cv.best];
  out << "best lambda " << format_double(best.lambda) << " alpha " << format_double(best.alpha) << ' '
      << metric_name(train.task) << ' ' << format_double(best.mean) << '\n';
  write_cv_table(out, cv);
  return exit_code::kOk;
}

// "d,q,r,n_train,n_test[,noise_sd]"
SynthTask synth_from_flag(const std::string& spec, std::uint64_t seed) {
  const auto v = parse_list(spec, "--synth");
  if (v.size() < 5 || v.size() > 6) throw std::invalid_argument("--synth expects d,q,r,n_train,n_test[,noise_sd]");
  for (std::size_t k = 0; k < 5; ++k) {
    if (!(v[k] >= 1.0) || v[k] != std::floor(v[k])) throw std::invalid_argument("--synth: sizes must be positive integers");
  }
  auto size = [&](std::size_t k) { return static_cast<std::size_t>(v[k]); };
  return synth_tm_task(seed, size(0), size(1), size(2), size(3), size(4), v.size() == 6 ? v[5] : 0.0);
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  Dataset train, test;
  if (!o.synth.empty()) {
    SynthTask task = synth_from_flag(o.synth, o.seed);
    train = std::move(task.train);
    test = std::move(task.test);
  } else {
    train = load(o.data, o, err);
    test = load(o.test, o, err);
    widen(test, train.dim());
    widen(train, test.dim());
    if (o.preprocess == "full") std::tie(train, test) = preprocess(train, test);
  }

  BenchConfig cfg;
  cfg.methods = split(o.methods, ',');
  cfg.trials = o.trials;
  cfg.max_sweeps = o.max_sweeps;
  cfg.seed = o.seed;
  cfg.tm = train_config(o);
  cfg.tm.lambda = parse_single(o.lambda, "--lambda");
  cfg.tm.alpha = parse_single(o.alpha, "--alpha");
  cfg.ridge_lambda = o.ridge_lambda;
  cfg.krr_lambda = o.krr_lambda;
  cfg.krr_cap = o.krr_cap;

  const auto start = std::chrono::steady_clock::now();
  const auto rows = run_bench(train, test, cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ofstream file;
  if (!o.out.empty()) file = open_out(o.out);
  std::ostream& sink = o.out.empty() ? out : file;
  sink << "# bench seed=" << o.seed << " trials=" << o.trials << " n_train=" << train.size()
       << " n_test=" << test.size() << " simd=" << simd::backend_name(simd::active_backend()) << " wall_seconds=" << format_double(wall)
       << '\n';
  write_bench_csv(sink, rows);
  return exit_code::kOk;
}

int cmd_rademacher(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<std::vector<double>> points;
  if (!o.data.empty()) {
    const Dataset data = load(o.data, o, err);
    for (std::size_t i = 0; i < data.size(); ++i) points.emplace_back(data.row(i).begin(), data.row(i).end());
  } else {
    if (o.n == 0 || o.dim == 0) throw std::invalid_argument("rademacher: --n and --dim must be positive");
    auto rng = make_rng(o.seed, stream::kSynthRows);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < o.n; ++i) {
      std::vector<double> x(o.dim);
      double norm = 0.0;
      do {
        for (double& v : x) v = normal(rng);
        norm = std::sqrt(simd::dot(x, x));
      } while (norm == 0.0);
      for (double& v : x) v /= norm;
      points.push_back(std::move(x));
    }
  }

  const auto signs = draw_signs(points.size(), o.draws, o.seed);
  LowerEstimateOptions lo;
  lo.restarts = o.restarts;
  lo.seed = o.seed;
  const MonteCarlo lower = empirical_rademacher_lower(points, o.degree, o.b, signs, lo);
  const MonteCarlo upper = empirical_rademacher_upper(points, o.degree, o.b, signs);
  const MaxEntryCheck entries = max_entry_check(points, o.degree, signs);

  double b_x = 0.0;
  for (const auto& x : points) b_x = std::max(b_x, std::sqrt(simd::dot(x, x)));
  BoundInputs bi;
  bi.dim = points.front().size();
  bi.degree = o.degree;
  bi.rank = std::max<std::size_t>(o.rank, 1);
  bi.b = o.b;
  bi.b_x = b_x;
  bi.n = points.size();

  out << "# n=" << points.size() << " d=" << bi.dim << " q=" << o.degree << " B=" << format_double(o.b)
      << " B_x=" << format_double(b_x) << " bound_thm1(c=1)=" << format_double(bound_thm1(bi))
      << " bound_thm2(c=1)=" << format_double(bound_thm2(bi)) << '\n';
  out << "draw,lower,upper,max_entry_lhs,rhs\n";
  for (std::size_t k = 0; k < signs.size(); ++k) {
    out << k << ',' << format_double(lower.per_draw[k]) << ',' << format_double(upper.per_draw[k]) << ','
        << format_double(entries.lhs.per_draw[k]) << ',' << format_double(entries.rhs) << '\n';
  }
  out << "mean," << format_double(lower.mean) << ',' << format_double(upper.mean) << ','
      << format_double(entries.lhs.mean) << ',' << format_double(entries.rhs) << '\n';
  return exit_code::kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tensor Machines: fit, evaluate and benchmark low-rank polynomial predictors", "tmach"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file; command-line flags take precedence");

  Options o;
  app.add_option("--data", o.data, "Training or input data file");
  app.add_option("--test", o.test, "Test data file");
  app.add_option("--format", o.format, "Input format (default: from the file extension)")
      ->check(CLI::IsMember({"svm", "csv"}));
  app.add_option("--label-col", o.label_col, "CSV label column, 0-based; negative counts from the end");
  app.add_option("--task", o.task, "reg (squared loss) or cls (logistic loss, labels +-1)")
      ->check(CLI::IsMember({"reg", "cls"}));
  app.add_option("--degree", o.degree, "Polynomial degree q")->check(CLI::PositiveNumber);
  app.add_option("--rank", o.rank, "Rank r per degree (0 gives an affine model)");
  app.add_option("--solver", o.solver)->check(CLI::IsMember({"batch", "stochastic"}));
  app.add_option("--lambda", o.lambda, "Regularization weight; cv accepts a comma list");
  app.add_option("--alpha", o.alpha, "Init scale; cv accepts a comma list");
  app.add_option("--seed", o.seed);
  app.add_option("--epochs", o.epochs, "Stochastic solver epochs");
  app.add_option("--iters", o.iters, "Batch solver iteration cap");
  app.add_option("--minibatches", o.minibatches, "Minibatches per epoch (0: ceil(sqrt(n)))");
  app.add_option("--step", o.step, "Stochastic base step");
  app.add_option("--out", o.out, "Output path");
  app.add_option("--model", o.model, "Model file");
  app.add_option("--methods", o.methods, "Comma list from tm-batch,tm-stochastic,kk,craftmaps,krr,fm2");
  app.add_option("--krr-cap", o.krr_cap, "KRR training subsample size");
  app.add_option("--krr-lambda", o.krr_lambda);
  app.add_option("--ridge-lambda", o.ridge_lambda, "Ridge weight for random-feature baselines");
  app.add_option("--trials", o.trials, "Seeded trials averaged per bench point");
  app.add_option("--max-sweeps", o.max_sweeps, "Doubling steps per bench method");
  app.add_option("--folds", o.folds, "Cross-validation folds");
  app.add_option("--preprocess", o.preprocess, "full: column then row normalization; none: use data as is")
      ->check(CLI::IsMember({"full", "none"}));
  app.add_option("--trace", o.trace, "FitReport CSV path (default: <out>.trace.csv)");
  app.add_flag("--timings", o.timings, "Add a per-iteration seconds column to the trace CSV");
  app.add_option("--synth", o.synth, "Synthetic task d,q,r,n_train,n_test[,noise_sd] instead of files");
  app.add_option("--draws", o.draws, "Sign draws");
  app.add_option("--restarts", o.restarts, "Restarts per draw of the lower estimate");
  app.add_option("--n", o.n, "Random points when --data is absent");
  app.add_option("--dim", o.dim, "Dimension of the random points");
  app.add_option("--b", o.b, "Factor norm cap B");

  auto* train = app.add_subcommand("train", "Fit a Tensor Machine and write the model");
  auto* predict_cmd = app.add_subcommand("predict", "Write one prediction per input row");
  auto* eval = app.add_subcommand("eval", "Print the test metric of a model");
  auto* cv = app.add_subcommand("cv", "Grid search over lambda and alpha with k-fold cross-validation");
  auto* bench = app.add_subcommand("bench", "Compare methods against kernel ridge regression");
  auto* rademacher = app.add_subcommand("rademacher", "Estimate Rademacher complexities of rank-one TMs");
  for (auto* sub : {train, predict_cmd, eval, cv, bench, rademacher}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kDataError;
  }

  try {
    if (train->parsed()) return cmd_train(o, out, err);
    if (predict_cmd->parsed()) return cmd_predict(o, out, err);
    if (eval->parsed()) return cmd_eval(o, out, err);
    if (cv->parsed()) return cmd_cv(o, app.count("--lambda") > 0, app.count("--alpha") > 0, out, err);
    if (bench->parsed()) return cmd_bench(o, out, err);
    if (rademacher->parsed()) return cmd_rademacher(o, out, err);
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return exit_code::kSolverError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return exit_code::kDataError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return exit_code::kInternal;
  }
  return exit_code::kInternal;
}

}  // namespace tmach
