#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tmach/cli.hpp"
#include "tmach/data.hpp"
#include "tmach/model.hpp"
#include "tmach/text.hpp"

namespace {

using namespace tmach;
using tmach::testing::TempDir;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const SynthTask task = synth_tm_task(11, 5, 2, 1, 200, 50, 0.01);
    std::ofstream tr(dir.file("train.svm")), te(dir.file("test.svm"));
    write_sparse_text(tr, task.train);
    write_sparse_text(te, task.test);
  }

  std::vector<std::string> train_args(const std::string& out) const {
    return {"train", "--data", dir.file("train.svm"), "--test", dir.file("test.svm"), "--degree", "2",
            "--rank",  "2",      "--iters", "40", "--seed", "3", "--out", out};
  }

  TempDir dir{"cli"};
};

TEST_F(Cli, TrainWritesModelTraceAndLog) {
  const CliRun r = run(train_args(dir.file("m.txt")));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("train_relerr "), std::string::npos);
  EXPECT_NE(r.out.find("test_relerr "), std::string::npos);
  EXPECT_FALSE(slurp(dir.file("m.txt")).empty());
  EXPECT_FALSE(slurp(dir.file("m.txt.colnorms")).empty());
  EXPECT_NE(slurp(dir.file("m.txt.trace.csv")).find("iter,objective,grad_norm\n"), std::string::npos);
  EXPECT_FALSE(slurp(dir.file("m.txt.log")).empty());
}

TEST_F(Cli, TrainIsByteDeterministic) {
  ASSERT_EQ(run(train_args(dir.file("a.txt"))).code, 0);
  ASSERT_EQ(run(train_args(dir.file("b.txt"))).code, 0);
  EXPECT_EQ(slurp(dir.file("a.txt")), slurp(dir.file("b.txt")));
  EXPECT_EQ(slurp(dir.file("a.txt.trace.csv")), slurp(dir.file("b.txt.trace.csv")));
}

TEST_F(Cli, StochasticSolverAndAffineModel) {
  auto args = train_args(dir.file("s.txt"));
  args.insert(args.end(), {"--solver", "stochastic", "--epochs", "3"});
  EXPECT_EQ(run(args).code, 0);

  auto affine = train_args(dir.file("aff.txt"));
  affine[8] = "0";
  const CliRun r = run(affine);
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir.file("aff.txt"));
  EXPECT_EQ(read_model(in).params.shape().rank, 0u);
}

TEST_F(Cli, EvalMatchesTrainOutputAndPredictWritesRows) {
  const CliRun t = run(train_args(dir.file("m.txt")));
  ASSERT_EQ(t.code, 0);
  const CliRun e = run({"eval", "--model", dir.file("m.txt"), "--test", dir.file("test.svm")});
  ASSERT_EQ(e.code, 0) << e.err;
  ASSERT_TRUE(parse_double(e.out.substr(0, e.out.size() - 1)).has_value()) << e.out;
  EXPECT_NE(t.out.find("test_relerr " + e.out), std::string::npos);

  const CliRun p = run({"predict", "--model", dir.file("m.txt"), "--data", dir.file("test.svm")});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(std::count(p.out.begin(), p.out.end(), '\n'), 50);
}

TEST_F(Cli, DataErrorsExitTwo) {
  auto missing = train_args(dir.file("m.txt"));
  missing[2] = dir.file("nope.svm");
  const CliRun r = run(missing);
  EXPECT_EQ(r.code, exit_code::kDataError);
  EXPECT_NE(r.err.find("nope.svm"), std::string::npos);

  ASSERT_EQ(run(train_args(dir.file("m.txt"))).code, 0);
  {
    std::ofstream wide(dir.file("wide.svm"));
    wide << "1 9:1\n";
  }
  EXPECT_EQ(run({"eval", "--model", dir.file("m.txt"), "--test", dir.file("wide.svm")}).code, exit_code::kDataError);
  {
    std::ofstream bad(dir.file("bad.svm"));
    bad << "1 1:1\n1 1:zz\n";
  }
  const CliRun b = run({"eval", "--model", dir.file("m.txt"), "--test", dir.file("bad.svm")});
  EXPECT_EQ(b.code, exit_code::kDataError);
  EXPECT_NE(b.err.find("line 2"), std::string::npos);
  EXPECT_EQ(run({"train", "--bogus"}).code, exit_code::kDataError);
}

TEST_F(Cli, ConfigFileSuppliesOptions) {
  {
    std::ofstream cfg(dir.file("run.ini"));
    cfg << "data = \"" << dir.file("train.svm") << "\"\ndegree = 2\nrank = 1\niters = 10\n";
  }
  const CliRun r = run({"train", "--config", dir.file("run.ini"), "--out", dir.file("c.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir.file("c.txt"));
  EXPECT_EQ(read_model(in).params.shape(), (TmShape{5, 2, 1}));
}

TEST_F(Cli, CvReportsBestCell) {
  const CliRun r = run({"cv", "--data", dir.file("train.svm"), "--lambda", "1e-5,1e-3", "--alpha", "0.1", "--folds", "3",
                     "--iters", "15", "--degree", "2", "--rank", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("best lambda ", 0), 0u);
  EXPECT_NE(r.out.find("lambda,alpha,fold,metric\n"), std::string::npos);
}

TEST_F(Cli, RademacherTable) {
  const CliRun r = run({"rademacher", "--n", "8", "--dim", "3", "--degree", "2", "--draws", "4", "--restarts", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("draw,lower,upper,max_entry_lhs,rhs\n"), std::string::npos);
  EXPECT_NE(r.out.find("\nmean,"), std::string::npos);
}

TEST_F(Cli, HelpExitsZero) {
  const CliRun r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("train"), std::string::npos);
}

}  // namespace
