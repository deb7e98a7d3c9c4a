#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace capgrpo::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / "capgrpo_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

TEST(Cli, CosineScheduleHasOneValuePerStep) {
  const auto r = invoke({"schedule", "--beta", "0.04", "--t-max", "100", "--strategy", "cosine"});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(count_lines(r.out), 101);
  std::istringstream in(r.out);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(std::stod(first), 0.04);
  EXPECT_EQ(r.out.substr(r.out.rfind('\n', r.out.size() - 2) + 1), "0\n");
}

TEST(Cli, AllStrategiesAsCsv) {
  const auto r = invoke({"schedule", "--t-max", "10"});
  ASSERT_EQ(r.code, kOk);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "step,static,linear,cosine");
  EXPECT_EQ(count_lines(r.out), 12);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(invoke({}).code, kUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, kUsage);
  EXPECT_EQ(invoke({"schedule", "--t-max", "ten"}).code, kUsage);

  const auto bad_key = invoke({"train", "-o", fresh_dir("k").string(), "--set", "bogus=1"});
  EXPECT_EQ(bad_key.code, kConfig);
  EXPECT_NE(bad_key.err.find("bogus"), std::string::npos);
  EXPECT_EQ(invoke({"train", "-o", fresh_dir("b").string(), "--set", "beta=-1"}).code, kConfig);
  EXPECT_EQ(invoke({"train", "--config", "/nonexistent/run.conf"}).code, kIo);

  const auto empty = fresh_dir("eval_empty");
  EXPECT_EQ(invoke({"eval", empty.string()}).code, kIo);

  const auto run_dir = fresh_dir("eval_corrupt");
  ASSERT_EQ(invoke({"train", "-q", "-o", run_dir.string(), "--set", "t_max=1", "--set",
                    "env_train_size=20", "--set", "env_test_size=10"})
                .code,
            kOk);
  std::ofstream(run_dir / "checkpoint.txt") << "garbage\n";
  EXPECT_EQ(invoke({"eval", run_dir.string()}).code, kData);
}

TEST(Cli, EnvironmentConfigAndOverrides) {
  const auto dir = fresh_dir("envcfg");
  {
    std::ofstream f(dir / "run.conf");
    f << "# short run\nt_max = 3\nalpha = 0.3\neval_every = 3\nenv_train_size = 40\nenv_test_size = 20\n";
  }
  ::setenv(kConfigEnvVar, (dir / "run.conf").c_str(), 1);
  const auto r = invoke({"train", "-q", "-o", (dir / "run").string(), "--set", "alpha=0.2"});
  ::unsetenv(kConfigEnvVar);
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto echo = slurp(dir / "run" / "resolved_config.txt");
  EXPECT_NE(echo.find("t_max = 3"), std::string::npos) << echo;
  EXPECT_NE(echo.find("alpha = 0.2"), std::string::npos) << echo;
  EXPECT_NE(echo.find("output_dir = "), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "run" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint.txt"));

  const auto e = invoke({"eval", (dir / "run").string(), "--split", "test"});
  EXPECT_EQ(e.code, kOk) << e.err;
  EXPECT_NE(e.out.find("test"), std::string::npos);

  const auto m = invoke({"export-metrics", (dir / "run").string()});
  EXPECT_EQ(m.code, kOk) << m.err;
  EXPECT_EQ(m.out.rfind("run,step,", 0), 0u);
  EXPECT_EQ(count_lines(m.out), 4);
}

TEST(Cli, GradcheckPasses) {
  const auto r = invoke({"gradcheck", "--trials", "4", "--coordinates", "40"});
  EXPECT_EQ(r.code, kOk) << r.out << r.err;
}

TEST(Cli, GenDataWritesBothSplits) {
  const auto dir = fresh_dir("gen");
  const auto r = invoke({"gen-data", "-o", dir.string(), "--set", "env_train_size=10", "--set",
                         "env_test_size=5"});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(count_lines(slurp(dir / "train.jsonl")), 10);
  EXPECT_EQ(count_lines(slurp(dir / "test.jsonl")), 5);
}

}  // namespace
}  // namespace capgrpo::cli
