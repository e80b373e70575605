#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliRun {
  int rc = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("zk3col_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  CliRun run(const std::string& args) {
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" ZK3COL_CLI_PATH "' " + args + " 2>'" + err.string() + "'";
    CliRun r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").rc, 1);
  EXPECT_EQ(run("simulate --no-such-flag").rc, 1);
  EXPECT_EQ(run("simulate --gen complete:4 --alice wat").rc, 1);
  EXPECT_EQ(run("gen --gen hexagon:3").rc, 1);
  EXPECT_EQ(run("gen-seq --k 7").rc, 1);
  EXPECT_EQ(run("--help").rc, 0);
}

TEST_F(Cli, DataErrorsExitTwo) {
  EXPECT_EQ(run("simulate --graph missing.txt").rc, 2);
  { std::ofstream(dir_ / "bad.csv") << "subject,test,k,symbol\nx,t,3,zz\n"; }
  auto r = run("analyze --input bad.csv");
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.err.find(":2"), std::string::npos) << r.err;
  fs::create_directories(dir_ / "empty");
  EXPECT_EQ(run("attack --logs empty").rc, 2);
}

TEST_F(Cli, SimulateIsDeterministicGivenSeed) {
  ASSERT_EQ(run("simulate --gen planted:10 --sessions 4 --rounds 30 --seed 9 --out a --fixed-time").rc, 0);
  ASSERT_EQ(run("simulate --gen planted:10 --sessions 4 --rounds 30 --seed 9 --out b --fixed-time --jobs 3").rc, 0);
  ASSERT_EQ(run("simulate --gen planted:10 --sessions 4 --rounds 30 --seed 10 --out c --fixed-time").rc, 0);
  for (int i = 0; i < 4; ++i) {
    const auto name = "sessions/sim-00000" + std::to_string(i) + ".jsonl";
    const auto a = slurp(dir_ / "a" / name);
    ASSERT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir_ / "b" / name));
    EXPECT_NE(a, slurp(dir_ / "c" / name));
  }
  EXPECT_EQ(slurp(dir_ / "a" / "summary.json"), slurp(dir_ / "b" / "summary.json"));
  auto summary = json::parse(slurp(dir_ / "a" / "summary.json"));
  EXPECT_EQ(summary["accepted"], 4);
}

TEST_F(Cli, GenAndGenSeqAreDeterministic) {
  auto a = run("gen --gen planted:15:0.3 --seed 4");
  auto b = run("gen --gen planted:15:0.3 --seed 4");
  ASSERT_EQ(a.rc, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, run("gen --gen planted:15:0.3 --seed 5").out);
  auto s1 = run("gen-seq --model cycle:0.5 --length 50 --seed 3");
  EXPECT_EQ(s1.out, run("gen-seq --model cycle:0.5 --length 50 --seed 3").out);
  EXPECT_EQ(s1.out.rfind("subject,test,k,symbol", 0), 0u);
}

TEST_F(Cli, CheatingAliceOnK4IsRejectedAtTheClosedFormRate) {
  auto r = run("simulate --gen complete:4 --alice cheat:uniform --rounds 6 --sessions 3000 --seed 1");
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_NE(r.out.find("predicted      0.334898"), std::string::npos) << r.out;
}

TEST_F(Cli, AttackWarnsAndRecoversIdentityPartition) {
  ASSERT_EQ(run("simulate --gen planted:12 --alice honest:identity --sessions 3 --rounds 150 --seed 2 --out logs").rc, 0);
  auto warned = run("attack --logs logs");
  EXPECT_EQ(warned.rc, 0);
  EXPECT_NE(warned.err.find("warning"), std::string::npos);
  auto r = run("attack --logs logs --perm-model identity --out report.json");
  ASSERT_EQ(r.rc, 0) << r.err;
  auto report = json::parse(slurp(dir_ / "report.json"));
  ASSERT_EQ(report["sessions"].size(), 3u);
  for (const auto& s : report["sessions"]) {
    EXPECT_DOUBLE_EQ(s["coverage"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(s["accuracy"].get<double>(), 1.0);
  }
  auto ce = run("attack --logs logs --mode cheat-eval");
  EXPECT_EQ(ce.rc, 0) << ce.err;
}

TEST_F(Cli, AnalyzeFlagsAnAvoiderFile) {
  ASSERT_EQ(run("gen-seq --model avoider:1 --length 300 --subjects 3 --seed 8 --out av.csv").rc, 0);
  auto r = run("analyze --input av.csv --aggregate --award --out an.json");
  ASSERT_EQ(r.rc, 0) << r.err;
  auto j = json::parse(slurp(dir_ / "an.json"));
  ASSERT_EQ(j["reports"].size(), 3u);
  for (const auto& rep : j["reports"]) EXPECT_LT(rep["chi2_transition"]["p"].get<double>(), 0.001);
  EXPECT_EQ(j["aggregate"]["award_ranking"].size(), 3u);
}

TEST_F(Cli, ReplayDetectsTampering) {
  ASSERT_EQ(run("simulate --gen planted:8 --sessions 2 --rounds 10 --seed 3 --out logs").rc, 0);
  EXPECT_EQ(run("replay logs").rc, 0);
  const auto f = dir_ / "logs" / "sessions" / "sim-000001.jsonl";
  auto text = slurp(f);
  const auto at = text.find("\"verdict\":\"accept\"");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 18, "\"verdict\":\"reject\"");
  { std::ofstream(f, std::ios::trunc) << text; }
  auto r = run("replay logs");
  EXPECT_EQ(r.rc, 3);
  EXPECT_NE(r.out.find("sim-000000"), std::string::npos);
  { std::ofstream(f, std::ios::trunc) << "garbage\n"; }
  EXPECT_EQ(run("replay logs").rc, 3);
}

TEST_F(Cli, ExperimentPlanAndRun) {
  auto p = run("experiment --plan-only --subject s1 --seed 1");
  ASSERT_EQ(p.rc, 0);
  auto plan = json::parse(p.out);
  ASSERT_EQ(plan["stages"].size(), 5u);
  EXPECT_EQ(p.out, run("experiment --plan-only --subject s1 --seed 1").out);
  auto r = run("experiment --subject s1 --seed 1 --rounds 60 --model sticky:0.8 --out ex.json");
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "ex.json"));
  EXPECT_EQ(slurp(dir_ / "ex.json"),
            (run("experiment --subject s1 --seed 1 --rounds 60 --model sticky:0.8 --out ex2.json"), slurp(dir_ / "ex2.json")));
}
