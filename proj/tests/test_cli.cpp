#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "pulsekit/signal_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

// Runs the pulsekit binary, capturing stdout and stderr together.
Result run(const std::string& args) {
  const std::string cmd = std::string(PULSEKIT_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("pulsekit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  std::string p(const std::string& name) const { return (dir_ / name).string(); }
  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpOnEverySubcommandExitsZeroAndListsFlags) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> cmds{
      {"simulate", {"--config", "--events", "--signal", "--seed", "--rate", "--sigma"}},
      {"shape", {"--input", "--output", "--filter", "--rise", "--flat", "--decay", "--noise-power"}},
      {"detect", {"--input", "--output", "--chain", "--threshold", "--clusters", "--max-duration"}},
      {"fit", {"--input", "--output", "--n", "--sigma", "--n-max", "--phantom"}},
      {"sparse", {"--input", "--activations", "--events", "--c", "--merge-window"}},
      {"spectrum", {"--amplitudes", "--histogram", "--pileup-correct", "--decompound", "--rate", "--window"}},
      {"bench", {"--spec", "--output", "--summary", "--jobs", "--trials", "--seed"}},
  };
  for (const auto& [cmd, flags] : cmds) {
    const auto r = run(cmd + " --help");
    EXPECT_EQ(r.code, 0) << cmd;
    for (const auto& f : flags) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  const auto r = run("simulate --events " + p("e.csv") + " --no-such-flag");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("--no-such-flag"), std::string::npos);
  EXPECT_NE(r.out.find("Usage"), std::string::npos);
  EXPECT_EQ(run("simulate").code, 1);  // missing required --events
}

TEST_F(Cli, DataErrorsExitTwoWithPath) {
  const auto r = run("detect --input " + p("nope.csv") + " --output " + p("o.csv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("nope.csv"), std::string::npos);
  write("bad.json", "{not json");
  const auto b = run("simulate --config " + p("bad.json") + " --events " + p("e.csv"));
  EXPECT_EQ(b.code, 2);
  EXPECT_NE(b.out.find("bad.json"), std::string::npos);
}

TEST_F(Cli, SimulateZeroRateWritesHeaderOnly) {
  write("cfg.json", R"({"rate": 0, "duration": 100})");
  const auto r = run("simulate --config " + p("cfg.json") + " --events " + p("ev.csv") + " --signal " + p("s.pksg"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(p("ev.csv")), "tau,alpha\n");
  const auto meta = nlohmann::json::parse(slurp(p("ev.csv.meta.json")));
  EXPECT_EQ(meta.at("config").at("rate"), 0.0);
  EXPECT_EQ(pulsekit::read_signal(p("s.pksg")).size(), 100U);
}

TEST_F(Cli, FlagsOverrideConfigAndAreEchoed) {
  write("cfg.json", R"({"rate": 0.01, "duration": 1000, "seed": 1, "sigma": 0.5})");
  ASSERT_EQ(run("simulate --config " + p("cfg.json") + " --sigma 0.02 --seed 5 --events " + p("ev.csv")).code, 0);
  const auto meta = nlohmann::json::parse(slurp(p("ev.csv.meta.json")));
  EXPECT_EQ(meta.at("config").at("sigma"), 0.02);
  EXPECT_EQ(meta.at("config").at("seed"), 5);
  EXPECT_EQ(meta.at("config").at("rate"), 0.01);
}

TEST_F(Cli, PipelineSimulateDetectBench) {
  write("cfg.json", R"({"duration": 300, "sigma": 0.02, "seed": 4,
                        "fixed_events": [{"tau": 10, "alpha": 1.0}, {"tau": 60, "alpha": 0.6}]})");
  ASSERT_EQ(run("simulate --config " + p("cfg.json") + " --events " + p("truth.csv") + " --signal " + p("sig.csv")).code, 0);
  const auto d = run("detect --input " + p("sig.csv") + " --chain matched --threshold 0.3 --output " + p("det.csv") +
                     " --clusters " + p("cl.csv"));
  ASSERT_EQ(d.code, 0) << d.out;
  const auto det = pulsekit::read_events(p("det.csv"));
  ASSERT_EQ(det.size(), 2U);
  EXPECT_NEAR(det[0].tau, 10.0, 1.0);
  EXPECT_NEAR(det[1].tau, 60.0, 1.0);
  EXPECT_EQ(slurp(p("cl.csv")).substr(0, 20), "t1,t2,duration,area\n");

  write("sweep.json", R"({"trials": 3, "base_seed": 1, "grid": [{"sim": {"duration": 300, "sigma": 0.02,
      "fixed_events": [{"tau": 10, "alpha": 1.0}, {"tau": 60, "alpha": 0.6}]}, "method": {"chain": "matched", "threshold": 0.3}}]})");
  const auto b = run("bench --spec " + p("sweep.json") + " --output " + p("rep.jsonl") + " --summary " + p("sum.csv") + " --jobs 2");
  ASSERT_EQ(b.code, 0) << b.out;
  std::ifstream in(p("rep.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("f1"), 1.0);
    ++lines;
  }
  EXPECT_EQ(lines, 3);
  EXPECT_EQ(slurp(p("sum.csv")).substr(0, 13), "point,trials,");
}

TEST_F(Cli, ShapeFitSparseAndSpectrum) {
  write("cfg.json", R"({"duration": 300, "fixed_events": [{"tau": 10, "alpha": 1.0}, {"tau": 16, "alpha": 1.0}]})");
  ASSERT_EQ(run("simulate --config " + p("cfg.json") + " --events " + p("t.csv") + " --signal " + p("s.csv")).code, 0);
  for (const char* f : {"matched", "trapezoid", "wiener"}) {
    const auto r = run(std::string("shape --filter ") + f + " --noise-power 0.01 --input " + p("s.csv") + " --output " + p("y.pksg"));
    EXPECT_EQ(r.code, 0) << f << r.out;
    EXPECT_EQ(pulsekit::read_signal(p("y.pksg")).size(), 300U);
  }
  const auto f = run("fit --input " + p("s.csv") + " --n 2 --output " + p("fit.json"));
  ASSERT_EQ(f.code, 0) << f.out;
  const auto fj = nlohmann::json::parse(slurp(p("fit.json")));
  EXPECT_EQ(fj.at("n"), 2);
  EXPECT_NEAR(fj.at("events")[0].at("tau").get<double>(), 10.0, 1e-3);
  EXPECT_TRUE(fj.contains("config"));
  EXPECT_EQ(run("fit --input " + p("s.csv") + " --n banana --output " + p("fit.json")).code, 1);

  const auto a = run("fit --input " + p("s.csv") + " --n auto --sigma 1e-6 --output " + p("auto.json"));
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_EQ(nlohmann::json::parse(slurp(p("auto.json"))).at("n"), 2);

  const auto s = run("sparse --input " + p("s.csv") + " --c 0 --activations " + p("act.csv") + " --events " + p("sev.csv"));
  ASSERT_EQ(s.code, 0) << s.out;
  EXPECT_EQ(pulsekit::read_events(p("sev.csv")).size(), 2U);
  EXPECT_EQ(slurp(p("act.csv")).substr(0, 4), "k,a\n");

  write("amps.csv", "tau,alpha\n1,5\n2,5\n3,5\n4,10\n");
  ASSERT_EQ(run("spectrum --amplitudes " + p("amps.csv") + " --bin-width 1 --bins 16 --output " + p("h.csv")).code, 0);
  const auto h = slurp(p("h.csv"));
  EXPECT_NE(h.find("4.5,5.5,3"), std::string::npos);
  EXPECT_NE(h.find("9.5,10.5,1"), std::string::npos);
  const auto pc = run("spectrum --histogram " + p("h.csv") + " --pileup-correct --rate 0.2231435513142097 --window 1 --output " + p("hc.csv"));
  ASSERT_EQ(pc.code, 0) << pc.out;
  EXPECT_EQ(run("spectrum --pileup-correct --histogram " + p("h.csv") + " --output " + p("x.csv")).code, 1);
}

TEST_F(Cli, DecompoundReportsMean) {
  write("cfg.json", R"({"rate": 0.00125, "duration": 4000000, "seed": 3, "spectrum": 5})");
  ASSERT_EQ(run("simulate --config " + p("cfg.json") + " --events " + p("t.csv") + " --signal " + p("s.pksg")).code, 0);
  const auto r = run("spectrum --decompound --input " + p("s.pksg") + " --rate 0.00125 --interval 400 --output " + p("d.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto meta = nlohmann::json::parse(slurp(p("d.csv.meta.json")));
  EXPECT_NEAR(meta.at("config").at("mean").get<double>(), 5.0, 0.25);
  EXPECT_NE(r.out.find("mean="), std::string::npos);
}

TEST_F(Cli, DeterministicOutputs) {
  write("cfg.json", R"({"rate": 0.02, "duration": 3000, "sigma": 0.05, "seed": 12})");
  for (int i = 0; i < 2; ++i) {
    const std::string tag = std::to_string(i);
    ASSERT_EQ(run("simulate --config " + p("cfg.json") + " --events " + p("ev" + tag + ".csv") + " --signal " + p("s" + tag + ".csv")).code, 0);
    ASSERT_EQ(run("detect --input " + p("s" + tag + ".csv") + " --chain trapezoid --output " + p("d" + tag + ".csv")).code, 0);
  }
  EXPECT_EQ(slurp(p("ev0.csv")), slurp(p("ev1.csv")));
  EXPECT_EQ(slurp(p("s0.csv")), slurp(p("s1.csv")));
  EXPECT_EQ(slurp(p("d0.csv")), slurp(p("d1.csv")));
}
