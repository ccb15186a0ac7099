#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pulsekit/serialization.hpp"
#include "pulsekit/signal_io.hpp"

using namespace pulsekit;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "pulsekit_test_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(SignalCsv, RoundTripIsExact) {
  SampledSignal s{0.25, -3.0, {0.1, -2.5, 1.0 / 3.0, 1e-300, 12345.678901234567}};
  std::stringstream ss;
  write_signal_csv(ss, s);
  EXPECT_EQ(ss.str().substr(0, 8), "t,value\n");
  const auto r = read_signal_csv(ss);
  EXPECT_EQ(r.values, s.values);
  EXPECT_EQ(r.t0, s.t0);
  EXPECT_EQ(r.dt, s.dt);
}

TEST(SignalBinary, LayoutAndRoundTrip) {
  SampledSignal s{0.5, 0.0, {1.0, -2.0, 0.25}};
  std::stringstream ss;
  write_signal_binary(ss, s);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 16U + 3U * 4U);
  EXPECT_EQ(bytes.substr(0, 4), "PKSG");
  std::uint16_t version = 0, reserved = 7;
  std::memcpy(&version, bytes.data() + 4, 2);
  std::memcpy(&reserved, bytes.data() + 6, 2);
  EXPECT_EQ(version, 1);
  EXPECT_EQ(reserved, 0);
  double dt = 0;
  std::memcpy(&dt, bytes.data() + 8, 8);
  EXPECT_EQ(dt, 0.5);
  float f1 = 0;
  std::memcpy(&f1, bytes.data() + 20, 4);
  EXPECT_EQ(f1, -2.0F);
  const auto r = read_signal_binary(ss);
  EXPECT_EQ(r.values, s.values);
  EXPECT_EQ(r.dt, 0.5);
}

TEST(SignalBinary, RejectsMalformedInput) {
  std::stringstream bad_magic("XXXX\x01\x00\x00\x00\x00\x00\x00\x00\x00\x00\xf0\x3f");
  EXPECT_THROW(read_signal_binary(bad_magic), DataError);
  std::stringstream truncated("PKSG");
  EXPECT_THROW(read_signal_binary(truncated), DataError);
  SampledSignal s{1.0, 0.0, {1.0}};
  std::stringstream ok;
  write_signal_binary(ok, s);
  std::stringstream partial(ok.str() + "ab");
  EXPECT_THROW(read_signal_binary(partial), DataError);
}

TEST(SignalFiles, ExtensionSelectsFormat) {
  SampledSignal s{1.0, 0.0, {0.0, 0.5, 1.5}};
  const auto csv = temp_path("sig.csv");
  const auto bin = temp_path("sig.pksg");
  write_signal(csv, s);
  write_signal(bin, s);
  std::ifstream in(csv);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first, "t,value");
  EXPECT_EQ(read_signal(csv).values, s.values);
  EXPECT_EQ(read_signal(bin).values, s.values);
  try {
    (void)read_signal(temp_path("missing.csv"));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.csv"), std::string::npos);
  }
}

TEST(EventsCsv, SeventeenDigitRoundTrip) {
  const std::vector<PulseEvent> ev{{10.123456789012345, 0.1}, {1e-7, 1.0 / 7.0}};
  std::stringstream ss;
  write_events_csv(ss, ev);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, 10), "tau,alpha\n");
  EXPECT_NE(text.find("0.14285714285714285"), std::string::npos);
  EXPECT_EQ(read_events_csv(ss), ev);
}

TEST(EventsCsv, EmptyListIsHeaderOnly) {
  std::stringstream ss;
  write_events_csv(ss, {});
  EXPECT_EQ(ss.str(), "tau,alpha\n");
}

TEST(OtherCsv, Headers) {
  std::stringstream c, h, a;
  write_clusters_csv(c, std::vector<Cluster>{{1.0, 2.5, 1.5, 0.75}});
  EXPECT_EQ(c.str(), "t1,t2,duration,area\n1,2.5,1.5,0.75\n");
  write_histogram_csv(h, Histogram{{0.0, 1.0, 2.0}, {0.25, 0.75}});
  EXPECT_EQ(h.str(), "lo,hi,mass\n0,1,0.25\n1,2,0.75\n");
  Activations act;
  act.values = {0.0, 0.5, 0.0};
  write_activations_csv(a, act);
  EXPECT_EQ(a.str(), "k,a\n1,0.5\n");
}

TEST(HistogramFile, RoundTrip) {
  const Histogram h{{-0.5, 0.5, 1.5, 2.5}, {0.1, 0.2, 0.7}};
  const auto path = temp_path("h.csv");
  {
    std::ofstream out(path);
    write_histogram_csv(out, h);
  }
  const auto r = read_histogram(path);
  EXPECT_EQ(r.edges, h.edges);
  EXPECT_EQ(r.masses, h.masses);
}

TEST(Json, SimConfigRoundTrip) {
  SimConfig c;
  c.rate = 0.02;
  c.duration = 500.0;
  c.dt = 0.5;
  c.sigma = 0.01;
  c.seed = 18446744073709551557ULL;
  c.warmup = true;
  c.shape = PulseShape::double_exp(0.05, 0.2);
  c.spectrum = AmplitudeSpectrum({Line{3.0, 0.25}, GaussianLine{5.0, 0.2, 0.5}, Uniform{1.0, 2.0, 0.25}});
  c.fixed_events = std::vector<PulseEvent>{{1.0, 2.0}};
  const Json j = to_json(c);
  const SimConfig r = sim_config_from_json(Json::parse(j.dump()));
  EXPECT_EQ(to_json(r).dump(), j.dump());
  EXPECT_EQ(r.seed, c.seed);
}

TEST(Json, PartialConfigsKeepDefaultsAndRejectUnknownFields) {
  const SimConfig c = sim_config_from_json(Json::parse(R"({"rate": 0.5, "spectrum": 5})"));
  EXPECT_EQ(c.rate, 0.5);
  EXPECT_EQ(c.duration, SimConfig{}.duration);
  EXPECT_EQ(c.spectrum.mean(), 5.0);
  EXPECT_THROW(sim_config_from_json(Json::parse(R"({"rat": 0.5})")), std::invalid_argument);
  EXPECT_THROW(sim_config_from_json(Json::parse(R"({"rate": -1})")), std::invalid_argument);
  EXPECT_THROW(method_config_from_json(Json::parse(R"({"chain": "bogus"})")), std::invalid_argument);
  const MethodConfig m = method_config_from_json(Json::parse(R"({"chain": "sparse", "c": 0.3})"));
  EXPECT_EQ(m.chain, "sparse");
  ASSERT_TRUE(m.c.has_value());
  EXPECT_EQ(*m.c, 0.3);
}

TEST(Json, FitResultShape) {
  FitResult f;
  f.events = {{10.0, 1.0}, {16.0, 0.5}};
  f.rss = 1e-3;
  f.converged = true;
  f.iterations = 7;
  const Json j = to_json(f);
  EXPECT_EQ(j.at("n"), 2);
  EXPECT_EQ(j.at("events").size(), 2U);
  EXPECT_EQ(j.at("events")[1].at("alpha"), 0.5);
  EXPECT_EQ(j.at("rss"), 1e-3);
  EXPECT_EQ(j.at("converged"), true);
  EXPECT_EQ(j.at("iterations"), 7);
}

TEST(Json, SweepSpecProductAndExplicitGrid) {
  const auto spec = sweep_spec_from_json(Json::parse(R"({
    "trials": 3, "base_seed": 9,
    "sims": [{"sigma": 0.01}, {"sigma": 0.1}],
    "methods": [{"chain": "matched"}, {"chain": "trapezoid"}, {"chain": "wiener"}]})"));
  EXPECT_EQ(spec.options.trials, 3U);
  EXPECT_EQ(spec.options.base_seed, 9U);
  ASSERT_EQ(spec.grid.size(), 6U);
  EXPECT_EQ(spec.grid[4].sim.sigma, 0.1);
  EXPECT_EQ(spec.grid[4].method.chain, "trapezoid");

  const auto g = sweep_spec_from_json(Json::parse(R"({"grid": [{"sim": {"rate": 0.1}, "method": {}}]})"));
  ASSERT_EQ(g.grid.size(), 1U);
  EXPECT_EQ(g.grid[0].sim.rate, 0.1);
  EXPECT_THROW(sweep_spec_from_json(Json::parse(R"({"trials": 0, "grid": []})")), std::invalid_argument);
}

TEST(Json, BenchReportFields) {
  BenchReport r;
  r.scores.f1 = 0.5;
  r.spectrum_w1 = 0.25;
  const Json j = to_json(r);
  for (const char* k : {"precision", "recall", "f1", "tau_rmse", "alpha_rmse", "spectrum_w1", "runtime_ms",
                        "config", "reliability", "seed"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_TRUE(j.at("reliability").is_null());
}
