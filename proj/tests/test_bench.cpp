#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pulsekit/bench.hpp"

using namespace pulsekit;

namespace {

Histogram masses_at(std::initializer_list<std::pair<double, double>> at, std::size_t bins = 16) {
  Histogram h{centered_edges(1.0, bins), std::vector<double>(bins, 0.0)};
  for (const auto& [x, w] : at) h.masses[static_cast<std::size_t>(std::lround(x))] += w;
  return h;
}

// CDF-sum oracle written out independently.
double w1_oracle(const Histogram& a, const Histogram& b) {
  double ca = 0.0, cb = 0.0, s = 0.0;
  for (std::size_t i = 0; i < a.bins(); ++i) {
    ca += a.masses[i];
    cb += b.masses[i];
    s += std::abs(ca - cb) * (a.edges[i + 1] - a.edges[i]);
  }
  return s;
}

SweepPoint separated_point() {
  SweepPoint p;
  p.sim.rate = 0.0;
  p.sim.duration = 400.0;
  p.sim.dt = 1.0;
  p.sim.sigma = 0.0;
  p.sim.fixed_events = std::vector<PulseEvent>{{10.0, 1.0}, {60.0, 0.6}, {200.0, 0.8}};
  p.method.chain = "matched";
  p.method.threshold = 0.3;
  return p;
}

}  // namespace

TEST(MatchEvents, Examples) {
  EXPECT_TRUE(match_events({}, {}, 1.0).empty());

  const std::vector<PulseEvent> truth{{10, 1}, {20, 1}, {35, 2}};
  const auto m = match_events(truth, truth, 0.0);
  ASSERT_EQ(m.size(), 3U);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(m[i], std::make_pair(i, i));

  const std::vector<PulseEvent> t1{{10, 1}};
  const std::vector<PulseEvent> est{{9.4, 1}, {10.3, 1}};
  const auto m1 = match_events(t1, est, 1.0);
  ASSERT_EQ(m1.size(), 1U);
  EXPECT_EQ(m1[0], std::make_pair(std::size_t{0}, std::size_t{1}));
  EXPECT_THROW(match_events(t1, est, -1.0), std::invalid_argument);
}

TEST(MatchEvents, InjectiveAndWithinTolerance) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PulseEvent> a, b;
    for (int i = 0; i < 30; ++i) a.push_back({u(rng), 1.0});
    for (int i = 0; i < 25; ++i) b.push_back({u(rng), 1.0});
    const double tol = 2.0;
    const auto m = match_events(a, b, tol);
    std::vector<int> ua(a.size(), 0), ub(b.size(), 0);
    for (const auto& [i, j] : m) {
      EXPECT_LE(std::abs(a[i].tau - b[j].tau), tol);
      EXPECT_EQ(++ua[i], 1);
      EXPECT_EQ(++ub[j], 1);
    }
  }
}

TEST(Score, Conventions) {
  const std::vector<PulseEvent> truth{{10, 1.0}, {50, 0.5}};
  const auto perfect = score(truth, truth, match_events(truth, truth, 0.0));
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  EXPECT_EQ(perfect.tau_rmse, 0.0);
  EXPECT_EQ(perfect.alpha_rmse, 0.0);

  const auto none = score(truth, {}, {});
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.f1, 0.0);

  const auto both_empty = score({}, {}, {});
  EXPECT_EQ(both_empty.precision, 1.0);
  EXPECT_EQ(both_empty.recall, 1.0);
  EXPECT_EQ(both_empty.f1, 1.0);

  const std::vector<PulseEvent> est{{10.5, 1.2}, {80, 1.0}};
  const auto half = score(truth, est, match_events(truth, est, 1.0));
  EXPECT_DOUBLE_EQ(half.precision, 0.5);
  EXPECT_DOUBLE_EQ(half.recall, 0.5);
  EXPECT_DOUBLE_EQ(half.f1, 0.5);
  EXPECT_DOUBLE_EQ(half.tau_rmse, 0.5);
  EXPECT_NEAR(half.alpha_rmse, 0.2, 1e-12);
}

TEST(SpectrumDistance, Examples) {
  const auto a = masses_at({{3, 1.0}});
  const auto b = masses_at({{5, 1.0}});
  EXPECT_DOUBLE_EQ(spectrum_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(spectrum_distance(a, b), 2.0);
  const auto split = masses_at({{3, 0.5}, {5, 0.5}});
  const auto mid = masses_at({{4, 1.0}});
  EXPECT_DOUBLE_EQ(spectrum_distance(split, mid), w1_oracle(split, mid));
  EXPECT_DOUBLE_EQ(spectrum_distance(split, mid), 1.0);
  EXPECT_THROW(spectrum_distance(a, masses_at({{3, 1.0}}, 8)), std::invalid_argument);
  EXPECT_THROW(spectrum_distance(a, masses_at({{3, 0.5}})), std::invalid_argument);
}

TEST(SpectrumDistance, TriangleInequality) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto rand_h = [&]() {
    Histogram h{centered_edges(0.5, 20), std::vector<double>(20)};
    for (auto& m : h.masses) m = u(rng);
    return normalized(h);
  };
  for (int i = 0; i < 500; ++i) {
    const auto x = rand_h(), y = rand_h(), z = rand_h();
    const double xy = spectrum_distance(x, y);
    EXPECT_GE(xy, 0.0);
    EXPECT_NEAR(xy, w1_oracle(x, y), 1e-12);
    EXPECT_LE(spectrum_distance(x, z), xy + spectrum_distance(y, z) + 1e-9);
  }
}

TEST(RunSweep, EmptyGrid) {
  EXPECT_TRUE(run_sweep({}, {}).reports.empty());
  SweepOptions bad;
  bad.trials = 0;
  EXPECT_THROW(run_sweep({}, bad), std::invalid_argument);
}

TEST(RunSweep, NoiselessSeparatedMatchedFilterIsPerfect) {
  const std::vector<SweepPoint> grid{separated_point()};
  SweepOptions o;
  o.trials = 5;
  const auto r = run_sweep(grid, o);
  ASSERT_EQ(r.reports.size(), 5U);
  for (const auto& rep : r.reports) {
    EXPECT_TRUE(rep.error.empty()) << rep.error;
    EXPECT_EQ(rep.scores.f1, 1.0);
    EXPECT_FALSE(rep.reliability.has_value());
  }
  ASSERT_EQ(r.summary.size(), 1U);
  EXPECT_EQ(r.summary[0].f1.mean, 1.0);
  EXPECT_EQ(r.summary[0].f1.std, 0.0);
}

TEST(RunSweep, EveryChainRunsOnSeparatedPulses) {
  for (const char* chain : {"matched", "trapezoid", "wiener", "peel", "fit", "sparse"}) {
    SweepPoint p = separated_point();
    p.sim.sigma = 0.005;
    p.method.chain = chain;
    const std::vector<SweepPoint> grid{p};
    SweepOptions o;
    o.trials = 2;
    const auto r = run_sweep(grid, o);
    for (const auto& rep : r.reports) {
      EXPECT_TRUE(rep.error.empty()) << chain << ": " << rep.error;
      EXPECT_EQ(rep.scores.f1, 1.0) << chain;
      EXPECT_TRUE(rep.spectrum_w1.has_value());
    }
  }
}

TEST(RunSweep, FailuresAreRecordedNotThrown) {
  SweepPoint p = separated_point();
  p.method.chain = "nonsense";
  const std::vector<SweepPoint> grid{p, separated_point()};
  SweepOptions o;
  o.trials = 2;
  const auto r = run_sweep(grid, o);
  ASSERT_EQ(r.reports.size(), 4U);
  EXPECT_FALSE(r.reports[0].error.empty());
  EXPECT_TRUE(r.reports[2].error.empty());
  EXPECT_EQ(r.summary[0].failures, 2U);
  EXPECT_EQ(r.summary[1].failures, 0U);
}

TEST(RunSweep, ReproducibleAcrossRunsAndThreadCounts) {
  std::vector<SweepPoint> grid;
  for (double sigma : {0.01, 0.05}) {
    SweepPoint p;
    p.sim.rate = 0.01;
    p.sim.duration = 3000.0;
    p.sim.sigma = sigma;
    p.sim.spectrum = AmplitudeSpectrum({Uniform{0.5, 1.5, 1.0}});
    p.method.chain = "trapezoid";
    grid.push_back(p);
  }
  SweepOptions o;
  o.trials = 4;
  o.base_seed = 77;
  const auto a = run_sweep(grid, o);
  o.jobs = 3;
  const auto b = run_sweep(grid, o);
  ASSERT_EQ(a.reports.size(), b.reports.size());
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    EXPECT_EQ(a.reports[i].seed, b.reports[i].seed);
    EXPECT_EQ(a.reports[i].scores.f1, b.reports[i].scores.f1);
    EXPECT_EQ(a.reports[i].scores.tau_rmse, b.reports[i].scores.tau_rmse);
    EXPECT_EQ(a.reports[i].scores.alpha_rmse, b.reports[i].scores.alpha_rmse);
    EXPECT_EQ(a.reports[i].spectrum_w1, b.reports[i].spectrum_w1);
  }
  // Trials differ from each other.
  EXPECT_NE(a.reports[0].seed, a.reports[1].seed);
}

TEST(RunSweep, PileupCaseDegradesWithNoise) {
  // f1 of the (10, 16) pair falls as sigma grows, towards the floor where
  // only one of the two pulses is found.
  std::vector<SweepPoint> grid;
  for (double sigma : {0.001, 0.05, 0.2}) {
    SweepPoint p;
    p.sim.duration = 300.0;
    p.sim.sigma = sigma;
    p.sim.fixed_events = std::vector<PulseEvent>{{10.0, 1.0}, {16.0, 1.0}};
    p.method.chain = "fit";
    p.method.n_max = 3;
    grid.push_back(p);
  }
  SweepOptions o;
  o.trials = 10;
  const auto r = run_sweep(grid, o);
  EXPECT_GT(r.summary[0].f1.mean, r.summary[2].f1.mean);
  EXPECT_GE(r.summary[0].f1.mean, r.summary[1].f1.mean);
  EXPECT_EQ(r.summary[0].f1.mean, 1.0);
}

TEST(TrialSeed, DistinctAndStable) {
  EXPECT_EQ(trial_seed(1, 2, 3), trial_seed(1, 2, 3));
  EXPECT_NE(trial_seed(1, 2, 3), trial_seed(1, 3, 2));
  EXPECT_NE(trial_seed(1, 2, 3), trial_seed(2, 2, 3));
}
