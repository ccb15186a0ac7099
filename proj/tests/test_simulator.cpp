#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "pulsekit/simulator.hpp"

using namespace pulsekit;

namespace {

SimConfig base_config(double rate, double duration, std::uint64_t seed) {
  SimConfig c;
  c.rate = rate;
  c.duration = duration;
  c.dt = 1.0;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(AmplitudeSpectrum, ValidatesWeightsAndSupport) {
  EXPECT_THROW(AmplitudeSpectrum({Line{1.0, 0.5}}), std::invalid_argument);
  EXPECT_THROW(AmplitudeSpectrum({Line{1.0, 0.5}, Line{2.0, -0.5}}), std::invalid_argument);
  EXPECT_THROW(AmplitudeSpectrum({Line{-1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(AmplitudeSpectrum({Uniform{-1.0, 2.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(AmplitudeSpectrum(std::vector<SpectrumComponent>{}), std::invalid_argument);
  EXPECT_NO_THROW(AmplitudeSpectrum({Line{1.0, 0.25}, GaussianLine{3.0, 0.5, 0.25}, Uniform{0, 2, 0.5}}));
}

TEST(SimConfig, Validation) {
  SimConfig c = base_config(1.0, 10.0, 0);
  EXPECT_NO_THROW(validate(c));
  c.rate = -1;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = base_config(1.0, 0.0, 0);
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = base_config(1.0, 10.0, 0);
  c.dt = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = base_config(1.0, 10.0, 0);
  c.sigma = -0.1;
  EXPECT_THROW(validate(c), std::invalid_argument);
}

TEST(SampleEvents, ZeroRateIsEmpty) {
  EXPECT_TRUE(sample_events(base_config(0.0, 1000.0, 1)).empty());
}

TEST(SampleEvents, LineSpectrumGivesExactAmplitudes) {
  SimConfig c = base_config(0.1, 10000.0, 2);
  c.spectrum = AmplitudeSpectrum::line(5.0);
  const auto ev = sample_events(c);
  ASSERT_FALSE(ev.empty());
  for (const auto& e : ev) EXPECT_EQ(e.alpha, 5.0);
}

TEST(SampleEvents, SortedWithinWindowAndDeterministic) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SimConfig c = base_config(0.05, 5000.0, seed);
    const auto ev = sample_events(c);
    for (std::size_t i = 0; i < ev.size(); ++i) {
      EXPECT_GE(ev[i].tau, 0.0);
      EXPECT_LT(ev[i].tau, 5000.0);
      if (i) {
        EXPECT_LT(ev[i - 1].tau, ev[i].tau);
      }
    }
    EXPECT_EQ(ev, sample_events(c));
  }
}

TEST(SampleEvents, PoissonCountWithinThreeSigmaForMostSeeds) {
  int inside = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const auto n = static_cast<double>(sample_events(base_config(0.01, 1e6, 1000 + s)).size());
    if (std::abs(n - 1e4) <= 3.0 * std::sqrt(1e4)) ++inside;
  }
  EXPECT_GE(inside, 95);
}

TEST(SampleEvents, CountMeanAndVarianceArePoisson) {
  const int seeds = 2000;
  double m = 0.0;
  double m2 = 0.0;
  for (int s = 0; s < seeds; ++s) {
    const auto n = static_cast<double>(sample_events(base_config(0.05, 1000.0, 77 + s)).size());
    m += n;
    m2 += n * n;
  }
  m /= seeds;
  const double var = (m2 - seeds * m * m) / (seeds - 1);
  // lambda T = 50; standard errors: mean 0.16, variance about 1.6.
  EXPECT_NEAR(m, 50.0, 0.6);
  EXPECT_NEAR(var, 50.0, 7.0);
}

TEST(SampleEvents, NearestNeighbourFractionMatchesGapDistribution) {
  const double rate = 1e-4;
  const double width = 100.0;
  SimConfig c = base_config(rate, 2e8, 31);
  const auto ev = sample_events(c);
  std::size_t close = 0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const bool left = i > 0 && ev[i].tau - ev[i - 1].tau < width;
    const bool right = i + 1 < ev.size() && ev[i + 1].tau - ev[i].tau < width;
    if (left || right) ++close;
  }
  const double frac = static_cast<double>(close) / static_cast<double>(ev.size());
  const double expected = 1.0 - std::exp(-2.0 * rate * width);  // about 2 lambda width
  EXPECT_NEAR(frac, expected, 0.003);
  EXPECT_NEAR(frac, 0.02, 0.003);
}

TEST(SampleEvents, AmplitudeMeanMatchesSpectrumMean) {
  const std::vector<AmplitudeSpectrum> spectra{
      AmplitudeSpectrum({GaussianLine{5.0, 0.1, 1.0}}),
      AmplitudeSpectrum({Uniform{1.0, 3.0, 1.0}}),
      AmplitudeSpectrum({Line{3.0, 0.5}, Line{5.0, 0.5}}),
      AmplitudeSpectrum({GaussianLine{0.5, 1.0, 0.7}, Uniform{0.0, 4.0, 0.3}}),
  };
  for (const auto& sp : spectra) {
    SimConfig c = base_config(0.1, 1.2e6, 9);
    c.spectrum = sp;
    const auto ev = sample_events(c);
    ASSERT_GE(ev.size(), 100000U);
    double m = 0.0;
    for (const auto& e : ev) {
      EXPECT_GE(e.alpha, 0.0);
      m += e.alpha;
    }
    m /= static_cast<double>(ev.size());
    EXPECT_NEAR(m, sp.mean(), 0.01 * sp.mean());
  }
}

TEST(AmplitudeSpectrum, SecondMomentMatchesDraws) {
  const std::vector<AmplitudeSpectrum> spectra{
      AmplitudeSpectrum::line(2.0),
      AmplitudeSpectrum({GaussianLine{0.5, 1.0, 1.0}}),
      AmplitudeSpectrum({Uniform{1.0, 3.0, 0.5}, Line{5.0, 0.5}}),
  };
  for (const auto& sp : spectra) {
    Rng rng(31);
    double m2 = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
      const double x = sp.sample(rng);
      m2 += x * x;
    }
    m2 /= n;
    EXPECT_NEAR(sp.second_moment(), m2, 0.01 * m2);
  }
}

TEST(Simulate, NoiselessAndEmptyCases) {
  SimConfig c = base_config(0.02, 2000.0, 4);
  const auto sim = simulate(c);
  EXPECT_EQ(sim.noisy.values, sim.clean.values);

  const auto zero = simulate(base_config(0.0, 500.0, 4));
  EXPECT_TRUE(zero.events.empty());
  for (double v : zero.clean.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(zero.clean.size(), 500U);
}

TEST(Simulate, CleanIsSynthesisOfEvents) {
  SimConfig c = base_config(0.02, 2000.0, 5);
  c.sigma = 0.1;
  const auto sim = simulate(c);
  const auto ref = synthesize(sim.events, c.shape, sim.clean.size(), c.dt);
  EXPECT_EQ(sim.clean.values, ref.values);
  EXPECT_NE(sim.noisy.values, sim.clean.values);
}

TEST(Simulate, BitIdenticalForSameSeed) {
  SimConfig c = base_config(0.03, 5000.0, 99);
  c.sigma = 0.05;
  c.spectrum = AmplitudeSpectrum({GaussianLine{2.0, 0.3, 1.0}});
  const auto a = simulate(c);
  const auto b = simulate(c);
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(a.clean.values, b.clean.values);
  EXPECT_EQ(a.noisy.values, b.noisy.values);
}

TEST(Simulate, NoiseLevelDoesNotPerturbEventStream) {
  SimConfig c = base_config(0.03, 5000.0, 17);
  c.spectrum = AmplitudeSpectrum({Uniform{0.5, 2.0, 1.0}});
  c.sigma = 0.01;
  const auto a = simulate(c);
  c.sigma = 0.5;
  const auto b = simulate(c);
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(a.clean.values, b.clean.values);
}

TEST(Simulate, CampbellMean) {
  SimConfig c = base_config(0.05, 2e6, 123);
  c.warmup = true;
  c.spectrum = AmplitudeSpectrum({Uniform{0.5, 1.5, 1.0}});
  const auto sim = simulate(c);
  double m = 0.0;
  for (double v : sim.clean.values) m += v;
  m /= static_cast<double>(sim.clean.size());
  const double expected = c.rate * c.spectrum.mean() * pulse_area(c.shape);
  EXPECT_NEAR(m, expected, 0.02 * expected);
}

TEST(Simulate, WarmupStartsStationary) {
  SimConfig c = base_config(0.05, 1000.0, 8);
  c.warmup = true;
  const auto sim = simulate(c);
  ASSERT_FALSE(sim.events.empty());
  EXPECT_LT(sim.events.front().tau, 0.0);
  EXPECT_GT(sim.clean.values[0], 0.0);
  c.warmup = false;
  for (const auto& e : sample_events(c)) EXPECT_GE(e.tau, 0.0);
}

TEST(Simulate, FixedEventsOverrideArrivals) {
  SimConfig c = base_config(5.0, 200.0, 1);
  c.fixed_events = std::vector<PulseEvent>{{60.0, 0.6}, {10.0, 1.0}};
  const auto sim = simulate(c);
  ASSERT_EQ(sim.events.size(), 2U);
  EXPECT_EQ(sim.events[0], (PulseEvent{10.0, 1.0}));
  EXPECT_EQ(sim.events[1], (PulseEvent{60.0, 0.6}));
}
