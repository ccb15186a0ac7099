#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pulsekit/signal_model.hpp"
#include "pulsekit/simulator.hpp"
#include "pulsekit/spectrum.hpp"

namespace pulsekit {

using Matching = std::vector<std::pair<std::size_t, std::size_t>>;  // (truth, estimate)

/// Greedy matching in increasing |dtau| order; each event used at most once.
Matching match_events(std::span<const PulseEvent> truth, std::span<const PulseEvent> estimated,
                      double time_tol);

struct Scores {
  double precision{0.0};
  double recall{0.0};
  double f1{0.0};
  double tau_rmse{0.0};
  double alpha_rmse{0.0};
  std::size_t n_truth{0};
  std::size_t n_estimated{0};
  std::size_t n_matched{0};
};

Scores score(std::span<const PulseEvent> truth, std::span<const PulseEvent> estimated,
             const Matching& matching);

/// Wasserstein-1 distance between histograms on identical edges.
double spectrum_distance(const Histogram& h1, const Histogram& h2);

/// Detection chain applied to the noisy observation in a sweep.
struct MethodConfig {
  std::string chain{"matched"};  // matched | trapezoid | wiener | peel | fit | sparse
  double threshold{0.5};         // amplitude units
  std::size_t min_separation{5};
  bool refine{true};             // matched: cancel neighbouring filter responses
  double time_tol{1.0};
  int rise{10};
  int flat{5};
  std::optional<double> decay;        // trapezoid decay in samples; default 1/(a dt)
  std::optional<double> noise_power;  // wiener; default sigma^2
  std::optional<double> prior_power;  // wiener; default event density times E[alpha^2]
  std::size_t max_pulses{100000};     // peel
  std::size_t n_max{4};               // fit
  std::optional<double> c;            // sparse; default from sigma
  double min_alpha{0.1};              // sparse
  std::size_t merge_window{2};        // sparse
  std::size_t sparse_max_iter{5000};
  double hist_bin_width{0.1};
  std::size_t hist_bins{128};
};

void validate(const MethodConfig& method);

struct SweepPoint {
  SimConfig sim;
  MethodConfig method;
};

struct BenchReport {
  std::size_t point{0};
  std::size_t trial{0};
  std::uint64_t seed{0};
  Scores scores;
  std::optional<double> spectrum_w1;
  std::map<std::string, double> runtime_ms;
  SweepPoint config;
  std::string error;  // empty when the trial succeeded
  /// Reserved for per-event reliability scores; never populated yet.
  std::optional<double> reliability;
};

struct MetricSummary {
  double mean{0.0};
  double std{0.0};
};

struct PointSummary {
  std::size_t point{0};
  std::size_t trials{0};
  std::size_t failures{0};
  MetricSummary precision, recall, f1, tau_rmse, alpha_rmse, spectrum_w1;
};

struct SweepResult {
  std::vector<BenchReport> reports;  // point-major, trial-minor
  std::vector<PointSummary> summary;
};

struct SweepOptions {
  std::size_t trials{1};
  std::uint64_t base_seed{0};
  std::size_t jobs{1};
  bool record_timing{true};
};

/// Runs the configured detection chain on an observation; timings per stage
/// are added to runtime_ms when non-null.
std::vector<PulseEvent> run_chain(const SampledSignal& observed, const SimConfig& sim,
                                  const MethodConfig& method,
                                  std::map<std::string, double>* runtime_ms = nullptr);

/// Seed of trial `trial` at grid point `point`.
std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t point, std::size_t trial);

SweepResult run_sweep(std::span<const SweepPoint> grid, const SweepOptions& options);

}  // namespace pulsekit
