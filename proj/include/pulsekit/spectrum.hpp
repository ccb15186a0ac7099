#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pulsekit/signal_model.hpp"

namespace pulsekit {

/// Binned amplitude distribution. Bins are left-closed [edges[i], edges[i+1]).
/// Mass outside the edges is tallied separately.
struct Histogram {
  std::vector<double> edges;
  std::vector<double> masses;
  double underflow{0.0};
  double overflow{0.0};

  std::size_t bins() const { return masses.size(); }
  double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
  double in_range_mass() const;
  /// In-range mass plus the out-of-range tallies.
  double total() const;
  /// Mean of the in-range masses at bin centers.
  double mean() const;
  bool is_normalized(double tol = 1e-9) const;
};

/// Throws std::invalid_argument unless edges are strictly increasing and
/// masses match them.
void validate(const Histogram& h);

/// Histogram scaled so that total() == 1.
Histogram normalized(const Histogram& h);

/// Edges (i - 1/2) * width for i = 0..bins, i.e. bins centered on multiples
/// of width starting at 0. Sums of centers land on centers.
std::vector<double> centered_edges(double width, std::size_t bins);

Histogram estimate_histogram(std::span<const double> amplitudes, std::span<const double> edges);

/// Two-pulse pile-up model: (1 - q) h + q (h * h) with q = 1 - exp(-rate * window).
/// Requires uniform bins and a normalized input.
Histogram pileup_forward(const Histogram& h, double rate, double window);

struct PileupCorrection {
  Histogram corrected;
  double residual_l1{0.0};  // ||A(k+1) - A(k)||_1 of the last step
};

/// Inverts pileup_forward by fixed-point iteration starting from the
/// measured histogram.
PileupCorrection pileup_correct(const Histogram& measured, double rate, double window,
                                std::size_t iters);

/// Amplitude grid for decompounding: bins centered on 0, w, 2w, ...
struct AmplitudeGrid {
  double bin_width{0.1};
  std::size_t bins{128};
};

struct DecompoundOptions {
  /// Standard deviation of per-sample noise, removed from the area
  /// distribution analytically (area noise variance sigma^2 * L * dt).
  double noise_sigma{0.0};
  double dt{1.0};
  /// Bins whose recovered mass is below this many estimated noise standard
  /// deviations are set to zero. 0 keeps every positive bin.
  double noise_floor{3.0};
};

struct DecompoundResult {
  Histogram spectrum;
  bool empty{false};  // no amplitude mass beyond the zero bin
  double mu{0.0};
  double cf_cutoff{0.0};
  std::vector<double> omega;
  std::vector<double> cf_magnitude;
  std::vector<bool> cf_used;
};

/// Recovers the amplitude distribution from areas of intervals that each
/// contain a Poisson(rate * interval_len) number of whole pulses.
DecompoundResult decompound_areas(std::span<const double> areas, double rate, double interval_len,
                                  double pulse_area, const AmplitudeGrid& grid,
                                  const DecompoundOptions& options = {});

/// Areas of non-overlapping intervals of length interval_len whose boundary
/// samples are both below quiet_threshold in magnitude.
std::vector<double> interval_areas(const SampledSignal& signal, double interval_len,
                                   double quiet_threshold);

/// Total-variation distance 0.5 * sum |h1 - h2| including out-of-range tallies.
double total_variation(const Histogram& h1, const Histogram& h2);

}  // namespace pulsekit
