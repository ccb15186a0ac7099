#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pulsekit/signal_model.hpp"

namespace pulsekit {

/// Two arrival times coincide to within numerical resolution, so the Gram
/// matrix of the pulse columns is (nearly) singular.
class DegeneratePlacement : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AmplitudeSolution {
  std::vector<double> alphas;
  double rss{0.0};
};

/// Least-squares amplitudes for pulses at fixed arrival times. Amplitudes
/// are unconstrained (may be negative). Throws DegeneratePlacement when the
/// Gram matrix condition number exceeds 1e12.
AmplitudeSolution solve_amplitudes(const SampledSignal& signal, const PulseShape& shape,
                                   std::span<const double> taus);

struct FitResult {
  std::vector<PulseEvent> events;  // sorted by tau
  double rss{0.0};
  std::size_t n_samples{0};
  bool converged{false};
  std::size_t iterations{0};
  /// Extra pulse arriving before the window, when requested.
  std::optional<PulseEvent> phantom;
};

struct FitOptions {
  std::size_t max_sweeps{200};
  double rel_tol{1e-10};
  /// Fit one additional pulse with tau before the window start to absorb
  /// tails of earlier arrivals.
  bool phantom{false};
};

/// Minimizes the residual sum of squares over N ordered arrival times with
/// amplitudes eliminated in closed form. Cyclic coordinate descent, one
/// golden-section search per arrival time per sweep.
FitResult fit_pulses(const SampledSignal& signal, const PulseShape& shape, std::size_t n,
                     std::optional<std::vector<double>> init = std::nullopt,
                     const FitOptions& options = {});

/// Best single pulse with tau restricted to [tau_lo, tau_hi].
FitResult fit_single_pulse(const SampledSignal& signal, const PulseShape& shape, double tau_lo,
                           double tau_hi);

struct OrderSelection {
  std::size_t order{0};
  FitResult fit;
  std::vector<double> rss_by_order;
  std::vector<bool> admissible;
};

/// Fits N = 0..n_max pulses (each fit initialized from the previous one plus
/// the strongest residual peak) and selects the N whose residual is closest
/// to sigma^2 (n_samples - 2N). Fits containing a pulse with amplitude below
/// 3 sigma are not eligible. Ties go to the smaller N.
OrderSelection select_order(const SampledSignal& signal, const PulseShape& shape, double sigma,
                            std::size_t n_max);

/// Events with alpha >= min_alpha, order preserved.
std::vector<PulseEvent> drop_weak(std::span<const PulseEvent> events, double min_alpha);

/// Residual signal minus the given events.
SampledSignal residual(const SampledSignal& signal, const PulseShape& shape,
                       std::span<const PulseEvent> events);

}  // namespace pulsekit
