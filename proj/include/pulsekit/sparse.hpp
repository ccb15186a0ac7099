#pragma once

#include <cstddef>
#include <vector>

#include "pulsekit/signal_model.hpp"

namespace pulsekit {

/// Non-negative pulse activations a(k), one per sample of the source signal.
struct Activations {
  std::vector<double> values;
  double dt{1.0};
  double t0{0.0};
  double objective{0.0};
  std::size_t iterations{0};
  bool converged{false};
  /// Objective of the accepted iterate, starting at a = 0, when requested.
  std::vector<double> trace;
};

struct SparseOptions {
  double c{0.0};        // weight of the 1-norm penalty
  double tol{1e-10};    // relative objective decrease that stops the iteration
  std::size_t max_iter{20000};
  bool record_trace{false};
};

/// Approximate minimizer of ||y - P a||^2 + c * sum(a) over a >= 0, where P
/// convolves with the sampled, truncated pulse. Monotone accelerated
/// proximal gradient with step 1/L; L bounds the Lipschitz constant of the
/// quadratic's gradient.
Activations sparse_deconvolve(const SampledSignal& signal, const PulseShape& shape,
                              const SparseOptions& options);

/// Objective value ||y - P a||^2 + c * sum(a).
double sparse_objective(const SampledSignal& signal, const PulseShape& shape,
                        const std::vector<double>& a, double c);

/// Gradient of ||y - P a||^2 with respect to a.
std::vector<double> sparse_gradient(const SampledSignal& signal, const PulseShape& shape,
                                    const std::vector<double>& a);

/// 2 * sigma * sqrt(2 ln n) * ||p||, the universal-threshold analogue.
double default_regularization(double sigma, std::size_t n, const PulseShape& shape, double dt);

/// Groups nonzero activations (above 1e-6 of the largest) whose gaps are at most merge_window samples;
/// each group becomes one event at its amplitude-weighted centroid with the
/// summed amplitude. Events below min_alpha are dropped.
std::vector<PulseEvent> activations_to_events(const Activations& act, double min_alpha,
                                              std::size_t merge_window);

}  // namespace pulsekit
