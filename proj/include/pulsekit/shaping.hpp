#pragma once

#include <optional>

#include "pulsekit/signal_model.hpp"

namespace pulsekit {

/// Output of a shaping filter. A unit pulse arriving at tau produces its
/// output peak at tau + group_delay with height unit_gain.
struct ShapedSignal {
  SampledSignal signal;
  double group_delay{0.0};
  double unit_gain{1.0};
};

/// Correlation with the sampled pulse: out[k] = sum_m p(m dt) x[k + m].
/// Aligned so a lone pulse peaks at its arrival index with height equal to
/// the sampled pulse energy.
ShapedSignal matched_filter(const SampledSignal& signal, const PulseShape& shape);

/// Recursive trapezoidal shaper for single-pole decay (decay in samples).
/// A step-decay input alpha*exp(-n/decay) yields a flat top of height alpha,
/// lasting flat_m + 1 samples.
ShapedSignal trapezoid_filter(const SampledSignal& signal, double decay, int rise_k, int flat_m);

struct TrapezoidResponse {
  double gain{1.0};   // flat-top height for a unit pulse
  double delay{0.0};  // arrival to middle of the flat top
};

/// Trapezoid output for a noiseless unit pulse of the given shape: the flat
/// top height and the delay from arrival to the middle of the samples within
/// 0.1% of it.
TrapezoidResponse trapezoid_response(const PulseShape& shape, double dt, double decay, int rise_k,
                                     int flat_m);

/// Frequency-domain Wiener deconvolution towards an impulse train:
/// H = conj(P) / (|P|^2 + noise_power / prior_power). The prior power
/// defaults to the sampled pulse energy (unit event rate).
ShapedSignal wiener_filter(const SampledSignal& signal, const PulseShape& shape,
                           double noise_power, std::optional<double> prior_power = std::nullopt);

}  // namespace pulsekit
