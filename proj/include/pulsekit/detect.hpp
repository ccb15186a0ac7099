#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pulsekit/shaping.hpp"
#include "pulsekit/signal_model.hpp"

namespace pulsekit {

/// Maximal interval [t1, t2] on which the signal stays at or above a
/// threshold. area is the trapezoid-rule integral of the signal itself.
struct Cluster {
  double t1{};
  double t2{};
  double duration{};
  double area{};
};

std::vector<Cluster> find_clusters(const SampledSignal& signal, double threshold);

/// Local maxima at or above threshold, kept greedily by height so that kept
/// peaks are at least min_separation samples apart. The peak time is refined
/// by a three-point parabola; tau = peak time - group_delay and
/// alpha = peak height / unit_gain. Result is sorted by tau.
std::vector<PulseEvent> detect_peaks(const SampledSignal& signal, double threshold,
                                     std::size_t min_separation, double group_delay = 0.0,
                                     double unit_gain = 1.0);

inline std::vector<PulseEvent> detect_peaks(const ShapedSignal& shaped, double threshold,
                                            std::size_t min_separation) {
  return detect_peaks(shaped.signal, threshold, min_separation, shaped.group_delay,
                      shaped.unit_gain);
}

/// Removes the mutual interference of nearby pulses from matched-filter peaks.
/// Each pass subtracts the modelled filter response of every other event,
/// then re-locates the event's peak within half_window samples of its current
/// position. Stops after max_passes or once no tau moves by 1e-3 samples.
std::vector<PulseEvent> refine_matched_peaks(const ShapedSignal& matched, const PulseShape& shape,
                                             std::vector<PulseEvent> events,
                                             std::size_t half_window = 3,
                                             std::size_t max_passes = 10);

struct PileupSplit {
  std::vector<Cluster> accepted;
  std::vector<Cluster> rejected;
};

/// Clusters longer than max_duration are treated as piled up.
PileupSplit reject_pileup(std::span<const Cluster> clusters, double max_duration);

struct PeelResult {
  std::vector<PulseEvent> events;  // discovery order
  SampledSignal residual;
  double residual_energy{0.0};
  std::size_t warnings{0};
};

/// Iterative fit-and-subtract. Each step fits one pulse to the rising edge
/// at the earliest threshold crossing of the residual, refines it jointly
/// with the overlapping pulses found before it, and subtracts the fit.
/// With split_pass, a last sweep refits each overlap group with one more
/// pulse to separate arrivals closer than the rising edge.
PeelResult peel(const SampledSignal& signal, const PulseShape& shape, double threshold,
                std::size_t max_pulses, bool split_pass = true);

}  // namespace pulsekit
