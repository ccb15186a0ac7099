#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "pulsekit/detect.hpp"
#include "pulsekit/signal_model.hpp"
#include "pulsekit/sparse.hpp"
#include "pulsekit/spectrum.hpp"

namespace pulsekit {

/// Unreadable, missing or malformed input file.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Signal files: `.csv` is text with header `t,value`; anything else is the
/// PKSG binary layout (16-byte header, then float32 little-endian samples).
SampledSignal read_signal(const std::filesystem::path& path);
void write_signal(const std::filesystem::path& path, const SampledSignal& signal);

void write_signal_csv(std::ostream& out, const SampledSignal& signal);
SampledSignal read_signal_csv(std::istream& in);
void write_signal_binary(std::ostream& out, const SampledSignal& signal);
SampledSignal read_signal_binary(std::istream& in);

/// CSV `tau,alpha`, 17 significant digits.
void write_events_csv(std::ostream& out, std::span<const PulseEvent> events);
std::vector<PulseEvent> read_events_csv(std::istream& in);
std::vector<PulseEvent> read_events(const std::filesystem::path& path);

void write_clusters_csv(std::ostream& out, std::span<const Cluster> clusters);
void write_histogram_csv(std::ostream& out, const Histogram& h);
/// Reads `lo,hi,mass` rows; consecutive rows must share edges.
Histogram read_histogram(const std::filesystem::path& path);
void write_activations_csv(std::ostream& out, const Activations& act);

/// Single-column numeric file (optional header line), e.g. amplitudes.
std::vector<double> read_column(const std::filesystem::path& path, std::size_t column = 0);

}  // namespace pulsekit
