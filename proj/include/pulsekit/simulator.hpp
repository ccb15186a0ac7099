#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "pulsekit/random.hpp"
#include "pulsekit/signal_model.hpp"

namespace pulsekit {

/// Point mass at `center`.
struct Line {
  double center{};
  double weight{1.0};
};

/// Normal(center, std) restricted to [0, inf); negative draws are redrawn.
struct GaussianLine {
  double center{};
  double std{};
  double weight{1.0};
};

struct Uniform {
  double lo{};
  double hi{};
  double weight{1.0};
};

using SpectrumComponent = std::variant<Line, GaussianLine, Uniform>;

/// Mixture distribution of pulse amplitudes.
class AmplitudeSpectrum {
 public:
  AmplitudeSpectrum() = default;
  explicit AmplitudeSpectrum(std::vector<SpectrumComponent> components);

  static AmplitudeSpectrum line(double center) { return AmplitudeSpectrum({Line{center, 1.0}}); }

  const std::vector<SpectrumComponent>& components() const { return components_; }
  double mean() const;
  double second_moment() const;
  double sample(Rng& rng) const;

 private:
  std::vector<SpectrumComponent> components_;
  std::vector<double> cumulative_;
};

struct SimConfig {
  double rate{0.0};      // events per unit time
  double duration{1.0};  // observation length
  double dt{1.0};
  double sigma{0.0};
  PulseShape shape = PulseShape::double_exp(0.06, 0.15);
  AmplitudeSpectrum spectrum = AmplitudeSpectrum::line(1.0);
  std::uint64_t seed{0};
  /// Also generate arrivals in a margin of ten pulse widths before t = 0, so
  /// the observation starts in the stationary regime.
  bool warmup{false};
  /// Fixed ground truth used instead of the Poisson stream when set.
  std::optional<std::vector<PulseEvent>> fixed_events;
};

void validate(const SimConfig& config);

/// Number of samples in the observation window.
std::size_t sample_count(const SimConfig& config);

/// Width used for the warm-up margin: time for the pulse to fall below the
/// kernel truncation level.
double pulse_width(const PulseShape& shape);

std::vector<PulseEvent> sample_events(const SimConfig& config);

struct Simulation {
  std::vector<PulseEvent> events;
  SampledSignal clean;
  SampledSignal noisy;
};

Simulation simulate(const SimConfig& config);

}  // namespace pulsekit
