#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace pulsekit {

/// p(t) = exp(-a t) - exp(-b t) for t >= 0, zero before. Requires 0 < a < b.
struct DoubleExp {
  double a{};
  double b{};
};

/// Pulse given by samples at t_start + k*dt, linearly interpolated.
struct Tabulated {
  std::vector<double> samples;
  double dt{1.0};
  double t_start{0.0};
};

/// The known pulse shape p(t). Construct through the factories, which
/// enforce the shape invariants.
class PulseShape {
 public:
  static PulseShape double_exp(double a, double b);
  static PulseShape tabulated(std::vector<double> samples, double dt, double t_start = 0.0);

  bool is_double_exp() const { return std::holds_alternative<DoubleExp>(repr_); }
  const DoubleExp& as_double_exp() const { return std::get<DoubleExp>(repr_); }
  const Tabulated& as_tabulated() const { return std::get<Tabulated>(repr_); }
  const std::variant<DoubleExp, Tabulated>& repr() const { return repr_; }

 private:
  explicit PulseShape(std::variant<DoubleExp, Tabulated> r) : repr_(std::move(r)) {}
  std::variant<DoubleExp, Tabulated> repr_;
};

/// One pulse: arrival time and amplitude.
struct PulseEvent {
  double tau{};
  double alpha{};

  friend bool operator==(const PulseEvent&, const PulseEvent&) = default;
};

/// Uniformly sampled observation; sample k sits at t0 + k*dt.
struct SampledSignal {
  double dt{1.0};
  double t0{0.0};
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }
  double energy() const;
};

/// Throws std::invalid_argument when dt <= 0 or a value is not finite.
void validate(const SampledSignal& signal);

struct PulsePeak {
  double time{};
  double amplitude{};
};

/// The pulse sampled on a grid: taps[m] = p((first + m) * dt).
struct SampledKernel {
  std::ptrdiff_t first{0};
  std::vector<double> taps;
  double dt{1.0};

  double energy() const;
  double sum() const;
};

/// Relative level below which filters treat the pulse as finished.
inline constexpr double kKernelTruncation = 1e-6;

double eval_pulse(const PulseShape& shape, double t);
PulsePeak pulse_peak(const PulseShape& shape);
std::complex<double> freq_response(const PulseShape& shape, double f);

/// Integral of p(t) over its support.
double pulse_area(const PulseShape& shape);

/// Earliest time after the peak from which |p(t)| stays below rel * peak.
double support_end(const PulseShape& shape, double rel);

SampledKernel sample_kernel(const PulseShape& shape, double dt, double rel = kKernelTruncation);

/// Noise-free superposition sum_i alpha_i p(t0 + k dt - tau_i), evaluated at
/// the exact (unsnapped) arrival times.
SampledSignal synthesize(std::span<const PulseEvent> events, const PulseShape& shape,
                         std::size_t n, double dt, double t0 = 0.0);

/// Adds i.i.d. N(0, sigma^2) noise from a generator seeded with `seed`.
SampledSignal add_noise(const SampledSignal& signal, double sigma, std::uint64_t seed);

}  // namespace pulsekit
