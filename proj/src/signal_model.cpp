#include "pulsekit/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "pulsekit/random.hpp"

namespace pulsekit {

namespace {

// Synthesis cut-off: far below double resolution of the peak, so the sum is
// exact for all practical purposes while every pulse stays finite in length.
constexpr double kSynthesisTruncation = 1e-18;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double eval_tabulated(const Tabulated& tab, double t) {
  const double x = (t - tab.t_start) / tab.dt;
  const auto last = static_cast<double>(tab.samples.size() - 1);
  if (!(x >= 0.0) || x > last) return 0.0;
  const auto i = static_cast<std::size_t>(std::floor(x));
  if (i + 1 >= tab.samples.size()) return tab.samples.back();
  const double frac = x - static_cast<double>(i);
  return tab.samples[i] + frac * (tab.samples[i + 1] - tab.samples[i]);
}

}  // namespace

PulseShape PulseShape::double_exp(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b) || !(a > 0.0) || !(a < b)) {
    throw std::invalid_argument("double-exponential pulse requires 0 < a < b");
  }
  return PulseShape(DoubleExp{a, b});
}

PulseShape PulseShape::tabulated(std::vector<double> samples, double dt, double t_start) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("tabulated pulse requires dt > 0");
  }
  if (samples.size() < 2) {
    throw std::invalid_argument("tabulated pulse requires at least 2 samples");
  }
  if (!std::isfinite(t_start) ||
      !std::all_of(samples.begin(), samples.end(), [](double v) { return std::isfinite(v); })) {
    throw std::invalid_argument("tabulated pulse values must be finite");
  }
  return PulseShape(Tabulated{std::move(samples), dt, t_start});
}

double SampledSignal::energy() const {
  double e = 0.0;
  for (double v : values) e += v * v;
  return e;
}

void validate(const SampledSignal& signal) {
  if (!(signal.dt > 0.0) || !std::isfinite(signal.dt)) {
    throw std::invalid_argument("signal dt must be positive");
  }
  if (!std::isfinite(signal.t0)) throw std::invalid_argument("signal t0 must be finite");
  for (double v : signal.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("signal contains non-finite values");
  }
}

double SampledKernel::energy() const {
  double e = 0.0;
  for (double v : taps) e += v * v;
  return e;
}

double SampledKernel::sum() const {
  double s = 0.0;
  for (double v : taps) s += v;
  return s;
}

double eval_pulse(const PulseShape& shape, double t) {
  return std::visit(overloaded{
                        [t](const DoubleExp& p) {
                          if (!(t >= 0.0)) return 0.0;
                          return std::exp(-p.a * t) - std::exp(-p.b * t);
                        },
                        [t](const Tabulated& p) { return eval_tabulated(p, t); },
                    },
                    shape.repr());
}

PulsePeak pulse_peak(const PulseShape& shape) {
  return std::visit(overloaded{
                        [](const DoubleExp& p) {
                          const double t = std::log(p.b / p.a) / (p.b - p.a);
                          return PulsePeak{t, std::exp(-p.a * t) - std::exp(-p.b * t)};
                        },
                        [](const Tabulated& p) {
                          auto it = std::max_element(p.samples.begin(), p.samples.end());
                          const bool all_zero = std::all_of(p.samples.begin(), p.samples.end(),
                                                            [](double v) { return v == 0.0; });
                          if (all_zero) throw std::runtime_error("degenerate pulse");
                          const auto i = static_cast<double>(it - p.samples.begin());
                          return PulsePeak{p.t_start + i * p.dt, *it};
                        },
                    },
                    shape.repr());
}

std::complex<double> freq_response(const PulseShape& shape, double f) {
  using namespace std::complex_literals;
  const double w = 2.0 * std::numbers::pi * f;
  return std::visit(overloaded{
                        [w](const DoubleExp& p) -> std::complex<double> {
                          return 1.0 / (p.a + 1i * w) - 1.0 / (p.b + 1i * w);
                        },
                        [w](const Tabulated& p) -> std::complex<double> {
                          std::complex<double> acc{0.0, 0.0};
                          for (std::size_t k = 0; k < p.samples.size(); ++k) {
                            const double t = p.t_start + static_cast<double>(k) * p.dt;
                            acc += p.samples[k] * std::exp(-1i * w * t);
                          }
                          return acc * p.dt;
                        },
                    },
                    shape.repr());
}

double pulse_area(const PulseShape& shape) {
  return std::visit(overloaded{
                        [](const DoubleExp& p) { return 1.0 / p.a - 1.0 / p.b; },
                        [](const Tabulated& p) {
                          double s = 0.0;
                          for (std::size_t k = 0; k + 1 < p.samples.size(); ++k) {
                            s += 0.5 * (p.samples[k] + p.samples[k + 1]);
                          }
                          return s * p.dt;
                        },
                    },
                    shape.repr());
}

double support_end(const PulseShape& shape, double rel) {
  if (!(rel > 0.0)) throw std::invalid_argument("support_end: rel must be positive");
  const PulsePeak peak = pulse_peak(shape);
  const double level = rel * std::abs(peak.amplitude);
  return std::visit(overloaded{
                        [&](const DoubleExp& p) {
                          if (rel >= 1.0) return peak.time;
                          // p(t) <= exp(-a t), so hi is certainly past the level.
                          double lo = peak.time;
                          double hi = std::max(peak.time, std::log(1.0 / level) / p.a) + 1.0;
                          for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
                            const double mid = 0.5 * (lo + hi);
                            if (eval_pulse(shape, mid) > level) lo = mid; else hi = mid;
                          }
                          return hi;
                        },
                        [&](const Tabulated& p) {
                          std::size_t last = 0;
                          for (std::size_t k = 0; k < p.samples.size(); ++k) {
                            if (std::abs(p.samples[k]) >= level) last = k;
                          }
                          last = std::min(last + 1, p.samples.size() - 1);
                          return p.t_start + static_cast<double>(last) * p.dt;
                        },
                    },
                    shape.repr());
}

SampledKernel sample_kernel(const PulseShape& shape, double dt, double rel) {
  if (!(dt > 0.0)) throw std::invalid_argument("sample_kernel: dt must be positive");
  const double t_end = support_end(shape, rel);
  double t_begin = 0.0;
  if (!shape.is_double_exp()) t_begin = shape.as_tabulated().t_start;
  SampledKernel k;
  k.dt = dt;
  k.first = static_cast<std::ptrdiff_t>(std::floor(t_begin / dt));
  const auto last = static_cast<std::ptrdiff_t>(std::ceil(t_end / dt));
  k.taps.reserve(static_cast<std::size_t>(std::max<std::ptrdiff_t>(last - k.first + 1, 1)));
  for (std::ptrdiff_t m = k.first; m <= last; ++m) {
    k.taps.push_back(eval_pulse(shape, static_cast<double>(m) * dt));
  }
  const bool all_zero =
      std::all_of(k.taps.begin(), k.taps.end(), [](double v) { return v == 0.0; });
  if (all_zero) throw std::runtime_error("degenerate pulse: sampled kernel is all zero");
  return k;
}

SampledSignal synthesize(std::span<const PulseEvent> events, const PulseShape& shape,
                         std::size_t n, double dt, double t0) {
  if (n == 0) throw std::invalid_argument("synthesize: n must be at least 1");
  if (!(dt > 0.0)) throw std::invalid_argument("synthesize: dt must be positive");
  SampledSignal out{dt, t0, std::vector<double>(n, 0.0)};

  double rel_begin = 0.0;
  if (!shape.is_double_exp()) rel_begin = shape.as_tabulated().t_start;
  const double rel_end = shape.is_double_exp()
                             ? support_end(shape, kSynthesisTruncation)
                             : shape.as_tabulated().t_start +
                                   static_cast<double>(shape.as_tabulated().samples.size()) *
                                       shape.as_tabulated().dt;
  const auto last = static_cast<double>(n - 1);

  for (const PulseEvent& ev : events) {
    if (ev.alpha == 0.0) continue;
    const double lo = std::floor((ev.tau + rel_begin - t0) / dt);
    const double hi = std::ceil((ev.tau + rel_end - t0) / dt);
    if (hi < 0.0 || lo > last) continue;
    const auto k0 = static_cast<std::size_t>(std::max(lo, 0.0));
    const auto k1 = static_cast<std::size_t>(std::min(hi, last));
    for (std::size_t k = k0; k <= k1; ++k) {
      out.values[k] += ev.alpha * eval_pulse(shape, out.time_at(k) - ev.tau);
    }
  }
  return out;
}

SampledSignal add_noise(const SampledSignal& signal, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("add_noise: sigma must be non-negative");
  SampledSignal out = signal;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (double& v : out.values) v += gauss(rng);
  return out;
}

}  // namespace pulsekit
