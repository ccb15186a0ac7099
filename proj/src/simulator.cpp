#include "pulsekit/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pulsekit {

namespace {

double component_weight(const SpectrumComponent& c) {
  return std::visit([](const auto& x) { return x.weight; }, c);
}

// Mean of N(mu, s^2) truncated to [0, inf).
double truncated_normal_mean(double mu, double s) {
  if (s == 0.0) return mu;
  const double z = mu / s;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  return mu + s * pdf / cdf;
}

}  // namespace

AmplitudeSpectrum::AmplitudeSpectrum(std::vector<SpectrumComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("amplitude spectrum has no components");
  double total = 0.0;
  for (const auto& c : components_) {
    const double w = component_weight(c);
    if (!(w > 0.0)) throw std::invalid_argument("spectrum weights must be positive");
    std::visit(
        [](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, Line>) {
            if (!(x.center >= 0.0)) throw std::invalid_argument("line center must be >= 0");
          } else if constexpr (std::is_same_v<T, GaussianLine>) {
            if (!(x.center >= 0.0) || !(x.std >= 0.0)) {
              throw std::invalid_argument("gaussian line needs center >= 0 and std >= 0");
            }
          } else {
            if (!(x.lo >= 0.0) || !(x.hi > x.lo)) {
              throw std::invalid_argument("uniform component needs 0 <= lo < hi");
            }
          }
        },
        c);
    total += w;
    cumulative_.push_back(total);
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("spectrum weights must sum to 1");
}

double AmplitudeSpectrum::mean() const {
  double m = 0.0;
  for (const auto& c : components_) {
    m += std::visit(
        [](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, Line>) {
            return x.weight * x.center;
          } else if constexpr (std::is_same_v<T, GaussianLine>) {
            return x.weight * truncated_normal_mean(x.center, x.std);
          } else {
            return x.weight * 0.5 * (x.lo + x.hi);
          }
        },
        c);
  }
  return m;
}

double AmplitudeSpectrum::second_moment() const {
  double m = 0.0;
  for (const auto& c : components_) {
    m += std::visit(
        [](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, Line>) {
            return x.weight * x.center * x.center;
          } else if constexpr (std::is_same_v<T, GaussianLine>) {
            // E[X^2] = mu^2 + s^2 + mu (E[X] - mu) for truncation at zero.
            const double shift = truncated_normal_mean(x.center, x.std) - x.center;
            return x.weight * (x.center * x.center + x.std * x.std + x.center * shift);
          } else {
            return x.weight * (x.lo * x.lo + x.lo * x.hi + x.hi * x.hi) / 3.0;
          }
        },
        c);
  }
  return m;
}

double AmplitudeSpectrum::sample(Rng& rng) const {
  if (components_.empty()) throw std::logic_error("sampling an empty spectrum");
  std::size_t idx = 0;
  if (components_.size() > 1) {
    std::uniform_real_distribution<double> u(0.0, cumulative_.back());
    const double r = u(rng);
    idx = static_cast<std::size_t>(
        std::upper_bound(cumulative_.begin(), cumulative_.end(), r) - cumulative_.begin());
    idx = std::min(idx, components_.size() - 1);
  }
  return std::visit(
      [&rng](const auto& x) -> double {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Line>) {
          return x.center;
        } else if constexpr (std::is_same_v<T, GaussianLine>) {
          std::normal_distribution<double> g(x.center, x.std);
          for (;;) {
            const double v = g(rng);
            if (v >= 0.0) return v;
          }
        } else {
          std::uniform_real_distribution<double> u(x.lo, x.hi);
          return u(rng);
        }
      },
      components_[idx]);
}

void validate(const SimConfig& c) {
  if (!(c.rate >= 0.0) || !std::isfinite(c.rate)) throw std::invalid_argument("rate must be >= 0");
  if (!(c.duration > 0.0) || !std::isfinite(c.duration)) {
    throw std::invalid_argument("duration must be > 0");
  }
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw std::invalid_argument("dt must be > 0");
  if (!(c.sigma >= 0.0) || !std::isfinite(c.sigma)) throw std::invalid_argument("sigma must be >= 0");
  if (c.spectrum.components().empty()) throw std::invalid_argument("spectrum has no components");
  if (c.fixed_events) {
    for (const auto& e : *c.fixed_events) {
      if (!std::isfinite(e.tau) || !(e.alpha >= 0.0)) {
        throw std::invalid_argument("fixed events need finite tau and alpha >= 0");
      }
    }
  }
}

std::size_t sample_count(const SimConfig& config) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.duration / config.dt)));
}

double pulse_width(const PulseShape& shape) { return support_end(shape, kKernelTruncation); }

std::vector<PulseEvent> sample_events(const SimConfig& config) {
  validate(config);
  if (config.fixed_events) {
    auto events = *config.fixed_events;
    std::sort(events.begin(), events.end(),
              [](const PulseEvent& x, const PulseEvent& y) { return x.tau < y.tau; });
    return events;
  }
  std::vector<PulseEvent> events;
  if (config.rate == 0.0) return events;

  Rng arrivals(derive_seed(config.seed, stream::arrivals));
  Rng amplitudes(derive_seed(config.seed, stream::amplitudes));
  std::exponential_distribution<double> gap(config.rate);

  const double start = config.warmup ? -10.0 * pulse_width(config.shape) : 0.0;
  events.reserve(static_cast<std::size_t>(config.rate * (config.duration - start) * 1.1) + 16);
  double t = start;
  for (;;) {
    double g = gap(arrivals);
    while (g <= 0.0) g = gap(arrivals);
    t += g;
    if (t >= config.duration) break;
    events.push_back({t, config.spectrum.sample(amplitudes)});
  }
  return events;
}

Simulation simulate(const SimConfig& config) {
  Simulation sim;
  sim.events = sample_events(config);
  sim.clean = synthesize(sim.events, config.shape, sample_count(config), config.dt, 0.0);
  sim.noisy = add_noise(sim.clean, config.sigma, derive_seed(config.seed, stream::noise));
  return sim;
}

}  // namespace pulsekit
