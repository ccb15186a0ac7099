#include "pulsekit/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <unsupported/Eigen/FFT>

namespace pulsekit {

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

ShapedSignal matched_filter(const SampledSignal& signal, const PulseShape& shape) {
  validate(signal);
  const SampledKernel kernel = sample_kernel(shape, signal.dt);
  const double energy = kernel.energy();
  if (!(energy > 0.0)) throw std::runtime_error("matched filter: degenerate kernel");

  const auto n = static_cast<std::ptrdiff_t>(signal.size());
  std::vector<double> out(signal.size(), 0.0);
  const double* x = signal.values.data();
  for (std::size_t m = 0; m < kernel.taps.size(); ++m) {
    const double w = kernel.taps[m];
    if (w == 0.0) continue;
    const std::ptrdiff_t shift = kernel.first + static_cast<std::ptrdiff_t>(m);
    // out[k] += w * x[k + shift] for 0 <= k + shift < n.
    const std::ptrdiff_t k0 = std::max<std::ptrdiff_t>(0, -shift);
    const std::ptrdiff_t k1 = std::min<std::ptrdiff_t>(n, n - shift);
    for (std::ptrdiff_t k = k0; k < k1; ++k) out[k] += w * x[k + shift];
  }
  return {SampledSignal{signal.dt, signal.t0, std::move(out)}, 0.0, energy};
}

ShapedSignal trapezoid_filter(const SampledSignal& signal, double decay, int rise_k, int flat_m) {
  validate(signal);
  if (rise_k < 1) throw std::invalid_argument("trapezoid: rise_k must be >= 1");
  if (flat_m < 0) throw std::invalid_argument("trapezoid: flat_m must be >= 0");
  if (!(decay > 0.0) || !std::isfinite(decay)) throw std::invalid_argument("trapezoid: decay must be > 0");

  const auto& v = signal.values;
  const auto n = static_cast<std::ptrdiff_t>(v.size());
  const std::ptrdiff_t k = rise_k;
  const std::ptrdiff_t l = rise_k + flat_m;
  const double M = 1.0 / std::expm1(1.0 / decay);
  const double scale = 1.0 / ((M + 1.0) * static_cast<double>(rise_k));
  auto at = [&](std::ptrdiff_t i) { return i >= 0 ? v[static_cast<std::size_t>(i)] : 0.0; };

  std::vector<double> out(v.size());
  double acc = 0.0;
  double s = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double d = at(i) - at(i - k) - at(i - l) + at(i - l - k);
    acc += d;
    s += acc + M * d;
    out[static_cast<std::size_t>(i)] = s * scale;
  }
  const double delay = (static_cast<double>(rise_k - 1) + 0.5 * flat_m) * signal.dt;
  return {SampledSignal{signal.dt, signal.t0, std::move(out)}, delay, 1.0};
}

TrapezoidResponse trapezoid_response(const PulseShape& shape, double dt, double decay, int rise_k,
                                     int flat_m) {
  const double width = support_end(shape, kKernelTruncation);
  const auto n = static_cast<std::size_t>(std::ceil(width / dt)) +
                 2 * static_cast<std::size_t>(rise_k + flat_m) + 4;
  const PulseEvent unit{0.0, 1.0};
  const SampledSignal pulse = synthesize(std::span(&unit, 1), shape, n, dt, 0.0);
  const ShapedSignal shaped = trapezoid_filter(pulse, decay, rise_k, flat_m);
  const auto& v = shaped.signal.values;
  const double top = *std::max_element(v.begin(), v.end());
  std::size_t first = v.size();
  std::size_t last = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] >= top - 1e-3 * std::abs(top)) {
      first = std::min(first, i);
      last = i;
    }
  }
  return {top, 0.5 * static_cast<double>(first + last) * dt};
}

ShapedSignal wiener_filter(const SampledSignal& signal, const PulseShape& shape,
                           double noise_power, std::optional<double> prior_power) {
  validate(signal);
  if (!(noise_power >= 0.0)) throw std::invalid_argument("wiener: noise_power must be >= 0");
  const SampledKernel kernel = sample_kernel(shape, signal.dt);
  const double prior = prior_power.value_or(kernel.energy());
  if (!(prior > 0.0)) throw std::invalid_argument("wiener: prior power must be > 0");

  const std::size_t nfft = next_pow2(signal.size() + kernel.taps.size());
  const auto nfft_i = static_cast<std::ptrdiff_t>(nfft);

  std::vector<double> h(nfft, 0.0);
  for (std::size_t m = 0; m < kernel.taps.size(); ++m) {
    std::ptrdiff_t idx = (kernel.first + static_cast<std::ptrdiff_t>(m)) % nfft_i;
    if (idx < 0) idx += nfft_i;
    h[static_cast<std::size_t>(idx)] += kernel.taps[m];
  }
  std::vector<double> x(nfft, 0.0);
  std::copy(signal.values.begin(), signal.values.end(), x.begin());

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> P;
  std::vector<std::complex<double>> X;
  fft.fwd(P, h);
  fft.fwd(X, x);

  double pmax = 0.0;
  double pmin = std::numeric_limits<double>::infinity();
  for (const auto& p : P) {
    pmax = std::max(pmax, std::abs(p));
    pmin = std::min(pmin, std::abs(p));
  }
  if (noise_power == 0.0 && pmin < 1e-12 * pmax) {
    throw std::runtime_error("ill-posed inverse: pulse spectrum has zeros and noise_power is 0");
  }

  const double reg = noise_power / prior;
  double zero_lag = 0.0;
  for (std::size_t i = 0; i < nfft; ++i) {
    const std::complex<double> H = std::conj(P[i]) / (std::norm(P[i]) + reg);
    X[i] *= H;
    zero_lag += (H * P[i]).real();
  }
  zero_lag /= static_cast<double>(nfft);

  std::vector<double> y;
  fft.inv(y, X);
  y.resize(signal.size());
  return {SampledSignal{signal.dt, signal.t0, std::move(y)}, 0.0, zero_lag};
}

}  // namespace pulsekit
