#include "pulsekit/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <unsupported/Eigen/FFT>

namespace pulsekit {

namespace {

constexpr double kNormTol = 1e-9;

double uniform_width(const Histogram& h) {
  const double w = h.edges[1] - h.edges[0];
  for (std::size_t i = 1; i + 1 < h.edges.size(); ++i) {
    if (std::abs((h.edges[i + 1] - h.edges[i]) - w) > 1e-9 * w) {
      throw std::invalid_argument("pile-up model requires uniform bins");
    }
  }
  return w;
}

// h * h on the same grid. A pair of bins (i, j) contributes to the bin that
// contains the sum of their centers; pairs involving out-of-range mass stay
// out of range.
Histogram self_convolve(const Histogram& h) {
  const double w = uniform_width(h);
  const auto offset = static_cast<std::ptrdiff_t>(std::floor(h.edges[0] / w + 1.0 + 1e-9));
  const auto nb = static_cast<std::ptrdiff_t>(h.bins());
  Histogram out{h.edges, std::vector<double>(h.bins(), 0.0), 0.0, 0.0};
  for (std::ptrdiff_t i = 0; i < nb; ++i) {
    const double mi = h.masses[static_cast<std::size_t>(i)];
    if (mi == 0.0) continue;
    for (std::ptrdiff_t j = 0; j < nb; ++j) {
      const double mj = h.masses[static_cast<std::size_t>(j)];
      if (mj == 0.0) continue;
      const std::ptrdiff_t s = i + j + offset;
      if (s < 0) {
        out.underflow += mi * mj;
      } else if (s >= nb) {
        out.overflow += mi * mj;
      } else {
        out.masses[static_cast<std::size_t>(s)] += mi * mj;
      }
    }
  }
  const double in = h.in_range_mass();
  out.underflow += h.underflow * (2.0 * in + 2.0 * h.overflow + h.underflow);
  out.overflow += h.overflow * (2.0 * in + h.overflow);
  return out;
}

void check_pileup_args(double rate, double window) {
  if (!(rate >= 0.0) || !(window >= 0.0)) {
    throw std::invalid_argument("pile-up model requires rate >= 0 and window >= 0");
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

double Histogram::in_range_mass() const {
  double s = 0.0;
  for (double m : masses) s += m;
  return s;
}

double Histogram::total() const { return in_range_mass() + underflow + overflow; }

double Histogram::mean() const {
  double s = 0.0;
  double w = 0.0;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    s += masses[i] * center(i);
    w += masses[i];
  }
  return w > 0.0 ? s / w : 0.0;
}

bool Histogram::is_normalized(double tol) const { return std::abs(total() - 1.0) <= tol; }

void validate(const Histogram& h) {
  if (h.edges.size() < 2) throw std::invalid_argument("histogram needs at least two edges");
  if (h.masses.size() + 1 != h.edges.size()) {
    throw std::invalid_argument("histogram masses do not match edges");
  }
  for (std::size_t i = 0; i + 1 < h.edges.size(); ++i) {
    if (!(h.edges[i + 1] > h.edges[i])) throw std::invalid_argument("histogram edges must increase");
  }
  for (double m : h.masses) {
    if (!(m >= 0.0)) throw std::invalid_argument("histogram masses must be non-negative");
  }
}

Histogram normalized(const Histogram& h) {
  Histogram out = h;
  const double t = h.total();
  if (!(t > 0.0)) throw std::invalid_argument("cannot normalize an empty histogram");
  for (double& m : out.masses) m /= t;
  out.underflow /= t;
  out.overflow /= t;
  return out;
}

std::vector<double> centered_edges(double width, std::size_t bins) {
  if (!(width > 0.0) || bins == 0) throw std::invalid_argument("centered_edges: bad grid");
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) e[i] = (static_cast<double>(i) - 0.5) * width;
  return e;
}

Histogram estimate_histogram(std::span<const double> amplitudes, std::span<const double> edges) {
  Histogram h{std::vector<double>(edges.begin(), edges.end()),
              std::vector<double>(edges.size() > 0 ? edges.size() - 1 : 0, 0.0), 0.0, 0.0};
  validate(h);
  for (double a : amplitudes) {
    if (a < h.edges.front()) {
      h.underflow += 1.0;
    } else if (a >= h.edges.back()) {
      h.overflow += 1.0;
    } else {
      const auto it = std::upper_bound(h.edges.begin(), h.edges.end(), a);
      h.masses[static_cast<std::size_t>(it - h.edges.begin()) - 1] += 1.0;
    }
  }
  return h;
}

Histogram pileup_forward(const Histogram& h, double rate, double window) {
  validate(h);
  check_pileup_args(rate, window);
  if (!h.is_normalized(kNormTol)) throw std::invalid_argument("pileup_forward: histogram must be normalized");
  const double q = -std::expm1(-rate * window);
  if (q == 0.0) return h;
  const Histogram conv = self_convolve(h);
  Histogram out = h;
  for (std::size_t i = 0; i < out.bins(); ++i) out.masses[i] = (1.0 - q) * h.masses[i] + q * conv.masses[i];
  out.underflow = (1.0 - q) * h.underflow + q * conv.underflow;
  out.overflow = (1.0 - q) * h.overflow + q * conv.overflow;
  return normalized(out);
}

PileupCorrection pileup_correct(const Histogram& measured, double rate, double window,
                                std::size_t iters) {
  validate(measured);
  check_pileup_args(rate, window);
  if (iters < 1) throw std::invalid_argument("pileup_correct: iters must be >= 1");
  const double q = -std::expm1(-rate * window);
  if (!std::isfinite(q) || q >= 1.0) throw std::runtime_error("saturation: rate * window too large");

  const Histogram m = normalized(measured);
  PileupCorrection result{m, 0.0};
  if (q == 0.0) return result;

  Histogram a = m;
  auto step = [q](double meas, double conv) { return std::max(0.0, (meas - q * conv) / (1.0 - q)); };
  for (std::size_t it = 0; it < iters; ++it) {
    const Histogram conv = self_convolve(a);
    Histogram next = a;
    for (std::size_t i = 0; i < next.bins(); ++i) next.masses[i] = step(m.masses[i], conv.masses[i]);
    next.underflow = step(m.underflow, conv.underflow);
    next.overflow = step(m.overflow, conv.overflow);
    if (next.total() > 0.0) next = normalized(next);
    double l1 = std::abs(next.underflow - a.underflow) + std::abs(next.overflow - a.overflow);
    for (std::size_t i = 0; i < next.bins(); ++i) l1 += std::abs(next.masses[i] - a.masses[i]);
    result.residual_l1 = l1;
    a = std::move(next);
  }
  result.corrected = std::move(a);
  return result;
}

DecompoundResult decompound_areas(std::span<const double> areas, double rate, double interval_len,
                                  double pulse_area, const AmplitudeGrid& grid,
                                  const DecompoundOptions& options) {
  using namespace std::complex_literals;
  const double mu = rate * interval_len;
  if (!(mu > 0.0)) throw std::invalid_argument("decompound: rate * interval_len must be > 0");
  if (mu > 20.0) throw std::runtime_error("too many pulses per interval (rate * interval_len > 20)");
  if (!(pulse_area > 0.0)) throw std::invalid_argument("decompound: pulse_area must be > 0");
  if (areas.empty()) throw std::invalid_argument("decompound: no interval areas");
  if (!(grid.bin_width > 0.0) || grid.bins < 2) throw std::invalid_argument("decompound: bad grid");

  const std::size_t N = areas.size();
  std::vector<double> s(N);
  double s_max = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    if (!std::isfinite(areas[j])) throw std::runtime_error("decompound: non-finite area");
    s[j] = areas[j] / pulse_area;
    s_max = std::max(s_max, std::abs(s[j]));
  }

  const std::size_t M = next_pow2(2 * grid.bins);
  const std::size_t half = M / 2;
  const double d_omega = 2.0 * std::numbers::pi / (static_cast<double>(M) * grid.bin_width);
  // Sub-steps between grid frequencies keep the phase increments small
  // enough to unwrap the logarithm continuously.
  const auto sub = static_cast<std::size_t>(
      std::max(1.0, std::ceil(d_omega * std::max(s_max, 1.0) / (0.25 * std::numbers::pi))));
  const std::size_t fine_count = half * sub + 1;
  const double fine_step = d_omega / static_cast<double>(sub);

  std::vector<std::complex<double>> cf(fine_count, 0.0);
  for (std::size_t j = 0; j < N; ++j) {
    const std::complex<double> rot = std::exp(1i * (fine_step * s[j]));
    std::complex<double> z = 1.0;
    for (std::size_t f = 0; f < fine_count; ++f) {
      cf[f] += z;
      z *= rot;
      if ((f & 63) == 63) z /= std::abs(z);
    }
  }
  for (auto& v : cf) v /= static_cast<double>(N);
  if (std::abs(cf[0] - 1.0) > 1e-9) throw std::runtime_error("decompound: malformed areas (cf(0) != 1)");

  const double eps = 4.0 / std::sqrt(static_cast<double>(N));
  const double noise_var_s = options.noise_sigma * options.noise_sigma * interval_len *
                             options.dt / (pulse_area * pulse_area);

  DecompoundResult out;
  out.mu = mu;
  out.cf_cutoff = eps;
  std::vector<std::complex<double>> phi_alpha(M, 0.0);
  double unwrapped = 0.0;
  double prev_arg = 0.0;
  bool alive = true;
  double noise_var_bins = 0.0;
  for (std::size_t f = 0; f < fine_count; ++f) {
    const double omega = fine_step * static_cast<double>(f);
    const double mag = std::abs(cf[f]);
    const double noise_cf = std::exp(-0.5 * omega * omega * noise_var_s);
    if (alive && (mag < eps || noise_cf < eps)) alive = false;
    if (alive) {
      const double arg = std::arg(cf[f]);
      double delta = arg - prev_arg;
      delta -= 2.0 * std::numbers::pi * std::round(delta / (2.0 * std::numbers::pi));
      unwrapped += delta;
      prev_arg = arg;
    }
    if (f % sub != 0) continue;
    const std::size_t m = f / sub;
    out.omega.push_back(omega);
    out.cf_magnitude.push_back(mag);
    out.cf_used.push_back(alive);
    if (!alive) continue;
    const std::complex<double> log_s{std::log(mag) + 0.5 * omega * omega * noise_var_s, unwrapped};
    const std::complex<double> pa = 1.0 + log_s / mu;
    const double var_m = 1.0 / (static_cast<double>(N) * mu * mu * mag * mag);
    if (m == 0) {
      phi_alpha[0] = pa.real();
      noise_var_bins += 0.5 * var_m;
    } else if (m == half) {
      phi_alpha[m] = pa.real();
      noise_var_bins += 0.5 * var_m;
    } else {
      phi_alpha[m] = pa;
      phi_alpha[M - m] = std::conj(pa);
      noise_var_bins += var_m;
    }
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> dens;
  fft.fwd(dens, phi_alpha);
  const double bin_noise = std::sqrt(noise_var_bins) / static_cast<double>(M);
  const double floor = options.noise_floor > 0.0 ? options.noise_floor * bin_noise : 0.0;

  Histogram h{centered_edges(grid.bin_width, grid.bins), std::vector<double>(grid.bins, 0.0), 0.0, 0.0};
  // Bin 0 holds pulses of zero amplitude, i.e. no pulse; it is not part of
  // the amplitude spectrum.
  for (std::size_t k = 1; k < grid.bins; ++k) {
    const double v = dens[k].real() / static_cast<double>(M);
    h.masses[k] = v > floor ? v : 0.0;
  }
  const double total = h.in_range_mass();
  if (!(total > 1e-12)) {
    out.empty = true;
    std::fill(h.masses.begin(), h.masses.end(), 0.0);
  } else {
    h = normalized(h);
  }
  out.spectrum = std::move(h);
  return out;
}

std::vector<double> interval_areas(const SampledSignal& signal, double interval_len,
                                   double quiet_threshold) {
  validate(signal);
  if (!(interval_len > 0.0)) throw std::invalid_argument("interval_areas: interval length must be > 0");
  if (!(quiet_threshold > 0.0)) throw std::invalid_argument("interval_areas: quiet threshold must be > 0");
  const auto len = static_cast<std::size_t>(std::max<long long>(1, std::llround(interval_len / signal.dt)));
  const auto& v = signal.values;
  std::vector<double> out;
  std::size_t j = 0;
  while (j + len < v.size()) {
    if (std::abs(v[j]) < quiet_threshold && std::abs(v[j + len]) < quiet_threshold) {
      double area = 0.5 * (v[j] + v[j + len]);
      for (std::size_t k = j + 1; k < j + len; ++k) area += v[k];
      out.push_back(area * signal.dt);
      j += len;
    } else {
      ++j;
    }
  }
  return out;
}

double total_variation(const Histogram& h1, const Histogram& h2) {
  if (h1.edges != h2.edges) throw std::invalid_argument("total_variation: histograms differ in edges");
  double s = std::abs(h1.underflow - h2.underflow) + std::abs(h1.overflow - h2.overflow);
  for (std::size_t i = 0; i < h1.bins(); ++i) s += std::abs(h1.masses[i] - h2.masses[i]);
  return 0.5 * s;
}

}  // namespace pulsekit
