#include "pulsekit/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <unsupported/Eigen/FFT>

namespace pulsekit {

namespace {

// Smallest 2^i 3^j 5^k >= n; the FFT handles these radices directly.
std::size_t smooth_size(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p5 = 1; p5 < best; p5 *= 5) {
    for (std::size_t p35 = p5; p35 < best; p35 *= 3) {
      std::size_t v = p35;
      while (v < n) v <<= 1;
      best = std::min(best, v);
    }
  }
  return best;
}

// Matrix-free truncated convolution with the sampled pulse and its adjoint,
// applied through zero-padded FFTs.
class ConvolutionOperator {
 public:
  ConvolutionOperator(const PulseShape& shape, double dt, std::size_t n)
      : kernel_(sample_kernel(shape, dt, 1e-9)), n_(n) {
    const std::size_t need = n + kernel_.taps.size() + static_cast<std::size_t>(std::abs(kernel_.first));
    nfft_ = smooth_size(need);
    fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    fft_.SetFlag(Eigen::FFT<double>::Unscaled);
    std::vector<double> h(nfft_, 0.0);
    const auto nf = static_cast<std::ptrdiff_t>(nfft_);
    for (std::size_t m = 0; m < kernel_.taps.size(); ++m) {
      std::ptrdiff_t idx = (kernel_.first + static_cast<std::ptrdiff_t>(m)) % nf;
      if (idx < 0) idx += nf;
      h[static_cast<std::size_t>(idx)] += kernel_.taps[m];
    }
    fft_.fwd(H_, h);
    const double scale = 1.0 / static_cast<double>(nfft_);
    for (auto& v : H_) v *= scale;
    Hc_.resize(H_.size());
    for (std::size_t i = 0; i < H_.size(); ++i) Hc_[i] = std::conj(H_[i]);
    buf_.assign(nfft_, 0.0);
  }

  std::size_t size() const { return n_; }
  const SampledKernel& kernel() const { return kernel_; }

  void forward(const std::vector<double>& a, std::vector<double>& out) { apply(a, out, false); }
  void adjoint(const std::vector<double>& r, std::vector<double>& out) { apply(r, out, true); }

 private:
  void apply(const std::vector<double>& x, std::vector<double>& out, bool conjugate) {
    std::fill(buf_.begin(), buf_.end(), 0.0);
    std::copy(x.begin(), x.end(), buf_.begin());
    fft_.fwd(spec_, buf_);
    const auto& h = conjugate ? Hc_ : H_;
    for (std::size_t i = 0; i < spec_.size(); ++i) spec_[i] *= h[i];
    fft_.inv(buf_, spec_, nfft_);
    out.assign(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n_));
  }

  SampledKernel kernel_;
  std::size_t n_;
  std::size_t nfft_{1};
  Eigen::FFT<double> fft_;
  std::vector<std::complex<double>> H_;
  std::vector<std::complex<double>> Hc_;
  std::vector<std::complex<double>> spec_;
  std::vector<double> buf_;
};

double quadratic(const std::vector<double>& y, const std::vector<double>& pa) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - pa[i];
    s += r * r;
  }
  return s;
}

double sum(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s;
}

// Upper estimate of ||P||^2 by power iteration on P^T P, capped by the
// Young's-inequality bound (sum |taps|)^2.
double operator_norm_sq(ConvolutionOperator& op) {
  double l1 = 0.0;
  for (double v : op.kernel().taps) l1 += std::abs(v);
  const double bound = l1 * l1;
  std::vector<double> x(op.size(), 1.0);
  std::vector<double> px;
  std::vector<double> ptpx;
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    double norm = 0.0;
    for (double v : x) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    for (double& v : x) v /= norm;
    op.forward(x, px);
    op.adjoint(px, ptpx);
    double rq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) rq += x[i] * ptpx[i];
    const double prev = lambda;
    lambda = rq;
    x.swap(ptpx);
    if (it > 5 && std::abs(lambda - prev) <= 1e-9 * lambda) break;
  }
  return std::min(bound, 1.05 * lambda);
}

}  // namespace

double sparse_objective(const SampledSignal& signal, const PulseShape& shape,
                        const std::vector<double>& a, double c) {
  ConvolutionOperator op(shape, signal.dt, signal.size());
  std::vector<double> pa;
  op.forward(a, pa);
  return quadratic(signal.values, pa) + c * sum(a);
}

std::vector<double> sparse_gradient(const SampledSignal& signal, const PulseShape& shape,
                                    const std::vector<double>& a) {
  ConvolutionOperator op(shape, signal.dt, signal.size());
  std::vector<double> pa;
  op.forward(a, pa);
  for (std::size_t i = 0; i < pa.size(); ++i) pa[i] -= signal.values[i];
  std::vector<double> g;
  op.adjoint(pa, g);
  for (double& v : g) v *= 2.0;
  return g;
}

double default_regularization(double sigma, std::size_t n, const PulseShape& shape, double dt) {
  const double norm = std::sqrt(sample_kernel(shape, dt).energy());
  const double ln_n = std::log(static_cast<double>(std::max<std::size_t>(n, 2)));
  return 2.0 * sigma * std::sqrt(2.0 * ln_n) * norm;
}

Activations sparse_deconvolve(const SampledSignal& signal, const PulseShape& shape,
                              const SparseOptions& options) {
  validate(signal);
  if (!(options.c >= 0.0)) throw std::invalid_argument("sparse_deconvolve: c must be >= 0");
  if (!(options.tol > 0.0)) throw std::invalid_argument("sparse_deconvolve: tol must be > 0");

  const std::size_t n = signal.size();
  const std::vector<double>& y = signal.values;
  ConvolutionOperator op(shape, signal.dt, n);
  const double L = 2.0 * operator_norm_sq(op);
  const double step = 1.0 / L;
  const double c = options.c;

  Activations act;
  act.dt = signal.dt;
  act.t0 = signal.t0;

  // x: accepted iterate, z: proximal point, w: extrapolated point.
  std::vector<double> x(n, 0.0), x_prev(n, 0.0), z(n), w(n, 0.0);
  std::vector<double> px(n, 0.0), px_prev(n, 0.0), pz(n), pw(n, 0.0);
  std::vector<double> grad(n), resid(n);
  double fx = quadratic(y, px);
  // Residual below 1e-14 of the signal energy counts as an exact fit.
  const double floor = 1e-14 * signal.energy();
  double t = 1.0;
  if (options.record_trace) act.trace.push_back(fx);

  if (signal.energy() == 0.0) {
    act.values = x;
    act.objective = 0.0;
    act.converged = true;
    return act;
  }

  bool plain = true;  // w == x, no momentum
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) resid[i] = pw[i] - y[i];
    op.adjoint(resid, grad);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = std::max(0.0, w[i] - step * (2.0 * grad[i] + c));
    }
    op.forward(z, pz);
    const double fz = quadratic(y, pz) + c * sum(z);

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const bool accept = fz <= fx;
    x_prev.swap(x);
    px_prev.swap(px);
    const double f_before = fx;
    if (accept) {
      x = z;
      px = pz;
      fx = fz;
    } else {
      x = x_prev;
      px = px_prev;
    }
    act.iterations = it;
    if (options.record_trace) act.trace.push_back(fx);

    if (accept) {
      const double dec = f_before - fx;
      if (fx <= floor || dec <= options.tol * f_before) {
        act.converged = true;
        break;
      }
      const double b1 = (t - 1.0) / t_next;
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = x[i] + b1 * (x[i] - x_prev[i]);
        pw[i] = px[i] + b1 * (px[i] - px_prev[i]);
      }
      t = t_next;
      plain = b1 == 0.0;
    } else {
      // A plain proximal step cannot increase the objective in exact
      // arithmetic; failing one means round-off dominates.
      if (plain) {
        act.converged = true;
        break;
      }
      // Objective went up: drop the momentum and take a plain proximal step
      // from the last accepted point next time.
      w = x;
      pw = px;
      t = 1.0;
      plain = true;
    }
  }

  act.values = std::move(x);
  act.objective = fx;
  return act;
}

std::vector<PulseEvent> activations_to_events(const Activations& act, double min_alpha,
                                              std::size_t merge_window) {
  std::vector<PulseEvent> out;
  const auto& a = act.values;
  // Iterates carry round-off residue; entries this far below the largest
  // activation are treated as zero.
  double peak = 0.0;
  for (double v : a) peak = std::max(peak, v);
  const double floor = 1e-6 * peak;
  std::size_t i = 0;
  while (i < a.size()) {
    if (!(a[i] > floor)) {
      ++i;
      continue;
    }
    double mass = 0.0;
    double moment = 0.0;
    std::size_t last = i;
    std::size_t k = i;
    while (k < a.size() && k - last <= merge_window) {
      if (a[k] > floor) {
        mass += a[k];
        moment += a[k] * static_cast<double>(k);
        last = k;
      }
      ++k;
    }
    if (mass >= min_alpha) out.push_back({act.t0 + moment / mass * act.dt, mass});
    i = last + 1;
  }
  return out;
}

}  // namespace pulsekit
