#include "pulsekit/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pulsekit/detect.hpp"
#include "pulsekit/shaping.hpp"

namespace pulsekit {

namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kInvPhi = 0.6180339887498949;

// Evaluates pulse columns against a signal; the support bound keeps each
// column evaluation proportional to the pulse length.
class ColumnModel {
 public:
  ColumnModel(const SampledSignal& signal, const PulseShape& shape)
      : signal_(signal), shape_(shape), y_(Eigen::Map<const Eigen::VectorXd>(
                                            signal.values.data(),
                                            static_cast<Eigen::Index>(signal.values.size()))) {
    support_hi_ = shape.is_double_exp()
                      ? support_end(shape, 1e-18)
                      : shape.as_tabulated().t_start +
                            static_cast<double>(shape.as_tabulated().samples.size()) *
                                shape.as_tabulated().dt;
    support_lo_ = shape.is_double_exp() ? 0.0 : shape.as_tabulated().t_start;
  }

  void column(double tau, Eigen::Ref<Eigen::VectorXd> out) const {
    out.setZero();
    const double dt = signal_.dt;
    const auto last = static_cast<double>(signal_.size()) - 1.0;
    const double lo = std::floor((tau + support_lo_ - signal_.t0) / dt);
    const double hi = std::ceil((tau + support_hi_ - signal_.t0) / dt);
    if (hi < 0.0 || lo > last) return;
    const auto k0 = static_cast<Eigen::Index>(std::max(lo, 0.0));
    const auto k1 = static_cast<Eigen::Index>(std::min(hi, last));
    for (Eigen::Index k = k0; k <= k1; ++k) {
      out[k] = eval_pulse(shape_, signal_.time_at(static_cast<std::size_t>(k)) - tau);
    }
  }

  AmplitudeSolution solve(std::span<const double> taus) const {
    const auto n = y_.size();
    const auto m = static_cast<Eigen::Index>(taus.size());
    AmplitudeSolution sol;
    if (m == 0) {
      sol.rss = y_.squaredNorm();
      return sol;
    }
    Eigen::MatrixXd A(n, m);
    for (Eigen::Index j = 0; j < m; ++j) column(taus[static_cast<std::size_t>(j)], A.col(j));
    const Eigen::MatrixXd G = A.transpose() * A;
    const Eigen::VectorXd b = A.transpose() * y_;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double lmax = lam.maxCoeff();
    const double lmin = lam.minCoeff();
    if (!(lmax > 0.0) || !(lmin > 0.0) || lmax / lmin > kMaxCondition) {
      throw DegeneratePlacement("degenerate placement: pulse columns are nearly dependent");
    }
    const Eigen::VectorXd alpha =
        eig.eigenvectors() * (eig.eigenvectors().transpose() * b).cwiseQuotient(lam);
    sol.alphas.assign(alpha.data(), alpha.data() + m);
    sol.rss = (y_ - A * alpha).squaredNorm();
    return sol;
  }

  double rss_or_inf(std::span<const double> taus) const {
    try {
      return solve(taus).rss;
    } catch (const DegeneratePlacement&) {
      return std::numeric_limits<double>::infinity();
    }
  }

 private:
  const SampledSignal& signal_;
  const PulseShape& shape_;
  Eigen::Map<const Eigen::VectorXd> y_;
  double support_lo_{0.0};
  double support_hi_{0.0};
};

template <class F>
double golden_section(F&& f, double lo, double hi, double tol, double& fbest) {
  double c = hi - kInvPhi * (hi - lo);
  double d = lo + kInvPhi * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  while (hi - lo > tol) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kInvPhi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kInvPhi * (hi - lo);
      fd = f(d);
    }
  }
  if (fc <= fd) {
    fbest = fc;
    return c;
  }
  fbest = fd;
  return d;
}

// Arrival time of the strongest matched-filter response in the residual of
// the current model, avoiding existing arrival times.
std::optional<double> strongest_residual_peak(const SampledSignal& signal, const PulseShape& shape,
                                              const ColumnModel& model,
                                              const std::vector<double>& taus) {
  std::vector<PulseEvent> current;
  if (!taus.empty()) {
    const AmplitudeSolution sol = model.solve(taus);
    for (std::size_t j = 0; j < taus.size(); ++j) current.push_back({taus[j], sol.alphas[j]});
  }
  const SampledSignal res = residual(signal, shape, current);
  const ShapedSignal mf = matched_filter(res, shape);
  std::optional<double> best;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < mf.signal.size(); ++k) {
    const double t = mf.signal.time_at(k);
    const bool taken = std::any_of(taus.begin(), taus.end(),
                                   [&](double x) { return std::abs(x - t) < 0.5 * signal.dt; });
    if (taken) continue;
    if (mf.signal.values[k] > best_val) {
      best_val = mf.signal.values[k];
      best = t;
    }
  }
  return best;
}

std::vector<double> initial_taus(const SampledSignal& signal, const PulseShape& shape,
                                 const ColumnModel& model, std::size_t n) {
  const ShapedSignal mf = matched_filter(signal, shape);
  std::vector<PulseEvent> peaks =
      detect_peaks(mf.signal, -std::numeric_limits<double>::infinity(), 1, mf.group_delay,
                   mf.unit_gain);
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const PulseEvent& x, const PulseEvent& y) { return x.alpha > y.alpha; });
  std::vector<double> taus;
  for (const auto& p : peaks) {
    if (taus.size() == n) break;
    taus.push_back(p.tau);
  }
  std::sort(taus.begin(), taus.end());
  while (taus.size() < n) {
    const auto t = strongest_residual_peak(signal, shape, model, taus);
    if (!t) break;
    taus.insert(std::upper_bound(taus.begin(), taus.end(), *t), *t);
  }
  return taus;
}

}  // namespace

AmplitudeSolution solve_amplitudes(const SampledSignal& signal, const PulseShape& shape,
                                   std::span<const double> taus) {
  validate(signal);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    for (std::size_t j = i + 1; j < taus.size(); ++j) {
      if (taus[i] == taus[j]) throw DegeneratePlacement("degenerate placement: repeated tau");
    }
  }
  return ColumnModel(signal, shape).solve(taus);
}

FitResult fit_pulses(const SampledSignal& signal, const PulseShape& shape, std::size_t n,
                     std::optional<std::vector<double>> init, const FitOptions& options) {
  validate(signal);
  FitResult result;
  result.n_samples = signal.size();
  if (2 * n > signal.size()) throw std::invalid_argument("overparameterized: too many pulses for the window");
  if (init && init->size() != n) throw std::invalid_argument("fit_pulses: init must have n entries");

  const ColumnModel model(signal, shape);
  if (n == 0 && !options.phantom) {
    result.rss = signal.energy();
    result.converged = true;
    return result;
  }

  const double dt = signal.dt;
  const double t_peak = pulse_peak(shape).time;
  const double t_first = signal.t0;
  const double t_last = signal.time_at(signal.size() - 1);
  const double global_lo = t_first - std::max(t_peak, dt);
  const double global_hi = t_last - 0.5 * dt;
  const double min_gap = 1e-3 * dt;
  const double bracket = std::max(t_peak, 2.0 * dt);
  const double tol = 1e-9 * dt;

  std::vector<double> taus = init ? *init : initial_taus(signal, shape, model, n);
  std::sort(taus.begin(), taus.end());
  if (taus.size() < n) throw std::runtime_error("fit_pulses: could not initialize arrival times");
  for (double& t : taus) t = std::clamp(t, global_lo, global_hi);

  // Layout of the parameter vector: optional phantom first, then the events.
  const std::size_t off = options.phantom ? 1 : 0;
  std::vector<double> params(off + n);
  const double width = support_end(shape, kKernelTruncation);
  const double phantom_lo = t_first - width;
  const double phantom_hi = t_first - 0.5 * dt;
  if (options.phantom) params[0] = t_first - t_peak;
  std::copy(taus.begin(), taus.end(), params.begin() + static_cast<std::ptrdiff_t>(off));

  double rss = model.rss_or_inf(params);
  const double abs_floor = 1e-24 * std::max(signal.energy(), std::numeric_limits<double>::min());

  std::vector<double> trial = params;
  for (std::size_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    const double before = rss;
    for (std::size_t j = 0; j < params.size(); ++j) {
      double lo;
      double hi;
      if (options.phantom && j == 0) {
        lo = phantom_lo;
        hi = phantom_hi;
      } else {
        lo = std::max(params[j] - bracket, j > off ? params[j - 1] + min_gap : global_lo);
        hi = std::min(params[j] + bracket, j + 1 < params.size() ? params[j + 1] - min_gap : global_hi);
      }
      if (!(hi > lo)) continue;
      trial = params;
      auto f = [&](double x) {
        trial[j] = x;
        return model.rss_or_inf(trial);
      };
      double fx = 0.0;
      const double x = golden_section(f, lo, hi, tol, fx);
      if (fx < rss) {
        params[j] = x;
        rss = fx;
      }
    }
    result.iterations = sweep;
    if (before - rss <= options.rel_tol * rss + abs_floor) {
      result.converged = true;
      break;
    }
  }

  const AmplitudeSolution sol = model.solve(params);
  if (options.phantom) result.phantom = PulseEvent{params[0], sol.alphas[0]};
  for (std::size_t j = off; j < params.size(); ++j) result.events.push_back({params[j], sol.alphas[j]});
  result.rss = sol.rss;
  return result;
}

FitResult fit_single_pulse(const SampledSignal& signal, const PulseShape& shape, double tau_lo,
                           double tau_hi) {
  validate(signal);
  if (!(tau_hi > tau_lo)) throw std::invalid_argument("fit_single_pulse: empty tau bracket");
  const ColumnModel model(signal, shape);
  FitResult result;
  result.n_samples = signal.size();
  double t = 0.0;
  auto f = [&](double x) {
    t = x;
    return model.rss_or_inf(std::span<const double>(&t, 1));
  };
  double fx = 0.0;
  const double x = golden_section(f, tau_lo, tau_hi, 1e-9 * signal.dt, fx);
  if (!std::isfinite(fx)) return result;  // converged stays false
  t = x;
  const AmplitudeSolution sol = model.solve(std::span<const double>(&t, 1));
  result.events.push_back({x, sol.alphas[0]});
  result.rss = sol.rss;
  result.converged = std::isfinite(sol.alphas[0]);
  result.iterations = 1;
  return result;
}

OrderSelection select_order(const SampledSignal& signal, const PulseShape& shape, double sigma,
                            std::size_t n_max) {
  validate(signal);
  if (!(sigma > 0.0)) throw std::invalid_argument("select_order: sigma must be > 0");
  const ColumnModel model(signal, shape);
  const double n = static_cast<double>(signal.size());
  const double var = sigma * sigma;

  OrderSelection sel;
  std::optional<FitResult> best;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<double> taus;
  std::size_t failures = 0;

  for (std::size_t order = 0; order <= n_max; ++order) {
    FitResult fit;
    try {
      if (order > 0) {
        const auto t = strongest_residual_peak(signal, shape, model, taus);
        if (!t) break;
        taus.insert(std::upper_bound(taus.begin(), taus.end(), *t), *t);
      }
      fit = fit_pulses(signal, shape, order, taus);
    } catch (const std::exception&) {
      ++failures;
      break;
    }
    taus.clear();
    for (const auto& e : fit.events) taus.push_back(e.tau);

    const bool ok = std::all_of(fit.events.begin(), fit.events.end(),
                                [&](const PulseEvent& e) { return e.alpha >= 3.0 * sigma; });
    sel.rss_by_order.push_back(fit.rss);
    sel.admissible.push_back(ok);
    if (!ok) continue;
    const double score = std::abs(fit.rss - var * (n - 2.0 * static_cast<double>(order)));
    if (score < best_score) {
      best_score = score;
      best = fit;
      sel.order = order;
    }
  }
  if (!best) throw std::runtime_error("select_order: no admissible fit");
  sel.fit = std::move(*best);
  return sel;
}

std::vector<PulseEvent> drop_weak(std::span<const PulseEvent> events, double min_alpha) {
  std::vector<PulseEvent> out;
  for (const auto& e : events) {
    if (e.alpha >= min_alpha) out.push_back(e);
  }
  return out;
}

SampledSignal residual(const SampledSignal& signal, const PulseShape& shape,
                       std::span<const PulseEvent> events) {
  SampledSignal out = signal;
  if (events.empty() || signal.size() == 0) return out;
  const SampledSignal model = synthesize(events, shape, signal.size(), signal.dt, signal.t0);
  for (std::size_t k = 0; k < out.size(); ++k) out.values[k] -= model.values[k];
  return out;
}

}  // namespace pulsekit
