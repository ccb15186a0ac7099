#include "pulsekit/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "pulsekit/detect.hpp"
#include "pulsekit/fit.hpp"
#include "pulsekit/random.hpp"
#include "pulsekit/shaping.hpp"
#include "pulsekit/sparse.hpp"

namespace pulsekit {

namespace {

class StageTimer {
 public:
  explicit StageTimer(std::map<std::string, double>* sink) : sink_(sink) {}
  void mark(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    if (sink_) (*sink_)[stage] += std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
  }

 private:
  std::map<std::string, double>* sink_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

MetricSummary summarize(const std::vector<double>& xs) {
  MetricSummary s;
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - s.mean) * (x - s.mean);
  s.std = xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0;
  return s;
}

Histogram amplitude_histogram(std::span<const PulseEvent> events, const MethodConfig& m) {
  std::vector<double> amps;
  amps.reserve(events.size());
  for (const auto& e : events) amps.push_back(e.alpha);
  const auto edges = centered_edges(m.hist_bin_width, m.hist_bins);
  return estimate_histogram(amps, edges);
}

BenchReport run_trial(const SweepPoint& point, std::size_t point_index, std::size_t trial,
                      const SweepOptions& options) {
  BenchReport rep;
  rep.point = point_index;
  rep.trial = trial;
  rep.seed = trial_seed(options.base_seed, point_index, trial);
  rep.config = point;
  rep.config.sim.seed = rep.seed;
  auto* timing = options.record_timing ? &rep.runtime_ms : nullptr;
  try {
    StageTimer timer(timing);
    const Simulation sim = simulate(rep.config.sim);
    timer.mark("simulate");
    const auto estimated = run_chain(sim.noisy, rep.config.sim, point.method, timing);
    timer = StageTimer(timing);
    const Matching matching = match_events(sim.events, estimated, point.method.time_tol);
    rep.scores = score(sim.events, estimated, matching);
    if (!sim.events.empty() && !estimated.empty()) {
      const Histogram ht = amplitude_histogram(sim.events, point.method);
      const Histogram he = amplitude_histogram(estimated, point.method);
      if (ht.in_range_mass() > 0.0 && he.in_range_mass() > 0.0) {
        Histogram nt = ht;
        Histogram ne = he;
        nt.underflow = nt.overflow = ne.underflow = ne.overflow = 0.0;
        rep.spectrum_w1 = spectrum_distance(normalized(nt), normalized(ne));
      }
    }
    timer.mark("score");
  } catch (const std::exception& e) {
    rep.error = e.what();
  }
  return rep;
}

}  // namespace

Matching match_events(std::span<const PulseEvent> truth, std::span<const PulseEvent> estimated,
                      double time_tol) {
  if (!(time_tol >= 0.0)) throw std::invalid_argument("match_events: time_tol must be >= 0");
  struct Pair {
    double gap;
    std::size_t t;
    std::size_t e;
  };
  std::vector<std::size_t> est_order(estimated.size());
  std::iota(est_order.begin(), est_order.end(), std::size_t{0});
  std::sort(est_order.begin(), est_order.end(),
            [&](std::size_t a, std::size_t b) { return estimated[a].tau < estimated[b].tau; });

  std::vector<Pair> pairs;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const double tau = truth[t].tau;
    auto lo = std::lower_bound(est_order.begin(), est_order.end(), tau - time_tol,
                               [&](std::size_t e, double v) { return estimated[e].tau < v; });
    for (auto it = lo; it != est_order.end() && estimated[*it].tau <= tau + time_tol; ++it) {
      const double gap = std::abs(estimated[*it].tau - tau);
      if (gap <= time_tol) pairs.push_back({gap, t, *it});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.gap != b.gap) return a.gap < b.gap;
    if (a.t != b.t) return a.t < b.t;
    return a.e < b.e;
  });
  std::vector<bool> used_t(truth.size(), false);
  std::vector<bool> used_e(estimated.size(), false);
  Matching out;
  for (const Pair& p : pairs) {
    if (used_t[p.t] || used_e[p.e]) continue;
    used_t[p.t] = used_e[p.e] = true;
    out.emplace_back(p.t, p.e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Scores score(std::span<const PulseEvent> truth, std::span<const PulseEvent> estimated,
             const Matching& matching) {
  Scores s;
  s.n_truth = truth.size();
  s.n_estimated = estimated.size();
  s.n_matched = matching.size();
  const auto m = static_cast<double>(matching.size());
  if (estimated.empty()) {
    s.precision = truth.empty() ? 1.0 : 0.0;
  } else {
    s.precision = m / static_cast<double>(estimated.size());
  }
  if (truth.empty()) {
    s.recall = estimated.empty() ? 1.0 : 0.0;
  } else {
    s.recall = m / static_cast<double>(truth.size());
  }
  s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  if (!matching.empty()) {
    double st = 0.0;
    double sa = 0.0;
    for (const auto& [t, e] : matching) {
      const double dt = estimated[e].tau - truth[t].tau;
      const double da = estimated[e].alpha - truth[t].alpha;
      st += dt * dt;
      sa += da * da;
    }
    s.tau_rmse = std::sqrt(st / m);
    s.alpha_rmse = std::sqrt(sa / m);
  }
  return s;
}

double spectrum_distance(const Histogram& h1, const Histogram& h2) {
  if (h1.edges != h2.edges) throw std::invalid_argument("spectrum_distance: mismatched edges");
  validate(h1);
  validate(h2);
  if (!h1.is_normalized(1e-9) || !h2.is_normalized(1e-9)) {
    throw std::invalid_argument("spectrum_distance: histograms must be normalized");
  }
  double c1 = h1.underflow;
  double c2 = h2.underflow;
  double w1 = 0.0;
  for (std::size_t i = 0; i + 1 < h1.bins(); ++i) {
    c1 += h1.masses[i];
    c2 += h2.masses[i];
    w1 += std::abs(c1 - c2) * (h1.center(i + 1) - h1.center(i));
  }
  return w1;
}

void validate(const MethodConfig& m) {
  static const std::vector<std::string> chains{"matched", "trapezoid", "wiener", "peel", "fit", "sparse"};
  if (std::find(chains.begin(), chains.end(), m.chain) == chains.end()) {
    throw std::invalid_argument("unknown detection chain '" + m.chain + "'");
  }
  if (m.min_separation < 1) throw std::invalid_argument("min_separation must be >= 1");
  if (!(m.time_tol >= 0.0)) throw std::invalid_argument("time_tol must be >= 0");
  if (m.rise < 1 || m.flat < 0) throw std::invalid_argument("trapezoid needs rise >= 1, flat >= 0");
  if (!(m.hist_bin_width > 0.0) || m.hist_bins == 0) throw std::invalid_argument("bad histogram grid");
}

namespace {

// Per-sample power of the impulse train implied by the simulation config.
std::optional<double> impulse_prior(const SimConfig& sim) {
  double per_sample = 0.0;
  if (sim.fixed_events) {
    if (sim.fixed_events->empty()) return std::nullopt;
    double sq = 0.0;
    for (const auto& e : *sim.fixed_events) sq += e.alpha * e.alpha;
    per_sample = sq / static_cast<double>(std::max<std::size_t>(sample_count(sim), 1));
  } else {
    per_sample = sim.rate * sim.dt * sim.spectrum.second_moment();
  }
  if (!(per_sample > 0.0)) return std::nullopt;
  return per_sample;
}

}  // namespace

std::vector<PulseEvent> run_chain(const SampledSignal& observed, const SimConfig& sim,
                                  const MethodConfig& method,
                                  std::map<std::string, double>* runtime_ms) {
  validate(method);
  const PulseShape& shape = sim.shape;
  const double sigma = sim.sigma;
  StageTimer timer(runtime_ms);

  if (method.chain == "matched") {
    const ShapedSignal mf = matched_filter(observed, shape);
    timer.mark("shape");
    auto ev = detect_peaks(mf.signal, method.threshold * mf.unit_gain, method.min_separation,
                           mf.group_delay, mf.unit_gain);
    if (method.refine) ev = refine_matched_peaks(mf, shape, std::move(ev));
    timer.mark("detect");
    return ev;
  }
  if (method.chain == "trapezoid") {
    double decay = 0.0;
    if (method.decay) {
      decay = *method.decay;
    } else if (shape.is_double_exp()) {
      decay = 1.0 / (shape.as_double_exp().a * observed.dt);
    } else {
      throw std::invalid_argument("trapezoid chain needs an explicit decay for tabulated pulses");
    }
    const ShapedSignal tr = trapezoid_filter(observed, decay, method.rise, method.flat);
    const TrapezoidResponse resp = trapezoid_response(shape, observed.dt, decay, method.rise, method.flat);
    timer.mark("shape");
    auto ev = detect_peaks(tr.signal, method.threshold * resp.gain, method.min_separation, resp.delay,
                           resp.gain);
    timer.mark("detect");
    return ev;
  }
  if (method.chain == "wiener") {
    const double np = method.noise_power.value_or(std::max(sigma * sigma, 1e-9));
    const auto prior = method.prior_power ? method.prior_power : impulse_prior(sim);
    const ShapedSignal w = wiener_filter(observed, shape, np, prior);
    timer.mark("shape");
    auto ev = detect_peaks(w.signal, method.threshold * w.unit_gain, method.min_separation,
                           w.group_delay, w.unit_gain);
    timer.mark("detect");
    return ev;
  }
  if (method.chain == "peel") {
    const double level = method.threshold * pulse_peak(shape).amplitude;
    PeelResult pr = peel(observed, shape, level, method.max_pulses);
    timer.mark("detect");
    std::sort(pr.events.begin(), pr.events.end(),
              [](const PulseEvent& a, const PulseEvent& b) { return a.tau < b.tau; });
    return pr.events;
  }
  if (method.chain == "fit") {
    const OrderSelection sel = select_order(observed, shape, std::max(sigma, 1e-9), method.n_max);
    timer.mark("detect");
    return sel.fit.events;
  }
  // sparse
  SparseOptions opts;
  opts.c = method.c.value_or(default_regularization(sigma, observed.size(), shape, observed.dt));
  opts.max_iter = method.sparse_max_iter;
  const Activations act = sparse_deconvolve(observed, shape, opts);
  timer.mark("shape");
  auto ev = activations_to_events(act, method.min_alpha, method.merge_window);
  timer.mark("detect");
  return ev;
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t point, std::size_t trial) {
  return derive_seed(derive_seed(base_seed, point), trial);
}

SweepResult run_sweep(std::span<const SweepPoint> grid, const SweepOptions& options) {
  if (options.trials < 1) throw std::invalid_argument("run_sweep: trials must be >= 1");
  SweepResult result;
  const std::size_t total = grid.size() * options.trials;
  result.reports.resize(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < total; i = next++) {
      const std::size_t p = i / options.trials;
      const std::size_t t = i % options.trials;
      result.reports[i] = run_trial(grid[p], p, t, options);
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(total, 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  for (std::size_t p = 0; p < grid.size(); ++p) {
    PointSummary s;
    s.point = p;
    s.trials = options.trials;
    std::vector<double> prec, rec, f1, trm, arm, w1;
    for (std::size_t t = 0; t < options.trials; ++t) {
      const BenchReport& r = result.reports[p * options.trials + t];
      if (!r.error.empty()) {
        ++s.failures;
        continue;
      }
      prec.push_back(r.scores.precision);
      rec.push_back(r.scores.recall);
      f1.push_back(r.scores.f1);
      trm.push_back(r.scores.tau_rmse);
      arm.push_back(r.scores.alpha_rmse);
      if (r.spectrum_w1) w1.push_back(*r.spectrum_w1);
    }
    s.precision = summarize(prec);
    s.recall = summarize(rec);
    s.f1 = summarize(f1);
    s.tau_rmse = summarize(trm);
    s.alpha_rmse = summarize(arm);
    s.spectrum_w1 = summarize(w1);
    result.summary.push_back(s);
  }
  return result;
}

}  // namespace pulsekit
