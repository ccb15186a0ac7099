#include "pulsekit/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>

#include "pulsekit/fit.hpp"

namespace pulsekit {

namespace {

double crossing_time(double t_below, double v_below, double v_above, double threshold, double dt) {
  const double frac = (threshold - v_below) / (v_above - v_below);
  return t_below + std::clamp(frac, 0.0, 1.0) * dt;
}

// Adds scale * alpha * p(t - tau) to values over the pulse support.
class PulseStamp {
 public:
  PulseStamp(const PulseShape& shape, double dt, double t0) : shape_(shape), dt_(dt), t0_(t0) {
    if (shape.is_double_exp()) {
      lo_ = 0.0;
      hi_ = support_end(shape, 1e-18);
    } else {
      const auto& tab = shape.as_tabulated();
      lo_ = tab.t_start;
      hi_ = tab.t_start + static_cast<double>(tab.samples.size()) * tab.dt;
    }
  }

  void apply(std::vector<double>& values, const PulseEvent& ev, double scale) const {
    if (values.empty()) return;
    const auto last = static_cast<double>(values.size() - 1);
    const double a = std::floor((ev.tau + lo_ - t0_) / dt_);
    const double b = std::ceil((ev.tau + hi_ - t0_) / dt_);
    if (b < 0.0 || a > last) return;
    const auto k0 = static_cast<std::size_t>(std::max(a, 0.0));
    const auto k1 = static_cast<std::size_t>(std::min(b, last));
    for (std::size_t k = k0; k <= k1; ++k) {
      values[k] += scale * ev.alpha * eval_pulse(shape_, t0_ + static_cast<double>(k) * dt_ - ev.tau);
    }
  }

  std::size_t first_index(double tau) const {
    const double a = std::floor((tau + lo_ - t0_) / dt_);
    return static_cast<std::size_t>(std::max(a, 0.0));
  }

 private:
  const PulseShape& shape_;
  double dt_;
  double t0_;
  double lo_{0.0};
  double hi_{0.0};
};

}  // namespace

std::vector<Cluster> find_clusters(const SampledSignal& signal, double threshold) {
  validate(signal);
  if (!(threshold > 0.0)) throw std::invalid_argument("find_clusters: threshold must be > 0");
  const auto& v = signal.values;
  const double dt = signal.dt;
  std::vector<Cluster> out;
  std::size_t i = 0;
  while (i < v.size()) {
    if (v[i] < threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1] >= threshold) ++j;

    Cluster c;
    double area = 0.0;
    if (i > 0) {
      c.t1 = crossing_time(signal.time_at(i - 1), v[i - 1], v[i], threshold, dt);
      area += 0.5 * (threshold + v[i]) * (signal.time_at(i) - c.t1);
    } else {
      c.t1 = signal.time_at(0);
    }
    for (std::size_t k = i; k < j; ++k) area += 0.5 * (v[k] + v[k + 1]) * dt;
    if (j + 1 < v.size()) {
      // Falling crossing: interpolate from the sample above to the one below.
      const double frac = std::clamp((v[j] - threshold) / (v[j] - v[j + 1]), 0.0, 1.0);
      c.t2 = signal.time_at(j) + frac * dt;
      area += 0.5 * (v[j] + threshold) * (c.t2 - signal.time_at(j));
    } else {
      c.t2 = signal.time_at(j);
    }
    c.duration = c.t2 - c.t1;
    c.area = area;
    out.push_back(c);
    i = j + 1;
  }
  return out;
}

std::vector<PulseEvent> detect_peaks(const SampledSignal& signal, double threshold,
                                     std::size_t min_separation, double group_delay,
                                     double unit_gain) {
  validate(signal);
  if (min_separation < 1) throw std::invalid_argument("detect_peaks: min_separation must be >= 1");
  if (unit_gain == 0.0 || !std::isfinite(unit_gain)) {
    throw std::invalid_argument("detect_peaks: unit_gain must be finite and non-zero");
  }
  const auto& v = signal.values;
  std::vector<std::size_t> cand;
  for (std::size_t k = 1; k + 1 < v.size(); ++k) {
    if (v[k] > v[k - 1] && v[k] >= v[k + 1] && v[k] >= threshold) cand.push_back(k);
  }
  std::stable_sort(cand.begin(), cand.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });

  std::set<std::size_t> kept;
  for (std::size_t k : cand) {
    auto it = kept.lower_bound(k);
    if (it != kept.end() && *it - k < min_separation) continue;
    if (it != kept.begin() && k - *std::prev(it) < min_separation) continue;
    kept.insert(k);
  }

  std::vector<PulseEvent> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) {
    const double ym = v[k - 1];
    const double y0 = v[k];
    const double yp = v[k + 1];
    const double denom = ym - 2.0 * y0 + yp;
    double offset = 0.0;
    double height = y0;
    if (denom < 0.0) {
      offset = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
      height = y0 - 0.25 * (ym - yp) * offset;
    }
    const double t = signal.time_at(k) + offset * signal.dt;
    out.push_back({t - group_delay, height / unit_gain});
  }
  return out;
}

std::vector<PulseEvent> refine_matched_peaks(const ShapedSignal& matched, const PulseShape& shape,
                                             std::vector<PulseEvent> events,
                                             std::size_t half_window, std::size_t max_passes) {
  const SampledSignal& sig = matched.signal;
  validate(sig);
  if (events.size() < 2 || half_window < 1) return events;
  const SampledKernel kernel = sample_kernel(shape, sig.dt);
  const double dt = sig.dt;
  const auto n = static_cast<std::ptrdiff_t>(sig.size());
  const auto h = static_cast<std::ptrdiff_t>(half_window);
  const double reach = (static_cast<double>(kernel.taps.size() + std::abs(kernel.first)) + h + 2) * dt;

  // Filter response at output index k to a unit pulse arriving at tau.
  auto response = [&](std::ptrdiff_t k, double tau) {
    double acc = 0.0;
    for (std::size_t m = 0; m < kernel.taps.size(); ++m) {
      const double t = sig.t0 + static_cast<double>(k + kernel.first + static_cast<std::ptrdiff_t>(m)) * dt;
      acc += kernel.taps[m] * eval_pulse(shape, t - tau);
    }
    return acc;
  };

  std::sort(events.begin(), events.end(),
            [](const PulseEvent& a, const PulseEvent& b) { return a.tau < b.tau; });
  std::vector<double> local(static_cast<std::size_t>(2 * h + 3));
  for (std::size_t pass = 0; pass < max_passes; ++pass) {
    double moved = 0.0;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const double peak_t = events[i].tau + matched.group_delay;
      const auto c = static_cast<std::ptrdiff_t>(std::lround((peak_t - sig.t0) / dt));
      const std::ptrdiff_t lo = c - h - 1;
      const std::ptrdiff_t hi = c + h + 1;
      if (lo < 0 || hi >= n) continue;
      for (std::ptrdiff_t k = lo; k <= hi; ++k) local[static_cast<std::size_t>(k - lo)] = sig.values[static_cast<std::size_t>(k)];
      for (std::size_t j = 0; j < events.size(); ++j) {
        if (j == i || std::abs(events[j].tau - events[i].tau) > reach) continue;
        for (std::ptrdiff_t k = lo; k <= hi; ++k) {
          local[static_cast<std::size_t>(k - lo)] -= events[j].alpha * response(k, events[j].tau);
        }
      }
      std::size_t best = 1;
      for (std::size_t q = 2; q + 1 < local.size(); ++q) {
        if (local[q] > local[best]) best = q;
      }
      const double ym = local[best - 1];
      const double y0 = local[best];
      const double yp = local[best + 1];
      const double denom = ym - 2.0 * y0 + yp;
      double offset = 0.0;
      double height = y0;
      if (denom < 0.0) {
        offset = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
        height = y0 - 0.25 * (ym - yp) * offset;
      }
      const double t = sig.time_at(static_cast<std::size_t>(lo + static_cast<std::ptrdiff_t>(best))) + offset * dt;
      const PulseEvent updated{t - matched.group_delay, height / matched.unit_gain};
      moved = std::max(moved, std::abs(updated.tau - events[i].tau) / dt);
      events[i] = updated;
    }
    if (moved < 1e-3) break;
  }
  std::sort(events.begin(), events.end(),
            [](const PulseEvent& a, const PulseEvent& b) { return a.tau < b.tau; });
  return events;
}

PileupSplit reject_pileup(std::span<const Cluster> clusters, double max_duration) {
  if (!(max_duration > 0.0)) throw std::invalid_argument("reject_pileup: max_duration must be > 0");
  PileupSplit split;
  for (const auto& c : clusters) {
    (c.duration <= max_duration ? split.accepted : split.rejected).push_back(c);
  }
  return split;
}

namespace {

// Pulses closer than the rising edge can be absorbed by a single fitted
// pulse whose leftover never crosses the threshold. Each overlap group is
// refitted with one more pulse; the extra pulse is kept when it would cross
// the threshold on its own and it lowers the group residual by at least
// threshold^2.
void split_merged(const SampledSignal& signal, const PulseShape& shape, double threshold,
                  std::size_t max_pulses, const PulseStamp& stamp, std::vector<double>& res,
                  PeelResult& result) {
  auto& events = result.events;
  if (events.empty()) return;
  const double dt = signal.dt;
  const PulsePeak pk = pulse_peak(shape);
  const double link = 2.0 * std::max(pk.time, dt);
  const auto npk = static_cast<std::size_t>(std::max(2.0, std::ceil(pk.time / dt)));
  const std::size_t n = res.size();

  std::vector<std::size_t> order(events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return events[a].tau < events[b].tau; });
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t idx : order) {
    if (groups.empty() || events[idx].tau - events[groups.back().back()].tau > link) groups.emplace_back();
    groups.back().push_back(idx);
  }

  for (const auto& group : groups) {
    if (events.size() >= max_pulses) break;
    const std::size_t s0 = stamp.first_index(events[group.front()].tau - dt);
    const std::size_t s1 = std::min(n - 1, stamp.first_index(events[group.back()].tau) + 4 * npk);
    if (s0 >= s1) continue;
    std::vector<PulseEvent> current;
    for (std::size_t idx : group) current.push_back(events[idx]);
    for (const auto& e : current) stamp.apply(res, e, +1.0);
    SampledSignal seg{dt, signal.time_at(s0),
                      std::vector<double>(res.begin() + static_cast<std::ptrdiff_t>(s0),
                                          res.begin() + static_cast<std::ptrdiff_t>(s1) + 1)};
    auto seg_rss = [&](std::span<const PulseEvent> evs) {
      const SampledSignal r = residual(seg, shape, evs);
      double acc = 0.0;
      for (double v : r.values) acc += v * v;
      return acc;
    };
    double rss = seg_rss(current);
    std::vector<PulseEvent> added;
    while (events.size() + added.size() < max_pulses && rss >= threshold * threshold &&
           2 * (current.size() + 1) <= seg.size()) {
      const SampledSignal r = residual(seg, shape, current);
      std::size_t arg = 0;
      for (std::size_t i = 1; i < r.size(); ++i) {
        if (std::abs(r.values[i]) > std::abs(r.values[arg])) arg = i;
      }
      std::vector<double> starts{r.time_at(arg) - pk.time};
      for (const auto& e : current) {
        starts.push_back(e.tau - 2.0 * dt);
        starts.push_back(e.tau + 2.0 * dt);
      }
      std::optional<FitResult> best;
      for (double t_new : starts) {
        std::vector<double> init;
        for (const auto& e : current) init.push_back(e.tau);
        init.push_back(t_new);
        std::sort(init.begin(), init.end());
        try {
          FitResult f = fit_pulses(seg, shape, current.size() + 1, init);
          bool ok = true;
          for (const auto& e : f.events) ok = ok && e.alpha * pk.amplitude >= threshold;
          if (ok && f.rss <= rss - threshold * threshold && (!best || f.rss < best->rss)) best = std::move(f);
        } catch (const std::exception&) {
        }
      }
      if (!best) break;
      // The refit keeps pulses in tau order; the one without a close
      // predecessor in the old list is the newcomer.
      std::vector<bool> used(current.size(), false);
      std::optional<PulseEvent> fresh;
      std::vector<PulseEvent> mapped(current.size());
      std::vector<std::size_t> assign(best->events.size(), current.size());
      for (std::size_t i = 0; i < best->events.size(); ++i) {
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < current.size(); ++j) {
          const double d = std::abs(best->events[i].tau - current[j].tau);
          if (!used[j] && d < bd) {
            bd = d;
            assign[i] = j;
          }
        }
        if (assign[i] < current.size()) used[assign[i]] = true;
      }
      for (std::size_t i = 0; i < best->events.size(); ++i) {
        if (assign[i] < current.size()) {
          mapped[assign[i]] = best->events[i];
        } else {
          fresh = best->events[i];
        }
      }
      if (!fresh) break;
      current = std::move(mapped);
      current.push_back(*fresh);
      added.push_back(*fresh);
      rss = best->rss;
    }
    for (std::size_t g = 0; g < group.size(); ++g) events[group[g]] = current[g];
    for (const auto& e : current) stamp.apply(res, e, -1.0);
    events.insert(events.end(), added.begin(), added.end());
  }
}

}  // namespace

PeelResult peel(const SampledSignal& signal, const PulseShape& shape, double threshold,
                std::size_t max_pulses, bool split_pass) {
  validate(signal);
  if (max_pulses < 1) throw std::invalid_argument("peel: max_pulses must be >= 1");

  const double dt = signal.dt;
  const double t_peak = pulse_peak(shape).time;
  const auto npk = static_cast<std::size_t>(std::max(2.0, std::ceil(t_peak / dt)));
  const double link = 2.0 * std::max(t_peak, dt);
  const PulseStamp stamp(shape, dt, signal.t0);

  PeelResult result;
  std::vector<double> res = signal.values;
  std::vector<bool> masked(res.size(), false);
  std::vector<PulseEvent>& events = result.events;
  const std::size_t n = res.size();
  std::size_t scan = 0;

  while (events.size() < max_pulses) {
    std::size_t k = scan;
    while (k < n && (masked[k] || res[k] < threshold)) ++k;
    if (k >= n) break;

    const double tc = signal.time_at(k);
    const std::size_t w0 = k >= npk ? k - npk : 0;
    const std::size_t w1 = std::min(n - 1, k + npk);
    SampledSignal window{dt, signal.time_at(w0),
                         std::vector<double>(res.begin() + static_cast<std::ptrdiff_t>(w0),
                                             res.begin() + static_cast<std::ptrdiff_t>(w1) + 1)};
    const FitResult one = fit_single_pulse(window, shape, tc - t_peak - dt, tc);
    if (!one.converged || one.events.empty() || !(one.events[0].alpha > 0.0)) {
      for (std::size_t i = k; i <= w1; ++i) masked[i] = true;
      ++result.warnings;
      scan = k;
      continue;
    }
    const PulseEvent found = one.events[0];
    stamp.apply(res, found, -1.0);
    events.push_back(found);

    // Joint refinement of the chain of pulses overlapping the new one.
    std::vector<std::size_t> order(events.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return events[a].tau < events[b].tau; });
    const std::size_t newest = events.size() - 1;
    auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), newest) - order.begin());
    std::size_t g0 = pos;
    while (g0 > 0 && events[order[g0]].tau - events[order[g0 - 1]].tau <= link) --g0;
    const double window_end = signal.time_at(w1);
    std::size_t g1 = pos;
    while (g1 + 1 < order.size() && events[order[g1 + 1]].tau <= window_end) ++g1;

    double lowest_tau = events[order[g0]].tau;
    if (g1 > g0) {
      std::vector<std::size_t> group(order.begin() + static_cast<std::ptrdiff_t>(g0),
                                     order.begin() + static_cast<std::ptrdiff_t>(g1) + 1);
      for (std::size_t idx : group) stamp.apply(res, events[idx], +1.0);
      const std::size_t s0 = stamp.first_index(lowest_tau - dt);
      const std::size_t s1 = std::max(w1, s0 + 2 * group.size());
      const std::size_t s1c = std::min(s1, n - 1);
      SampledSignal seg{dt, signal.time_at(s0),
                        std::vector<double>(res.begin() + static_cast<std::ptrdiff_t>(s0),
                                            res.begin() + static_cast<std::ptrdiff_t>(s1c) + 1)};
      std::vector<double> init;
      for (std::size_t idx : group) init.push_back(events[idx].tau);
      try {
        if (2 * group.size() <= seg.size()) {
          const FitResult joint = fit_pulses(seg, shape, group.size(), init);
          for (std::size_t g = 0; g < group.size(); ++g) events[group[g]] = joint.events[g];
          lowest_tau = std::min(lowest_tau, joint.events.front().tau);
        }
      } catch (const std::exception&) {
        ++result.warnings;
      }
      for (std::size_t idx : group) stamp.apply(res, events[idx], -1.0);
    }

    if (res[k] >= threshold) masked[k] = true;
    scan = std::min(k, stamp.first_index(lowest_tau));
  }

  if (split_pass) split_merged(signal, shape, threshold, max_pulses, stamp, res, result);

  result.residual = SampledSignal{dt, signal.t0, std::move(res)};
  result.residual_energy = result.residual.energy();
  return result;
}

}  // namespace pulsekit
