#include "pulsekit/serialization.hpp"

#include <fmt/format.h>

#include <set>
#include <stdexcept>

namespace pulsekit {

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw std::invalid_argument(what + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw std::invalid_argument(what + ": unknown field '" + key + "'");
  }
}

template <typename T>
void take(const Json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

template <typename T>
void take(const Json& j, const char* key, std::optional<T>& field) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    field.reset();
  } else {
    field = j.at(key).get<T>();
  }
}

template <typename T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json events_json(std::span<const PulseEvent> events) {
  Json arr = Json::array();
  for (const auto& e : events) arr.push_back({{"tau", e.tau}, {"alpha", e.alpha}});
  return arr;
}

std::vector<PulseEvent> events_from_json(const Json& j) {
  std::vector<PulseEvent> out;
  for (const auto& e : j) out.push_back({e.at("tau").get<double>(), e.at("alpha").get<double>()});
  return out;
}

std::string g17(double x) { return fmt::format("{:.17g}", x); }

}  // namespace

Json to_json(const PulseShape& shape) {
  if (shape.is_double_exp()) {
    const auto& d = shape.as_double_exp();
    return {{"type", "double_exp"}, {"a", d.a}, {"b", d.b}};
  }
  const auto& t = shape.as_tabulated();
  return {{"type", "tabulated"}, {"samples", t.samples}, {"dt", t.dt}, {"t_start", t.t_start}};
}

PulseShape shape_from_json(const Json& j) {
  const std::string type = j.value("type", "double_exp");
  if (type == "double_exp") {
    check_keys(j, {"type", "a", "b"}, "shape");
    return PulseShape::double_exp(j.at("a").get<double>(), j.at("b").get<double>());
  }
  if (type == "tabulated") {
    check_keys(j, {"type", "samples", "dt", "t_start"}, "shape");
    return PulseShape::tabulated(j.at("samples").get<std::vector<double>>(), j.value("dt", 1.0),
                                 j.value("t_start", 0.0));
  }
  throw std::invalid_argument("shape: unknown type '" + type + "'");
}

Json to_json(const AmplitudeSpectrum& spectrum) {
  Json arr = Json::array();
  for (const auto& c : spectrum.components()) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Line>) {
            arr.push_back({{"type", "line"}, {"center", v.center}, {"weight", v.weight}});
          } else if constexpr (std::is_same_v<T, GaussianLine>) {
            arr.push_back(
                {{"type", "gaussian"}, {"center", v.center}, {"std", v.std}, {"weight", v.weight}});
          } else {
            arr.push_back({{"type", "uniform"}, {"lo", v.lo}, {"hi", v.hi}, {"weight", v.weight}});
          }
        },
        c);
  }
  return arr;
}

AmplitudeSpectrum spectrum_from_json(const Json& j) {
  if (j.is_number()) return AmplitudeSpectrum::line(j.get<double>());
  if (!j.is_array()) throw std::invalid_argument("spectrum: expected a list of components");
  std::vector<SpectrumComponent> comps;
  for (const auto& c : j) {
    const std::string type = c.value("type", "line");
    const double w = c.value("weight", 1.0);
    if (type == "line") {
      check_keys(c, {"type", "center", "weight"}, "spectrum line");
      comps.emplace_back(Line{c.at("center").get<double>(), w});
    } else if (type == "gaussian") {
      check_keys(c, {"type", "center", "std", "weight"}, "spectrum gaussian");
      comps.emplace_back(GaussianLine{c.at("center").get<double>(), c.at("std").get<double>(), w});
    } else if (type == "uniform") {
      check_keys(c, {"type", "lo", "hi", "weight"}, "spectrum uniform");
      comps.emplace_back(Uniform{c.at("lo").get<double>(), c.at("hi").get<double>(), w});
    } else {
      throw std::invalid_argument("spectrum: unknown component type '" + type + "'");
    }
  }
  return AmplitudeSpectrum(std::move(comps));
}

Json to_json(const SimConfig& c) {
  Json j{{"rate", c.rate},          {"duration", c.duration},
         {"dt", c.dt},              {"sigma", c.sigma},
         {"shape", to_json(c.shape)}, {"spectrum", to_json(c.spectrum)},
         {"seed", c.seed},          {"warmup", c.warmup}};
  j["fixed_events"] = c.fixed_events ? events_json(*c.fixed_events) : Json(nullptr);
  return j;
}

SimConfig sim_config_from_json(const Json& j, const SimConfig& base) {
  check_keys(j,
             {"rate", "duration", "dt", "sigma", "shape", "spectrum", "seed", "warmup",
              "fixed_events"},
             "sim config");
  SimConfig c = base;
  try {
    take(j, "rate", c.rate);
    take(j, "duration", c.duration);
    take(j, "dt", c.dt);
    take(j, "sigma", c.sigma);
    take(j, "seed", c.seed);
    take(j, "warmup", c.warmup);
    if (j.contains("shape")) c.shape = shape_from_json(j.at("shape"));
    if (j.contains("spectrum")) c.spectrum = spectrum_from_json(j.at("spectrum"));
    if (j.contains("fixed_events")) {
      if (j.at("fixed_events").is_null()) {
        c.fixed_events.reset();
      } else {
        c.fixed_events = events_from_json(j.at("fixed_events"));
      }
    }
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("sim config: ") + e.what());
  }
  validate(c);
  return c;
}

Json to_json(const MethodConfig& m) {
  return {{"chain", m.chain},
          {"threshold", m.threshold},
          {"min_separation", m.min_separation},
          {"refine", m.refine},
          {"time_tol", m.time_tol},
          {"rise", m.rise},
          {"flat", m.flat},
          {"decay", opt(m.decay)},
          {"noise_power", opt(m.noise_power)},
          {"prior_power", opt(m.prior_power)},
          {"max_pulses", m.max_pulses},
          {"n_max", m.n_max},
          {"c", opt(m.c)},
          {"min_alpha", m.min_alpha},
          {"merge_window", m.merge_window},
          {"sparse_max_iter", m.sparse_max_iter},
          {"hist_bin_width", m.hist_bin_width},
          {"hist_bins", m.hist_bins}};
}

MethodConfig method_config_from_json(const Json& j, const MethodConfig& base) {
  check_keys(j,
             {"chain", "threshold", "min_separation", "refine", "time_tol", "rise", "flat", "decay",
              "noise_power", "prior_power", "max_pulses", "n_max", "c", "min_alpha", "merge_window",
              "sparse_max_iter", "hist_bin_width", "hist_bins"},
             "method config");
  MethodConfig m = base;
  try {
    take(j, "chain", m.chain);
    take(j, "threshold", m.threshold);
    take(j, "min_separation", m.min_separation);
    take(j, "refine", m.refine);
    take(j, "time_tol", m.time_tol);
    take(j, "rise", m.rise);
    take(j, "flat", m.flat);
    take(j, "decay", m.decay);
    take(j, "noise_power", m.noise_power);
    take(j, "prior_power", m.prior_power);
    take(j, "max_pulses", m.max_pulses);
    take(j, "n_max", m.n_max);
    take(j, "c", m.c);
    take(j, "min_alpha", m.min_alpha);
    take(j, "merge_window", m.merge_window);
    take(j, "sparse_max_iter", m.sparse_max_iter);
    take(j, "hist_bin_width", m.hist_bin_width);
    take(j, "hist_bins", m.hist_bins);
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("method config: ") + e.what());
  }
  validate(m);
  return m;
}

Json to_json(const FitResult& fit) {
  Json j{{"events", events_json(fit.events)},
         {"rss", fit.rss},
         {"n", fit.events.size()},
         {"converged", fit.converged},
         {"iterations", fit.iterations}};
  if (fit.phantom) j["phantom"] = {{"tau", fit.phantom->tau}, {"alpha", fit.phantom->alpha}};
  return j;
}

Json to_json(const Scores& s) {
  return {{"precision", s.precision},   {"recall", s.recall},   {"f1", s.f1},
          {"tau_rmse", s.tau_rmse},     {"alpha_rmse", s.alpha_rmse},
          {"n_truth", s.n_truth},       {"n_estimated", s.n_estimated},
          {"n_matched", s.n_matched}};
}

Json to_json(const BenchReport& r) {
  Json j = to_json(r.scores);
  j["point"] = r.point;
  j["trial"] = r.trial;
  j["seed"] = r.seed;
  j["spectrum_w1"] = opt(r.spectrum_w1);
  j["runtime_ms"] = r.runtime_ms;
  j["reliability"] = opt(r.reliability);
  j["error"] = r.error.empty() ? Json(nullptr) : Json(r.error);
  j["config"] = {{"sim", to_json(r.config.sim)}, {"method", to_json(r.config.method)}};
  return j;
}

SweepSpec sweep_spec_from_json(const Json& j) {
  check_keys(j, {"trials", "base_seed", "jobs", "grid", "sims", "methods"}, "sweep spec");
  SweepSpec spec;
  take(j, "trials", spec.options.trials);
  take(j, "base_seed", spec.options.base_seed);
  take(j, "jobs", spec.options.jobs);
  if (j.contains("grid")) {
    if (j.contains("sims") || j.contains("methods")) {
      throw std::invalid_argument("sweep spec: give either 'grid' or 'sims'/'methods', not both");
    }
    for (const auto& p : j.at("grid")) {
      check_keys(p, {"sim", "method"}, "sweep point");
      spec.grid.push_back({sim_config_from_json(p.value("sim", Json::object())),
                           method_config_from_json(p.value("method", Json::object()))});
    }
  } else if (j.contains("sims") || j.contains("methods")) {
    const Json sims = j.value("sims", Json::array({Json::object()}));
    const Json methods = j.value("methods", Json::array({Json::object()}));
    for (const auto& s : sims) {
      const SimConfig sc = sim_config_from_json(s);
      for (const auto& m : methods) spec.grid.push_back({sc, method_config_from_json(m)});
    }
  }
  if (spec.options.trials < 1) throw std::invalid_argument("sweep spec: trials must be >= 1");
  return spec;
}

std::string summary_csv(const SweepResult& result) {
  std::string out =
      "point,trials,failures,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,"
      "tau_rmse_mean,tau_rmse_std,alpha_rmse_mean,alpha_rmse_std,spectrum_w1_mean,spectrum_w1_std\n";
  for (const auto& s : result.summary) {
    out += fmt::format("{},{},{}", s.point, s.trials, s.failures);
    for (const MetricSummary* m :
         {&s.precision, &s.recall, &s.f1, &s.tau_rmse, &s.alpha_rmse, &s.spectrum_w1}) {
      out += ',' + g17(m->mean) + ',' + g17(m->std);
    }
    out += '\n';
  }
  return out;
}

}  // namespace pulsekit
