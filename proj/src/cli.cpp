#include "pulsekit/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pulsekit/bench.hpp"
#include "pulsekit/detect.hpp"
#include "pulsekit/fit.hpp"
#include "pulsekit/serialization.hpp"
#include "pulsekit/shaping.hpp"
#include "pulsekit/signal_io.hpp"
#include "pulsekit/simulator.hpp"
#include "pulsekit/sparse.hpp"
#include "pulsekit/spectrum.hpp"

namespace pulsekit::cli {

namespace {

void setup_logging() {
  auto logger = spdlog::get("pulsekit");
  if (!logger) logger = spdlog::stderr_color_mt("pulsekit");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("PULSEKIT_LOG");
  const std::string level = env ? env : "warn";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::warn);
  }
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::out | std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw DataError("write failed for '" + path + "'");
}

/// Config echo next to CSV and signal outputs.
void write_meta(const std::string& output, const std::string& command, const Json& config) {
  Json meta{{"command", command}, {"config", config}};
  write_text(output + ".meta.json", meta.dump(2) + "\n");
}

struct ShapeArgs {
  double a{0.06};
  double b{0.15};
  std::string file;

  void add(CLI::App* app) {
    app->add_option("--a", a, "Pulse decay rate a of exp(-a t) - exp(-b t)")->capture_default_str();
    app->add_option("--b", b, "Pulse rise rate b (b > a)")->capture_default_str();
    app->add_option("--shape", file, "Pulse shape JSON file (overrides --a/--b)");
  }
  PulseShape get() const {
    if (!file.empty()) return shape_from_json(read_json(file));
    return PulseShape::double_exp(a, b);
  }
};

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string events_out;
  std::string signal_out;
  std::string clean_out;
  double rate{}, duration{}, dt{}, sigma{}, amplitude{};
  std::uint64_t seed{};
  bool warmup{false};
  ShapeArgs shape;
  CLI::App* app{};
};

void setup_simulate(CLI::App& root, SimulateArgs& a) {
  a.app = root.add_subcommand("simulate", "Simulate a filtered compound Poisson stream");
  auto* app = a.app;
  app->add_option("--config", a.config, "SimConfig JSON file");
  app->add_option("--events", a.events_out, "Output events CSV (tau,alpha)")->required();
  app->add_option("--signal", a.signal_out, "Output noisy signal (.csv or binary)");
  app->add_option("--clean", a.clean_out, "Output noise-free signal (.csv or binary)");
  app->add_option("--rate", a.rate, "Pulse rate (events per unit time)");
  app->add_option("--duration", a.duration, "Observation length");
  app->add_option("--dt", a.dt, "Sampling interval");
  app->add_option("--sigma", a.sigma, "Noise standard deviation");
  app->add_option("--amplitude", a.amplitude, "Single-line amplitude spectrum at this value");
  app->add_option("--seed", a.seed, "Master seed");
  app->add_flag("--warmup", a.warmup, "Start in the stationary regime");
  a.shape.add(app);
}

int do_simulate(const SimulateArgs& a) {
  SimConfig c;
  if (!a.config.empty()) c = sim_config_from_json(read_json(a.config));
  auto* app = a.app;
  if (app->count("--rate")) c.rate = a.rate;
  if (app->count("--duration")) c.duration = a.duration;
  if (app->count("--dt")) c.dt = a.dt;
  if (app->count("--sigma")) c.sigma = a.sigma;
  if (app->count("--amplitude")) c.spectrum = AmplitudeSpectrum::line(a.amplitude);
  if (app->count("--seed")) c.seed = a.seed;
  if (app->count("--warmup")) c.warmup = a.warmup;
  if (app->count("--a") || app->count("--b") || app->count("--shape")) c.shape = a.shape.get();
  validate(c);

  const Simulation sim = simulate(c);
  const Json cfg = to_json(c);
  {
    auto out = open_out(a.events_out);
    write_events_csv(out, sim.events);
  }
  write_meta(a.events_out, "simulate", cfg);
  if (!a.signal_out.empty()) {
    write_signal(a.signal_out, sim.noisy);
    write_meta(a.signal_out, "simulate", cfg);
  }
  if (!a.clean_out.empty()) {
    write_signal(a.clean_out, sim.clean);
    write_meta(a.clean_out, "simulate", cfg);
  }
  spdlog::info("simulated {} events over {} samples", sim.events.size(), sim.noisy.size());
  return kOk;
}

// ---------------------------------------------------------------- shape

struct ShapeCmdArgs {
  std::string input, output, filter{"matched"};
  int rise{10}, flat{5};
  double decay{0.0}, noise_power{0.0}, prior_power{0.0};
  ShapeArgs shape;
  CLI::App* app{};
};

void setup_shape(CLI::App& root, ShapeCmdArgs& a) {
  a.app = root.add_subcommand("shape", "Apply a shaping filter to a signal");
  auto* app = a.app;
  app->add_option("--input", a.input, "Input signal")->required();
  app->add_option("--output", a.output, "Output signal")->required();
  app->add_option("--filter", a.filter, "matched | trapezoid | wiener")
      ->check(CLI::IsMember({"matched", "trapezoid", "wiener"}))
      ->capture_default_str();
  app->add_option("--rise", a.rise, "Trapezoid rise length in samples")->capture_default_str();
  app->add_option("--flat", a.flat, "Trapezoid flat-top length in samples")->capture_default_str();
  app->add_option("--decay", a.decay, "Trapezoid decay constant in samples (default 1/(a dt))");
  app->add_option("--noise-power", a.noise_power, "Wiener noise power (sigma^2)");
  app->add_option("--prior-power", a.prior_power,
                  "Wiener per-sample impulse power (default: pulse energy)");
  a.shape.add(app);
}

int do_shape(const ShapeCmdArgs& a) {
  const SampledSignal in = read_signal(a.input);
  const PulseShape shape = a.shape.get();
  Json cfg{{"input", a.input}, {"filter", a.filter}, {"shape", to_json(shape)}};
  ShapedSignal out;
  if (a.filter == "matched") {
    out = matched_filter(in, shape);
  } else if (a.filter == "trapezoid") {
    double decay = a.decay;
    if (!a.app->count("--decay")) {
      if (!shape.is_double_exp()) throw std::invalid_argument("--decay is required for tabulated pulses");
      decay = 1.0 / (shape.as_double_exp().a * in.dt);
    }
    out = trapezoid_filter(in, decay, a.rise, a.flat);
    const TrapezoidResponse r = trapezoid_response(shape, in.dt, decay, a.rise, a.flat);
    out.group_delay = r.delay;
    out.unit_gain = r.gain;
    cfg["rise"] = a.rise;
    cfg["flat"] = a.flat;
    cfg["decay"] = decay;
  } else {
    std::optional<double> prior;
    if (a.app->count("--prior-power")) prior = a.prior_power;
    out = wiener_filter(in, shape, a.noise_power, prior);
    cfg["noise_power"] = a.noise_power;
    cfg["prior_power"] = prior ? Json(*prior) : Json(nullptr);
  }
  cfg["group_delay"] = out.group_delay;
  cfg["unit_gain"] = out.unit_gain;
  write_signal(a.output, out.signal);
  write_meta(a.output, "shape", cfg);
  return kOk;
}

// ---------------------------------------------------------------- detect

struct DetectArgs {
  std::string input, output, config, clusters_out, rejected_out;
  std::string chain;
  double threshold{}, time_tol{}, decay{}, noise_power{}, prior_power{}, c{}, min_alpha{}, sigma{0.0};
  std::size_t min_separation{}, n_max{}, merge_window{}, max_pulses{};
  int rise{}, flat{};
  bool no_refine{false};
  double cluster_threshold{}, max_duration{};
  ShapeArgs shape;
  CLI::App* app{};
};

void setup_detect(CLI::App& root, DetectArgs& a) {
  a.app = root.add_subcommand("detect", "Detect pulses (events) and clusters in a signal");
  auto* app = a.app;
  app->add_option("--input", a.input, "Input signal")->required();
  app->add_option("--output", a.output, "Output events CSV");
  app->add_option("--config", a.config, "Method config JSON file");
  app->add_option("--chain", a.chain, "matched | trapezoid | wiener | peel | fit | sparse");
  app->add_option("--threshold", a.threshold, "Detection threshold in amplitude units");
  app->add_option("--min-separation", a.min_separation, "Minimum peak separation in samples");
  app->add_flag("--no-refine", a.no_refine, "Matched: keep raw filter peaks");
  app->add_option("--rise", a.rise, "Trapezoid rise length in samples");
  app->add_option("--flat", a.flat, "Trapezoid flat-top length in samples");
  app->add_option("--decay", a.decay, "Trapezoid decay constant in samples");
  app->add_option("--noise-power", a.noise_power, "Wiener noise power");
  app->add_option("--prior-power", a.prior_power, "Wiener per-sample impulse power");
  app->add_option("--max-pulses", a.max_pulses, "Peel: maximum number of pulses");
  app->add_option("--n-max", a.n_max, "Fit: largest order tried");
  app->add_option("--c", a.c, "Sparse: regularization weight");
  app->add_option("--min-alpha", a.min_alpha, "Sparse: smallest reported amplitude");
  app->add_option("--merge-window", a.merge_window, "Sparse: merge gap in samples");
  app->add_option("--sigma", a.sigma, "Noise standard deviation of the input")->capture_default_str();
  app->add_option("--clusters", a.clusters_out, "Output clusters CSV (t1,t2,duration,area)");
  app->add_option("--cluster-threshold", a.cluster_threshold,
                  "Cluster threshold in signal units (default: threshold times pulse peak)");
  app->add_option("--max-duration", a.max_duration,
                  "Reject clusters longer than this; --clusters then holds the accepted ones");
  app->add_option("--rejected", a.rejected_out, "Output rejected clusters CSV");
  a.shape.add(app);
}

int do_detect(const DetectArgs& a) {
  auto* app = a.app;
  if (a.output.empty() && a.clusters_out.empty()) {
    throw CLI::ValidationError("detect", "give --output and/or --clusters");
  }
  MethodConfig m;
  if (!a.config.empty()) m = method_config_from_json(read_json(a.config));
  if (app->count("--chain")) m.chain = a.chain;
  if (app->count("--threshold")) m.threshold = a.threshold;
  if (app->count("--min-separation")) m.min_separation = a.min_separation;
  if (a.no_refine) m.refine = false;
  if (app->count("--rise")) m.rise = a.rise;
  if (app->count("--flat")) m.flat = a.flat;
  if (app->count("--decay")) m.decay = a.decay;
  if (app->count("--noise-power")) m.noise_power = a.noise_power;
  if (app->count("--prior-power")) m.prior_power = a.prior_power;
  if (app->count("--max-pulses")) m.max_pulses = a.max_pulses;
  if (app->count("--n-max")) m.n_max = a.n_max;
  if (app->count("--c")) m.c = a.c;
  if (app->count("--min-alpha")) m.min_alpha = a.min_alpha;
  if (app->count("--merge-window")) m.merge_window = a.merge_window;
  validate(m);

  const SampledSignal in = read_signal(a.input);
  SimConfig sc;
  sc.shape = a.shape.get();
  sc.sigma = a.sigma;
  sc.dt = in.dt;
  Json cfg{{"input", a.input}, {"method", to_json(m)}, {"shape", to_json(sc.shape)}, {"sigma", a.sigma}};

  if (!a.output.empty()) {
    const auto events = run_chain(in, sc, m);
    auto out = open_out(a.output);
    write_events_csv(out, events);
    write_meta(a.output, "detect", cfg);
    spdlog::info("detected {} events", events.size());
  }
  if (!a.clusters_out.empty()) {
    const double level = app->count("--cluster-threshold") ? a.cluster_threshold
                                                          : m.threshold * pulse_peak(sc.shape).amplitude;
    cfg["cluster_threshold"] = level;
    auto clusters = find_clusters(in, level);
    std::vector<Cluster> rejected;
    if (app->count("--max-duration")) {
      PileupSplit split = reject_pileup(clusters, a.max_duration);
      clusters = std::move(split.accepted);
      rejected = std::move(split.rejected);
      cfg["max_duration"] = a.max_duration;
    }
    {
      auto out = open_out(a.clusters_out);
      write_clusters_csv(out, clusters);
    }
    write_meta(a.clusters_out, "detect", cfg);
    if (!a.rejected_out.empty()) {
      auto out = open_out(a.rejected_out);
      write_clusters_csv(out, rejected);
      write_meta(a.rejected_out, "detect", cfg);
    }
  }
  return kOk;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string input, output, n{"auto"};
  double sigma{0.0};
  std::size_t n_max{4};
  std::size_t max_sweeps{200};
  bool phantom{false};
  ShapeArgs shape;
  CLI::App* app{};
};

void setup_fit(CLI::App& root, FitArgs& a) {
  a.app = root.add_subcommand("fit", "Least-squares fit of N pulses");
  auto* app = a.app;
  app->add_option("--input", a.input, "Input signal")->required();
  app->add_option("--output", a.output, "Output FitResult JSON")->required();
  app->add_option("--n", a.n, "Number of pulses, or 'auto' for residual-based selection")
      ->capture_default_str();
  app->add_option("--sigma", a.sigma, "Noise standard deviation (required for auto)")
      ->capture_default_str();
  app->add_option("--n-max", a.n_max, "Largest order tried by auto")->capture_default_str();
  app->add_option("--max-sweeps", a.max_sweeps, "Coordinate-descent sweep limit")->capture_default_str();
  app->add_flag("--phantom", a.phantom, "Also fit a pulse arriving before the window");
  a.shape.add(app);
}

int do_fit(const FitArgs& a) {
  const SampledSignal in = read_signal(a.input);
  const PulseShape shape = a.shape.get();
  Json cfg{{"input", a.input}, {"n", a.n}, {"sigma", a.sigma}, {"n_max", a.n_max},
           {"max_sweeps", a.max_sweeps}, {"phantom", a.phantom}, {"shape", to_json(shape)}};
  Json j;
  if (a.n == "auto") {
    if (!(a.sigma > 0.0)) throw CLI::ValidationError("--sigma", "auto order selection needs --sigma > 0");
    const OrderSelection sel = select_order(in, shape, a.sigma, a.n_max);
    j = to_json(sel.fit);
    j["rss_by_order"] = sel.rss_by_order;
    j["admissible"] = sel.admissible;
  } else {
    std::size_t n = 0;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(a.n, &used);
      if (used != a.n.size() || v < 0) throw std::invalid_argument("negative");
      n = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--n", "expected a non-negative integer or 'auto'");
    }
    FitOptions opts;
    opts.max_sweeps = a.max_sweeps;
    opts.phantom = a.phantom;
    j = to_json(fit_pulses(in, shape, n, std::nullopt, opts));
  }
  j["config"] = cfg;
  write_text(a.output, j.dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------- sparse

struct SparseArgs {
  std::string input, activations_out, events_out;
  double c{0.0}, sigma{0.0}, tol{1e-10}, min_alpha{0.1};
  std::size_t max_iter{20000}, merge_window{2};
  ShapeArgs shape;
  CLI::App* app{};
};

void setup_sparse(CLI::App& root, SparseArgs& a) {
  a.app = root.add_subcommand("sparse", "Non-negative sparse deconvolution");
  auto* app = a.app;
  app->add_option("--input", a.input, "Input signal")->required();
  app->add_option("--activations", a.activations_out, "Output activations CSV (k,a), nonzero entries");
  app->add_option("--events", a.events_out, "Output merged events CSV");
  app->add_option("--c", a.c, "Regularization weight (default from --sigma)");
  app->add_option("--sigma", a.sigma, "Noise standard deviation")->capture_default_str();
  app->add_option("--tol", a.tol, "Relative objective decrease to stop")->capture_default_str();
  app->add_option("--max-iter", a.max_iter, "Iteration limit")->capture_default_str();
  app->add_option("--min-alpha", a.min_alpha, "Smallest reported event amplitude")->capture_default_str();
  app->add_option("--merge-window", a.merge_window, "Merge gap in samples")->capture_default_str();
  a.shape.add(app);
}

int do_sparse(const SparseArgs& a) {
  if (a.activations_out.empty() && a.events_out.empty()) {
    throw CLI::ValidationError("sparse", "give --activations and/or --events");
  }
  const SampledSignal in = read_signal(a.input);
  const PulseShape shape = a.shape.get();
  SparseOptions opts;
  opts.c = a.app->count("--c") ? a.c : default_regularization(a.sigma, in.size(), shape, in.dt);
  opts.tol = a.tol;
  opts.max_iter = a.max_iter;
  const Activations act = sparse_deconvolve(in, shape, opts);
  Json cfg{{"input", a.input},           {"c", opts.c},
           {"tol", opts.tol},            {"max_iter", opts.max_iter},
           {"min_alpha", a.min_alpha},   {"merge_window", a.merge_window},
           {"shape", to_json(shape)},    {"objective", act.objective},
           {"iterations", act.iterations}, {"converged", act.converged}};
  if (!act.converged) spdlog::warn("sparse: iteration limit reached before convergence");
  if (!a.activations_out.empty()) {
    auto out = open_out(a.activations_out);
    write_activations_csv(out, act);
    write_meta(a.activations_out, "sparse", cfg);
  }
  if (!a.events_out.empty()) {
    auto out = open_out(a.events_out);
    write_events_csv(out, activations_to_events(act, a.min_alpha, a.merge_window));
    write_meta(a.events_out, "sparse", cfg);
  }
  return kOk;
}

// ---------------------------------------------------------------- spectrum

struct SpectrumArgs {
  std::string amplitudes, histogram, input, output;
  double bin_width{0.1};
  std::size_t bins{128};
  bool pileup_correct{false}, decompound{false};
  double rate{0.0}, window{0.0}, interval{0.0}, quiet{0.0}, pulse_area{0.0}, noise_sigma{0.0},
      noise_floor{3.0};
  std::size_t iters{200};
  ShapeArgs shape;
  CLI::App* app{};
};

void setup_spectrum(CLI::App& root, SpectrumArgs& a) {
  a.app = root.add_subcommand("spectrum", "Amplitude spectrum estimation");
  auto* app = a.app;
  app->add_option("--amplitudes", a.amplitudes,
                  "Amplitude list: events CSV (alpha column) or single column");
  app->add_option("--histogram", a.histogram, "Measured histogram CSV (lo,hi,mass)");
  app->add_option("--input", a.input, "Signal for --decompound");
  app->add_option("--output", a.output, "Output histogram CSV (lo,hi,mass)")->required();
  app->add_option("--bin-width", a.bin_width, "Bin width; bins are centered on multiples of it")
      ->capture_default_str();
  app->add_option("--bins", a.bins, "Number of bins")->capture_default_str();
  app->add_flag("--pileup-correct", a.pileup_correct, "Invert the two-pulse pile-up model");
  app->add_option("--window", a.window, "Pile-up coincidence window");
  app->add_option("--iters", a.iters, "Pile-up correction iterations")->capture_default_str();
  app->add_flag("--decompound", a.decompound, "Recover the spectrum from interval areas of --input");
  app->add_option("--rate", a.rate, "Pulse rate");
  app->add_option("--interval", a.interval, "Interval length for --decompound");
  app->add_option("--quiet-threshold", a.quiet,
                  "Interval boundary level (default 1e-3 of the pulse peak, at least 3 noise sigma)");
  app->add_option("--pulse-area", a.pulse_area, "Area of a unit pulse (default from the shape)");
  app->add_option("--noise-sigma", a.noise_sigma, "Per-sample noise sigma")->capture_default_str();
  app->add_option("--noise-floor", a.noise_floor, "Noise floor in estimated standard deviations")
      ->capture_default_str();
  a.shape.add(app);
}

std::vector<double> read_amplitudes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string header;
  std::getline(in, header);
  std::size_t column = 0;
  std::istringstream ss(header);
  std::string cell;
  for (std::size_t i = 0; std::getline(ss, cell, ','); ++i) {
    if (cell == "alpha" || cell == "alpha\r") column = i;
  }
  return read_column(path, column);
}

int do_spectrum(const SpectrumArgs& a) {
  auto* app = a.app;
  if (a.pileup_correct && a.decompound) {
    throw CLI::ValidationError("spectrum", "--pileup-correct and --decompound are exclusive");
  }
  const auto edges = centered_edges(a.bin_width, a.bins);
  Json cfg{{"bin_width", a.bin_width}, {"bins", a.bins}};

  if (a.decompound) {
    if (a.input.empty()) throw CLI::ValidationError("--input", "--decompound needs --input");
    if (!app->count("--rate") || !app->count("--interval")) {
      throw CLI::ValidationError("spectrum", "--decompound needs --rate and --interval");
    }
    const SampledSignal sig = read_signal(a.input);
    const PulseShape shape = a.shape.get();
    const double area = app->count("--pulse-area") ? a.pulse_area : pulse_area(shape);
    const double quiet = app->count("--quiet-threshold")
                             ? a.quiet
                             : std::max(1e-3 * pulse_peak(shape).amplitude, 3.0 * a.noise_sigma);
    const auto areas = interval_areas(sig, a.interval, quiet);
    DecompoundOptions opts;
    opts.noise_sigma = a.noise_sigma;
    opts.dt = sig.dt;
    opts.noise_floor = a.noise_floor;
    const DecompoundResult r =
        decompound_areas(areas, a.rate, a.interval, area, {a.bin_width, a.bins}, opts);
    cfg.update({{"mode", "decompound"},  {"input", a.input},       {"rate", a.rate},
                {"interval", a.interval}, {"quiet_threshold", quiet}, {"pulse_area", area},
                {"noise_sigma", a.noise_sigma}, {"noise_floor", a.noise_floor},
                {"intervals", areas.size()}, {"mu", r.mu},         {"cf_cutoff", r.cf_cutoff},
                {"empty", r.empty},       {"mean", r.spectrum.mean()}});
    {
      auto out = open_out(a.output);
      write_histogram_csv(out, r.spectrum);
    }
    write_meta(a.output, "spectrum", cfg);
    std::cout << fmt::format("intervals={} mu={:.6g} mean={:.6g}\n", areas.size(), r.mu,
                             r.spectrum.mean());
    return kOk;
  }

  Histogram h;
  if (!a.histogram.empty()) {
    h = read_histogram(a.histogram);
    cfg["histogram"] = a.histogram;
  } else if (!a.amplitudes.empty()) {
    h = estimate_histogram(read_amplitudes(a.amplitudes), edges);
    cfg["amplitudes"] = a.amplitudes;
  } else {
    throw CLI::ValidationError("spectrum", "give --amplitudes, --histogram or --decompound --input");
  }

  if (a.pileup_correct) {
    if (!app->count("--rate") || !app->count("--window")) {
      throw CLI::ValidationError("spectrum", "--pileup-correct needs --rate and --window");
    }
    const PileupCorrection pc = pileup_correct(normalized(h), a.rate, a.window, a.iters);
    h = pc.corrected;
    cfg.update({{"mode", "pileup_correct"}, {"rate", a.rate}, {"window", a.window},
                {"iters", a.iters}, {"residual_l1", pc.residual_l1}});
  } else {
    cfg["mode"] = "histogram";
  }
  cfg["underflow"] = h.underflow;
  cfg["overflow"] = h.overflow;
  {
    auto out = open_out(a.output);
    write_histogram_csv(out, h);
  }
  write_meta(a.output, "spectrum", cfg);
  return kOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string spec, output, summary;
  std::size_t trials{1}, jobs{1};
  std::uint64_t seed{0};
  bool no_timing{false};
  CLI::App* app{};
};

void setup_bench(CLI::App& root, BenchArgs& a) {
  a.app = root.add_subcommand("bench", "Run a scored simulation sweep");
  auto* app = a.app;
  app->add_option("--spec", a.spec, "Sweep spec JSON")->required();
  app->add_option("--output", a.output, "Output reports, one JSON object per line")->required();
  app->add_option("--summary", a.summary, "Output per-point summary CSV");
  app->add_option("--trials", a.trials, "Trials per grid point (overrides spec)");
  app->add_option("--seed", a.seed, "Base seed (overrides spec)");
  app->add_option("--jobs", a.jobs, "Parallel trials")->check(CLI::PositiveNumber);
  app->add_flag("--no-timing", a.no_timing, "Omit per-stage wall-clock timings");
}

int do_bench(const BenchArgs& a) {
  SweepSpec spec = sweep_spec_from_json(read_json(a.spec));
  if (a.app->count("--trials")) spec.options.trials = a.trials;
  if (a.app->count("--seed")) spec.options.base_seed = a.seed;
  if (a.app->count("--jobs")) spec.options.jobs = a.jobs;
  spec.options.record_timing = !a.no_timing;
  if (spec.options.trials < 1) throw CLI::ValidationError("--trials", "must be >= 1");

  const SweepResult result = run_sweep(spec.grid, spec.options);
  {
    auto out = open_out(a.output);
    for (const auto& r : result.reports) out << to_json(r).dump() << '\n';
  }
  std::size_t failures = 0;
  for (const auto& r : result.reports) failures += r.error.empty() ? 0 : 1;
  if (failures) spdlog::warn("{} of {} trials failed", failures, result.reports.size());
  if (!a.summary.empty()) {
    write_text(a.summary, summary_csv(result));
    Json grid = Json::array();
    for (const auto& p : spec.grid) grid.push_back({{"sim", to_json(p.sim)}, {"method", to_json(p.method)}});
    write_meta(a.summary, "bench",
               {{"trials", spec.options.trials}, {"base_seed", spec.options.base_seed},
                {"grid", grid}});
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  setup_logging();
  CLI::App app{"pulsekit: pulse-stream simulation, detection and spectrum estimation"};
  app.name("pulsekit");
  app.require_subcommand(1);

  SimulateArgs sim;
  ShapeCmdArgs shp;
  DetectArgs det;
  FitArgs fit;
  SparseArgs sps;
  SpectrumArgs spe;
  BenchArgs ben;
  setup_simulate(app, sim);
  setup_shape(app, shp);
  setup_detect(app, det);
  setup_fit(app, fit);
  setup_sparse(app, sps);
  setup_spectrum(app, spe);
  setup_bench(app, ben);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kOk : kUsageError;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? kOk : kUsageError;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return kUsageError;
  }

  try {
    if (sim.app->parsed()) return do_simulate(sim);
    if (shp.app->parsed()) return do_shape(shp);
    if (det.app->parsed()) return do_detect(det);
    if (fit.app->parsed()) return do_fit(fit);
    if (sps.app->parsed()) return do_sparse(sps);
    if (spe.app->parsed()) return do_spectrum(spe);
    if (ben.app->parsed()) return do_bench(ben);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("pulsekit");
  for (const auto& s : args) argv.push_back(s.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace pulsekit::cli
