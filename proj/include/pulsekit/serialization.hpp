#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "pulsekit/bench.hpp"
#include "pulsekit/fit.hpp"
#include "pulsekit/simulator.hpp"

namespace pulsekit {

using Json = nlohmann::json;

/// Shape as {"type": "double_exp", "a", "b"} or
/// {"type": "tabulated", "samples", "dt", "t_start"}.
Json to_json(const PulseShape& shape);
PulseShape shape_from_json(const Json& j);

/// Spectrum as a list of components, each {"type": "line"|"gaussian"|"uniform", ...}.
Json to_json(const AmplitudeSpectrum& spectrum);
AmplitudeSpectrum spectrum_from_json(const Json& j);

/// Missing fields keep their defaults; unknown fields are rejected.
Json to_json(const SimConfig& config);
SimConfig sim_config_from_json(const Json& j, const SimConfig& base = {});

Json to_json(const MethodConfig& method);
MethodConfig method_config_from_json(const Json& j, const MethodConfig& base = {});

/// {"events": [{"tau", "alpha"}...], "rss", "n", "converged", "iterations"}
Json to_json(const FitResult& fit);

Json to_json(const Scores& s);
Json to_json(const BenchReport& report);

struct SweepSpec {
  std::vector<SweepPoint> grid;
  SweepOptions options;
};

/// {"trials", "base_seed", "jobs", "grid": [{"sim", "method"}...]} or, instead
/// of "grid", "sims" and "methods" whose product forms the grid
/// (sim-major).
SweepSpec sweep_spec_from_json(const Json& j);

/// Summary CSV header and one row per grid point.
std::string summary_csv(const SweepResult& result);

}  // namespace pulsekit
