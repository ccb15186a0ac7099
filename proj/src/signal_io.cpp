#include "pulsekit/signal_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

namespace pulsekit {

namespace {

constexpr char kMagic[4] = {'P', 'K', 'S', 'G'};
constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "PKSG I/O assumes a little-endian host");

std::string g17(double x) { return fmt::format("{:.17g}", x); }

bool is_csv(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".csv";
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw DataError(fmt::format("line {}: not a number: '{}'", line_no, s));
  }
  while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
  if (used != s.size()) throw DataError(fmt::format("line {}: not a number: '{}'", line_no, s));
  return v;
}

bool looks_numeric(const std::string& s) {
  try {
    std::size_t used = 0;
    (void)std::stod(s, &used);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

/// Rows of a CSV with optional header; each row must have `width` cells.
std::vector<std::vector<double>> read_table(std::istream& in, std::size_t width) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (line_no == 1 && !cells.empty() && !looks_numeric(cells[0])) continue;
    if (cells.size() < width) {
      throw DataError(fmt::format("line {}: expected {} columns", line_no, width));
    }
    std::vector<double> row;
    for (std::size_t i = 0; i < width; ++i) row.push_back(parse_double(cells[i], line_no));
    rows.push_back(std::move(row));
  }
  if (in.bad()) throw DataError("read error");
  return rows;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

void write_signal_csv(std::ostream& out, const SampledSignal& signal) {
  out << "t,value\n";
  for (std::size_t k = 0; k < signal.size(); ++k) {
    out << g17(signal.time_at(k)) << ',' << g17(signal.values[k]) << '\n';
  }
}

SampledSignal read_signal_csv(std::istream& in) {
  const auto rows = read_table(in, 2);
  if (rows.empty()) throw DataError("signal file has no samples");
  SampledSignal s;
  s.t0 = rows[0][0];
  s.dt = rows.size() > 1 ? rows[1][0] - rows[0][0] : 1.0;
  if (!(s.dt > 0.0)) throw DataError("signal times must be increasing");
  s.values.reserve(rows.size());
  for (const auto& r : rows) s.values.push_back(r[1]);
  for (double v : s.values) {
    if (!std::isfinite(v)) throw DataError("signal contains a non-finite value");
  }
  return s;
}

void write_signal_binary(std::ostream& out, const SampledSignal& signal) {
  out.write(kMagic, 4);
  const std::uint16_t version = kVersion;
  const std::uint16_t reserved = 0;
  out.write(reinterpret_cast<const char*>(&version), 2);
  out.write(reinterpret_cast<const char*>(&reserved), 2);
  out.write(reinterpret_cast<const char*>(&signal.dt), 8);
  for (double v : signal.values) {
    const auto f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
}

SampledSignal read_signal_binary(std::istream& in) {
  char header[16];
  if (!in.read(header, 16)) throw DataError("truncated PKSG header");
  if (std::memcmp(header, kMagic, 4) != 0) throw DataError("bad magic, not a PKSG signal file");
  std::uint16_t version = 0;
  std::memcpy(&version, header + 4, 2);
  if (version != kVersion) throw DataError(fmt::format("unsupported PKSG version {}", version));
  SampledSignal s;
  std::memcpy(&s.dt, header + 8, 8);
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw DataError("PKSG header has invalid dt");
  float f = 0.0F;
  while (in.read(reinterpret_cast<char*>(&f), 4)) {
    if (!std::isfinite(f)) throw DataError("signal contains a non-finite value");
    s.values.push_back(static_cast<double>(f));
  }
  if (in.gcount() != 0) throw DataError("PKSG payload is not a whole number of samples");
  return s;
}

SampledSignal read_signal(const std::filesystem::path& path) {
  if (is_csv(path)) {
    auto in = open_in(path);
    try {
      return read_signal_csv(in);
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  auto in = open_in(path, std::ios::binary);
  try {
    return read_signal_binary(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_signal(const std::filesystem::path& path, const SampledSignal& signal) {
  std::ofstream out(path, is_csv(path) ? std::ios::out : std::ios::out | std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  if (is_csv(path)) {
    write_signal_csv(out, signal);
  } else {
    write_signal_binary(out, signal);
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_events_csv(std::ostream& out, std::span<const PulseEvent> events) {
  out << "tau,alpha\n";
  for (const auto& e : events) out << g17(e.tau) << ',' << g17(e.alpha) << '\n';
}

std::vector<PulseEvent> read_events_csv(std::istream& in) {
  std::vector<PulseEvent> out;
  for (const auto& r : read_table(in, 2)) out.push_back({r[0], r[1]});
  return out;
}

std::vector<PulseEvent> read_events(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return read_events_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_clusters_csv(std::ostream& out, std::span<const Cluster> clusters) {
  out << "t1,t2,duration,area\n";
  for (const auto& c : clusters) {
    out << g17(c.t1) << ',' << g17(c.t2) << ',' << g17(c.duration) << ',' << g17(c.area) << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "lo,hi,mass\n";
  for (std::size_t i = 0; i < h.bins(); ++i) {
    out << g17(h.edges[i]) << ',' << g17(h.edges[i + 1]) << ',' << g17(h.masses[i]) << '\n';
  }
}

Histogram read_histogram(const std::filesystem::path& path) {
  auto in = open_in(path);
  Histogram h;
  try {
    const auto rows = read_table(in, 3);
    if (rows.empty()) throw DataError("histogram has no bins");
    h.edges.push_back(rows[0][0]);
    for (const auto& r : rows) {
      if (r[0] != h.edges.back()) throw DataError("histogram rows are not contiguous");
      h.edges.push_back(r[1]);
      h.masses.push_back(r[2]);
    }
    validate(h);
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return h;
}

void write_activations_csv(std::ostream& out, const Activations& act) {
  out << "k,a\n";
  for (std::size_t k = 0; k < act.values.size(); ++k) {
    if (act.values[k] != 0.0) out << k << ',' << g17(act.values[k]) << '\n';
  }
}

std::vector<double> read_column(const std::filesystem::path& path, std::size_t column) {
  auto in = open_in(path);
  std::vector<double> out;
  try {
    for (const auto& r : read_table(in, column + 1)) out.push_back(r[column]);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace pulsekit
