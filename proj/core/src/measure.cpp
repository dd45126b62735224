#include "raibench/measure.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "raibench/io.hpp"

namespace raibench {

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

// Smallest observable nonzero clock step, in ms.
double clock_resolution_ms() {
  using clock = std::chrono::steady_clock;
  double best = 1.0;
  for (int trial = 0; trial < 5; ++trial) {
    auto t0 = clock::now();
    auto t1 = clock::now();
    while (t1 == t0) t1 = clock::now();
    const std::chrono::duration<double, std::milli> d = t1 - t0;
    best = std::min(best, d.count());
  }
  return best;
}

}  // namespace

LatencyStats measure_latency(const std::function<void()>& task, int warmup, int reps) {
  if (reps < 1) throw std::invalid_argument("measure_latency: reps must be >= 1");
  if (warmup < 0) throw std::invalid_argument("measure_latency: warmup must be >= 0");

  using clock = std::chrono::steady_clock;
  for (int i = 0; i < warmup; ++i) task();

  LatencyStats stats;
  stats.samples_ms.reserve(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = clock::now();
    task();
    const auto t1 = clock::now();
    const std::chrono::duration<double, std::milli> d = t1 - t0;
    stats.samples_ms.push_back(d.count());
  }

  stats.median_ms = median_of(stats.samples_ms);
  stats.min_ms = *std::min_element(stats.samples_ms.begin(), stats.samples_ms.end());
  std::vector<double> dev(stats.samples_ms.size());
  for (std::size_t i = 0; i < dev.size(); ++i) {
    dev[i] = std::abs(stats.samples_ms[i] - stats.median_ms);
  }
  stats.mad_ms = median_of(std::move(dev));
  stats.low_confidence =
      stats.median_ms <= 0.0 || clock_resolution_ms() > 0.01 * stats.median_ms;
  return stats;
}

double measure_energy(EnergyProvider& provider, const std::function<void()>& task, int reps) {
  if (reps < 1) throw std::invalid_argument("measure_energy: reps must be >= 1");
  const double before = provider.read_mj();
  for (int i = 0; i < reps; ++i) task();
  const double after = provider.read_mj();
  return (after - before) / static_cast<double>(reps);
}

// ----- records

std::string MeasurementRecord::key() const {
  std::ostringstream out;
  out << algorithm_name(algo) << '|' << n << '|' << p << '|' << static_cast<int>(t);
  for (double v : g.as_array()) out << '|' << format_double(v);
  out << '|' << seed << '|' << provider;
  return out.str();
}

std::string record_to_csv_line(const MeasurementRecord& r) {
  std::ostringstream out;
  out << algorithm_name(r.algo) << ',' << r.n << ',' << r.p << ',' << static_cast<int>(r.t);
  for (double v : r.g.as_array()) out << ',' << format_double(v);
  out << ',' << format_double(r.latency_ms) << ',' << format_double(r.energy_mj) << ',' << r.reps
      << ',' << r.warmup << ',' << r.provider << ',' << r.seed << ',' << r.timestamp;
  return out.str();
}

MeasurementRecord record_from_csv_line(const std::string& line) {
  const auto f = split_csv_line(line);
  if (f.size() != 16) {
    throw std::invalid_argument("records csv: expected 16 fields, got " +
                                std::to_string(f.size()));
  }
  MeasurementRecord r;
  r.algo = algorithm_from_name(f[0]);
  r.n = static_cast<std::size_t>(parse_int(f[1]));
  r.p = static_cast<std::size_t>(parse_int(f[2]));
  r.t = data_type_from_code(static_cast<int>(parse_int(f[3])));
  r.g.expl = parse_double(f[4]);
  r.g.fair = parse_double(f[5]);
  r.g.interp = parse_double(f[6]);
  r.g.safety = parse_double(f[7]);
  r.g.privacy = parse_double(f[8]);
  r.latency_ms = parse_double(f[9]);
  r.energy_mj = parse_double(f[10]);
  r.reps = static_cast<int>(parse_int(f[11]));
  r.warmup = static_cast<int>(parse_int(f[12]));
  r.provider = f[13];
  r.seed = static_cast<std::uint64_t>(parse_int(f[14]));
  r.timestamp = parse_int(f[15]);
  validate(r.g);
  return r;
}

std::vector<MeasurementRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open records csv: " + path.string());
  std::string line;
  if (!std::getline(in, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordsHeader) {
    throw std::runtime_error("records csv: unexpected header in " + path.string());
  }
  std::vector<MeasurementRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_csv_line(line));
  }
  return records;
}

void write_records_csv(const std::filesystem::path& path,
                       const std::vector<MeasurementRecord>& records) {
  std::string out{kRecordsHeader};
  out += '\n';
  for (const auto& r : records) {
    out += record_to_csv_line(r);
    out += '\n';
  }
  atomic_write(path, out);
}

}  // namespace raibench
