#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "raibench/classifier.hpp"
#include "raibench/guardrail.hpp"

namespace raibench {

struct LatencyStats {
  double median_ms = 0.0;
  double mad_ms = 0.0;  // median absolute deviation
  double min_ms = 0.0;
  std::vector<double> samples_ms;
  bool low_confidence = false;  // clock resolution coarser than 1% of the median
};

// Runs `warmup` untimed executions, then `reps` individually timed ones on a
// monotonic high-resolution clock.
LatencyStats measure_latency(const std::function<void()>& task, int warmup, int reps);

double median_of(std::vector<double> values);

class EnergyUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EnergyCapability { hardware_counter, cost_model };

// Counter contract: read_mj() is monotone non-decreasing within a session.
class EnergyProvider {
 public:
  virtual ~EnergyProvider() = default;
  virtual std::string name() const = 0;
  virtual EnergyCapability capability() const = 0;
  virtual bool available() const = 0;
  virtual double read_mj() = 0;  // throws EnergyUnavailable when unreadable

  // Deterministic providers also meter virtual time; hardware ones do not.
  virtual std::optional<double> read_time_ms() { return std::nullopt; }
};

// Per-operation constants of the deterministic provider. Energy follows the
// stated per-op values; the time constants mirror them so that a cost-model
// run is bit-reproducible end to end.
struct CostModelConstants {
  double mult_nj = 1.0;
  double add_nj = 0.5;
  double compare_nj = 0.5;
  double call_overhead_nj = 5.0;
  double mult_ns = 1.0;
  double add_ns = 0.5;
  double compare_ns = 0.5;
  double call_overhead_ns = 50.0;
};

// Virtual meter backed by the thread-local InferenceMeter: every predict call
// accrues its analytic op count, and reads convert counts to energy/time.
class CostModelProvider final : public EnergyProvider {
 public:
  explicit CostModelProvider(CostModelConstants constants = {}) : c_(constants) {}

  std::string name() const override { return "cost-model"; }
  EnergyCapability capability() const override { return EnergyCapability::cost_model; }
  bool available() const override { return true; }
  double read_mj() override;
  std::optional<double> read_time_ms() override;

  double energy_mj(const OpCount& ops, std::uint64_t calls) const;
  double time_ms(const OpCount& ops, std::uint64_t calls) const;
  const CostModelConstants& constants() const { return c_; }

 private:
  CostModelConstants c_;
};

// Package-energy counters via the Linux powercap interface
// (/sys/class/powercap/intel-rapl:*). Wraparound is unfolded using each
// domain's max_energy_range_uj.
class RaplProvider final : public EnergyProvider {
 public:
  RaplProvider();

  std::string name() const override { return "rapl"; }
  EnergyCapability capability() const override { return EnergyCapability::hardware_counter; }
  bool available() const override { return !domains_.empty(); }
  double read_mj() override;

 private:
  struct Domain {
    std::filesystem::path energy_file;
    double max_range_uj = 0.0;
    double last_uj = 0.0;
    double unwrapped_uj = 0.0;
  };
  std::vector<Domain> domains_;
};

// name: "cost-model", "rapl", or "auto" (rapl when available, else cost-model).
std::unique_ptr<EnergyProvider> make_provider(const std::string& name);

// Mean energy per execution over a rep block (counter delta / reps).
double measure_energy(EnergyProvider& provider, const std::function<void()>& task, int reps);

// ----- benchmark records

struct MeasurementRecord {
  Algorithm algo = Algorithm::svm;
  std::size_t n = 0;  // training-set size of the deployed model
  std::size_t p = 0;
  DataType t = DataType::tabular;
  GuardrailConfig g;
  double latency_ms = 0.0;  // median per-inference
  double energy_mj = 0.0;   // mean per-inference
  int reps = 0;
  int warmup = 0;
  std::string provider;
  std::uint64_t seed = 0;
  std::int64_t timestamp = 0;  // unix seconds; 0 under the deterministic provider

  bool fit_grade() const { return reps >= 30; }
  std::string key() const;  // identifies a grid cell for resume-by-key
};

inline constexpr std::string_view kRecordsHeader =
    "algo,n,p,t,g_expl,g_fair,g_interp,g_safety,g_privacy,latency_ms,energy_mj,reps,warmup,"
    "provider,seed,timestamp";

std::string record_to_csv_line(const MeasurementRecord& r);
MeasurementRecord record_from_csv_line(const std::string& line);
std::vector<MeasurementRecord> read_records_csv(const std::filesystem::path& path);
void write_records_csv(const std::filesystem::path& path,
                       const std::vector<MeasurementRecord>& records);

// ----- experiment grids

struct GridPlan {
  std::vector<Algorithm> algorithms;
  std::vector<std::size_t> n_values;
  std::vector<std::size_t> p_values;
  std::vector<DataType> t_values;
  std::vector<GuardrailConfig> guardrails;
  std::vector<std::uint64_t> seeds;
  int reps = 200;
  int warmup = 50;
  double separation = 3.0;
  std::size_t queries = 64;  // held-out inference inputs per cell
  GuardrailConstants guardrail_constants;
  Hyper hyper;

  std::size_t cells() const;
  void validate() const;  // every axis nonempty, reps/warmup sane
};

struct RunConfig {
  GridPlan plan;
  std::string provider = "cost-model";
  std::filesystem::path out = "records.csv";
};

RunConfig run_config_from_json_string(const std::string& text);

// Executes every cell not already present in the sink (keyed resume), appending
// one record per cell; per-cell failures are logged to `log` and skipped.
// Returns the number of records written. Strictly single-threaded.
std::size_t run_grid(const GridPlan& plan, EnergyProvider& provider,
                     const std::filesystem::path& records_csv, std::ostream* log = nullptr);

}  // namespace raibench
