#include <fstream>
#include <regex>

#include "raibench/measure.hpp"

namespace raibench {

double CostModelProvider::energy_mj(const OpCount& ops, std::uint64_t calls) const {
  const double nj = static_cast<double>(ops.mults) * c_.mult_nj +
                    static_cast<double>(ops.adds) * c_.add_nj +
                    static_cast<double>(ops.compares) * c_.compare_nj +
                    static_cast<double>(calls) * c_.call_overhead_nj;
  return nj * 1e-6;
}

double CostModelProvider::time_ms(const OpCount& ops, std::uint64_t calls) const {
  const double ns = static_cast<double>(ops.mults) * c_.mult_ns +
                    static_cast<double>(ops.adds) * c_.add_ns +
                    static_cast<double>(ops.compares) * c_.compare_ns +
                    static_cast<double>(calls) * c_.call_overhead_ns;
  return ns * 1e-6;
}

double CostModelProvider::read_mj() {
  const InferenceMeter& m = inference_meter();
  return energy_mj(m.ops, m.predict_calls);
}

std::optional<double> CostModelProvider::read_time_ms() {
  const InferenceMeter& m = inference_meter();
  return time_ms(m.ops, m.predict_calls);
}

// ----- RAPL via powercap

namespace {

constexpr const char* kPowercapRoot = "/sys/class/powercap";

bool read_value(const std::filesystem::path& p, double& out) {
  std::ifstream in(p);
  if (!in) return false;
  in >> out;
  return static_cast<bool>(in);
}

bool read_text(const std::filesystem::path& p, std::string& out) {
  std::ifstream in(p);
  if (!in) return false;
  std::getline(in, out);
  return true;
}

}  // namespace

RaplProvider::RaplProvider() {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(kPowercapRoot, ec)) return;

  // Top-level package domains only (intel-rapl:N, not intel-rapl:N:M).
  const std::regex package_dir(R"(intel-rapl:\d+)");
  for (const auto& entry : fs::directory_iterator(kPowercapRoot, ec)) {
    const std::string base = entry.path().filename().string();
    if (!std::regex_match(base, package_dir)) continue;

    std::string domain_name;
    if (!read_text(entry.path() / "name", domain_name)) continue;
    if (domain_name.rfind("package", 0) != 0 && domain_name.rfind("psys", 0) != 0) continue;

    Domain d;
    d.energy_file = entry.path() / "energy_uj";
    double probe = 0.0;
    if (!read_value(d.energy_file, probe)) continue;  // exists but not readable
    read_value(entry.path() / "max_energy_range_uj", d.max_range_uj);
    d.last_uj = probe;
    d.unwrapped_uj = probe;
    domains_.push_back(std::move(d));
  }
}

double RaplProvider::read_mj() {
  if (domains_.empty()) {
    throw EnergyUnavailable("rapl: no readable package-energy counters on this platform");
  }
  double total_uj = 0.0;
  for (Domain& d : domains_) {
    double cur = 0.0;
    if (!read_value(d.energy_file, cur)) {
      throw EnergyUnavailable("rapl: counter became unreadable: " + d.energy_file.string());
    }
    double delta = cur - d.last_uj;
    if (delta < 0.0 && d.max_range_uj > 0.0) delta += d.max_range_uj;  // counter wrapped
    if (delta < 0.0) delta = 0.0;
    d.unwrapped_uj += delta;
    d.last_uj = cur;
    total_uj += d.unwrapped_uj;
  }
  return total_uj * 1e-3;
}

std::unique_ptr<EnergyProvider> make_provider(const std::string& name) {
  if (name == "cost-model") return std::make_unique<CostModelProvider>();
  if (name == "rapl") return std::make_unique<RaplProvider>();
  if (name == "auto") {
    auto rapl = std::make_unique<RaplProvider>();
    if (rapl->available()) return rapl;
    return std::make_unique<CostModelProvider>();
  }
  throw std::invalid_argument("unknown energy provider: '" + name +
                              "' (expected cost-model, rapl or auto)");
}

}  // namespace raibench
