// raibench: measure per-inference latency and energy of guarded binary
// classifiers, fit the two prediction equations, and score configurations.
//
// Subcommands: gen, bench, fit, predict, report.
// Exit codes: 0 success, 2 validation/config error, 3 runtime failure.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "raibench/dataset.hpp"
#include "raibench/io.hpp"
#include "raibench/measure.hpp"
#include "raibench/model.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

using namespace raibench;

struct GenArgs {
  std::size_t n = 100;
  std::size_t p = 10;
  int t = 0;
  double separation = 3.0;
  std::uint64_t seed = 0;
  std::string out = "dataset";
};

int cmd_gen(const GenArgs& a) {
  const Dataset d = generate(a.n, a.p, data_type_from_code(a.t), a.separation, a.seed);
  const std::filesystem::path csv = a.out + ".csv";
  const std::filesystem::path sidecar = a.out + ".json";
  write_dataset(d, csv, sidecar);
  std::cout << "wrote " << csv.string() << " and " << sidecar.string() << " (n=" << d.n
            << ", p=" << d.p << ", t=" << static_cast<int>(d.type) << ")\n";
  return 0;
}

struct BenchArgs {
  std::string config;
  std::string out;       // overrides config
  std::string provider;  // overrides config
  int reps = -1;
  int warmup = -1;
};

int cmd_bench(const BenchArgs& a) {
  RunConfig cfg = run_config_from_json_string(read_file(a.config));
  if (!a.out.empty()) cfg.out = a.out;
  if (!a.provider.empty()) cfg.provider = a.provider;
  if (a.reps >= 0) cfg.plan.reps = a.reps;
  if (a.warmup >= 0) cfg.plan.warmup = a.warmup;

  if (const char* force = std::getenv("RAIBENCH_FORCE_COST_MODEL");
      force != nullptr && *force != '\0' && std::string(force) != "0") {
    cfg.provider = "cost-model";
  }

  cfg.plan.validate();
  auto provider = make_provider(cfg.provider);
  if (!provider->available()) {
    throw std::invalid_argument("energy provider '" + cfg.provider +
                                "' is not available on this platform");
  }

  std::cout << "grid: " << cfg.plan.cells() << " cells -> " << cfg.out.string() << " (provider "
            << provider->name() << ")\n";
  const std::size_t written = run_grid(cfg.plan, *provider, cfg.out, &std::cout);
  std::cout << "wrote " << written << " new records\n";
  return 0;
}

struct FitArgs {
  std::string records;
  std::string target = "both";
  std::string out = "equation.json";
  std::string columns;  // comma-separated coefficient names; empty = all
  std::string t_encoding = "numeric";
  double condition_limit = 1e10;
  bool allow_low_reps = false;
};

std::filesystem::path out_path_for(const std::string& base, Target target, bool both) {
  if (!both) return base;
  std::filesystem::path p(base);
  const std::string stem = p.stem().string();
  const std::string ext = p.extension().empty() ? ".json" : p.extension().string();
  return p.parent_path() / (stem + "_" + target_name(target) + ext);
}

int cmd_fit(const FitArgs& a) {
  std::vector<MeasurementRecord> records = read_records_csv(a.records);
  if (!a.allow_low_reps) {
    const auto before = records.size();
    std::erase_if(records, [](const MeasurementRecord& r) { return !r.fit_grade(); });
    if (records.size() != before) {
      std::cerr << "note: ignored " << before - records.size()
                << " records with reps < 30 (use --allow-low-reps to keep them)\n";
    }
  }

  FitOptions options;
  options.condition_limit = a.condition_limit;
  options.t_encoding = a.t_encoding == "one_hot" ? TypeEncoding::one_hot : TypeEncoding::numeric;
  if (!a.columns.empty()) {
    std::stringstream ss(a.columns);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) options.columns.push_back(item);
    }
  }

  std::vector<Target> targets;
  if (a.target == "both") {
    targets = {Target::latency, Target::energy};
  } else {
    targets = {target_from_name(a.target)};
  }

  for (Target t : targets) {
    const FittedEquation eq = fit(records, t, options);
    const auto out = out_path_for(a.out, t, targets.size() == 2);
    save_equation(eq, out);
    std::cout << target_name(t) << ": fitted " << eq.fitted_columns.size() << " coefficients on "
              << eq.diagnostics.record_count << " records -> " << out.string() << '\n'
              << "  sigma_eps=" << format_double(eq.sigma_eps)
              << " r_squared=" << format_double(eq.diagnostics.r_squared)
              << " condition=" << format_double(eq.diagnostics.condition_estimate) << '\n';
    const auto& names = column_names(eq.t_encoding);
    for (std::size_t i = 0; i < names.size(); ++i) {
      std::cout << "  " << names[i] << " = " << format_double(eq.coef[i]) << '\n';
    }
  }
  return 0;
}

struct PredictArgs {
  std::string eq;
  std::string algo = "svm";
  std::size_t n = 1;
  std::size_t p = 1;
  int t = 0;
  double g_expl = 0, g_fair = 0, g_interp = 0, g_safety = 0, g_privacy = 0;
  std::string out;
};

int cmd_predict(const PredictArgs& a) {
  const FittedEquation eq = load_equation(a.eq);
  PredictorInputs in;
  in.algorithm = algorithm_from_name(a.algo);
  in.n = a.n;
  in.p = a.p;
  in.t = data_type_from_code(a.t);
  in.g = GuardrailConfig{a.g_expl, a.g_fair, a.g_interp, a.g_safety, a.g_privacy};
  validate(in);

  const PredictionInterval pi = predict(eq, in);
  const auto row = design_row_encoded(in, eq.target, eq.t_encoding);

  std::cout << target_name(eq.target) << " = " << format_double(pi.point) << " +/- "
            << format_double(2.0 * eq.sigma_eps) << "  [" << format_double(pi.lower) << ", "
            << format_double(pi.upper) << "]\n";

  nlohmann::json j;
  j["target"] = target_name(eq.target);
  j["point"] = pi.point;
  j["lower"] = pi.lower;
  j["upper"] = pi.upper;
  j["sigma_eps"] = eq.sigma_eps;
  j["design_row"] = row;
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!a.out.empty()) atomic_write(a.out, text);
  return 0;
}

struct ReportArgs {
  std::string records;
  std::string out;
  std::string scatter;
};

int cmd_report(const ReportArgs& a) {
  const std::vector<MeasurementRecord> records = read_records_csv(a.records);
  if (records.empty()) {
    std::cout << "no records in " << a.records << "; nothing to report\n";
    if (!a.out.empty()) {
      atomic_write(a.out,
                   "algo,g_expl,g_fair,g_interp,g_safety,g_privacy,records,"
                   "median_latency_ms,mean_latency_ms,sum_latency_ms,mean_energy_mj,"
                   "sum_energy_mj\n");
    }
    return 0;
  }

  struct CellKey {
    Algorithm algo;
    std::array<double, 5> g;
    bool operator<(const CellKey& o) const {
      if (algo != o.algo) return algo < o.algo;
      return g < o.g;
    }
  };
  std::map<CellKey, std::vector<const MeasurementRecord*>> cells;
  for (const auto& r : records) cells[{r.algo, r.g.as_array()}].push_back(&r);

  std::string csv =
      "algo,g_expl,g_fair,g_interp,g_safety,g_privacy,records,median_latency_ms,"
      "mean_latency_ms,sum_latency_ms,mean_energy_mj,sum_energy_mj\n";
  std::cout << "cell (algo | g) -> records, median latency ms, mean energy mj\n";

  double total_latency = 0.0, total_energy = 0.0;
  for (const auto& [key, rows] : cells) {
    std::vector<double> lat;
    double sum_lat = 0.0, sum_en = 0.0;
    for (const auto* r : rows) {
      lat.push_back(r->latency_ms);
      sum_lat += r->latency_ms;
      sum_en += r->energy_mj;
    }
    const double med = median_of(lat);
    const auto count = static_cast<double>(rows.size());
    total_latency += sum_lat;
    total_energy += sum_en;

    std::ostringstream line;
    line << algorithm_name(key.algo);
    for (double g : key.g) line << ',' << format_double(g);
    line << ',' << rows.size() << ',' << format_double(med) << ','
         << format_double(sum_lat / count) << ',' << format_double(sum_lat) << ','
         << format_double(sum_en / count) << ',' << format_double(sum_en);
    csv += line.str() + "\n";

    std::cout << "  " << algorithm_name(key.algo) << " | g=(";
    for (std::size_t i = 0; i < 5; ++i) std::cout << (i ? "," : "") << format_double(key.g[i]);
    std::cout << ") -> " << rows.size() << ", " << format_double(med) << ", "
              << format_double(sum_en / count) << '\n';
  }
  std::ostringstream totals;
  totals << "TOTAL,,,,,," << records.size() << ",,," << format_double(total_latency) << ",,"
         << format_double(total_energy);
  csv += totals.str() + "\n";
  std::cout << "totals: records=" << records.size()
            << " sum_latency_ms=" << format_double(total_latency)
            << " sum_energy_mj=" << format_double(total_energy) << '\n';

  if (!a.out.empty()) atomic_write(a.out, csv);

  if (!a.scatter.empty()) {
    std::string sc = "algo,n,p,t,g_expl,g_fair,g_interp,g_safety,g_privacy,latency_ms,energy_mj\n";
    for (const auto& r : records) {
      std::ostringstream line;
      line << algorithm_name(r.algo) << ',' << r.n << ',' << r.p << ',' << static_cast<int>(r.t);
      for (double g : r.g.as_array()) line << ',' << format_double(g);
      line << ',' << format_double(r.latency_ms) << ',' << format_double(r.energy_mj);
      sc += line.str() + "\n";
    }
    atomic_write(a.scatter, sc);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latency/energy benchmarking and prediction for guarded binary classifiers"};
  app.require_subcommand(1);

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset (CSV + JSON sidecar)");
  gen->add_option("--n", gen_args.n, "sample count (>= 2)");
  gen->add_option("--p", gen_args.p, "feature dimensionality (>= 1)");
  gen->add_option("--t", gen_args.t, "data type code: 0 tabular, 1 text, 2 image");
  gen->add_option("--separation", gen_args.separation, "class mean separation (>= 0)");
  gen->add_option("--seed", gen_args.seed, "generator seed");
  gen->add_option("--out", gen_args.out, "output prefix (writes <out>.csv and <out>.json)");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "run a benchmark grid from a JSON config");
  bench->add_option("--config", bench_args.config, "grid config JSON")->required();
  bench->add_option("--out", bench_args.out, "records CSV path (overrides config)");
  bench->add_option("--provider", bench_args.provider,
                    "energy provider: cost-model, rapl, auto (overrides config)");
  bench->add_option("--reps", bench_args.reps, "timed reps per cell (overrides config)");
  bench->add_option("--warmup", bench_args.warmup, "warmup executions (overrides config)");

  FitArgs fit_args;
  auto* fitc = app.add_subcommand("fit", "fit prediction equations from records");
  fitc->add_option("--records", fit_args.records, "records CSV")->required();
  fitc->add_option("--target", fit_args.target, "latency, energy or both");
  fitc->add_option("--out", fit_args.out, "output JSON (suffixed per target for both)");
  fitc->add_option("--columns", fit_args.columns,
                   "comma-separated coefficient names to estimate (default: all)");
  fitc->add_option("--t-encoding", fit_args.t_encoding, "numeric (default) or one_hot");
  fitc->add_option("--condition-limit", fit_args.condition_limit,
                   "rank-deficiency threshold on the pivot-ratio condition estimate");
  fitc->add_flag("--allow-low-reps", fit_args.allow_low_reps,
                 "keep records with reps < 30 (not fit-grade)");

  PredictArgs predict_args;
  auto* pred = app.add_subcommand("predict", "score one configuration with a fitted equation");
  pred->add_option("--eq", predict_args.eq, "fitted equation JSON")->required();
  pred->add_option("--algo", predict_args.algo, "svm, knn, rf or nn");
  pred->add_option("--n", predict_args.n, "training-set size (>= 1)");
  pred->add_option("--p", predict_args.p, "feature dimensionality (>= 1)");
  pred->add_option("--t", predict_args.t, "data type code 0/1/2");
  pred->add_option("--g-expl", predict_args.g_expl, "explainability intensity [0,1]");
  pred->add_option("--g-fair", predict_args.g_fair, "fairness intensity [0,1]");
  pred->add_option("--g-interp", predict_args.g_interp, "interpretability intensity [0,1]");
  pred->add_option("--g-safety", predict_args.g_safety, "safety intensity [0,1]");
  pred->add_option("--g-privacy", predict_args.g_privacy, "privacy intensity [0,1]");
  pred->add_option("--out", predict_args.out, "also write the JSON result here");

  ReportArgs report_args;
  auto* rep = app.add_subcommand("report", "summarize records per (algorithm x guardrail) cell");
  rep->add_option("--records", report_args.records, "records CSV")->required();
  rep->add_option("--out", report_args.out, "summary CSV path");
  rep->add_option("--scatter", report_args.scatter, "latency-vs-energy scatter CSV path");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen(gen_args);
    if (bench->parsed()) return cmd_bench(bench_args);
    if (fitc->parsed()) return cmd_fit(fit_args);
    if (pred->parsed()) return cmd_predict(predict_args);
    if (rep->parsed()) return cmd_report(report_args);
    return kExitValidation;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const raibench::RankDeficiencyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid config or input document: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
