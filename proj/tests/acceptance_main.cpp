// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one pass/fail line per criterion. Exit code 0 iff all pass.

#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include <sys/wait.h>

#include "raibench/guardrail.hpp"
#include "raibench/io.hpp"
#include "raibench/measure.hpp"
#include "raibench/model.hpp"

using namespace raibench;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << (detail.str().empty() ? "" : "; ") << what;
    }
  }
};

constexpr std::array<double, 12> kTheta = {1.0,  0.5,   -0.25, 2.0,  0.125, 0.0625,
                                           -1.5, 0.375, 0.75,  -0.5, 0.25,  1.25};

MeasurementRecord synthetic_record(const PredictorInputs& in, Target target, double y) {
  MeasurementRecord r;
  r.algo = in.algorithm;
  r.n = in.n;
  r.p = in.p;
  r.t = in.t;
  r.g = in.g;
  r.reps = 200;
  r.warmup = 50;
  r.provider = "synthetic";
  (target == Target::latency ? r.latency_ms : r.energy_mj) = y;
  return r;
}

std::vector<MeasurementRecord> noiseless_grid(Target target) {
  std::vector<GuardrailConfig> gs = {GuardrailConfig{},
                                     GuardrailConfig{0.5, 0, 0, 0, 0},
                                     GuardrailConfig{0, 0.5, 0, 0, 0},
                                     GuardrailConfig{0, 0, 0.5, 0, 0},
                                     GuardrailConfig{0, 0, 0, 0.5, 0},
                                     GuardrailConfig{0, 0, 0, 0, 0.5},
                                     GuardrailConfig{1, 1, 1, 1, 1}};
  std::vector<MeasurementRecord> records;
  for (Algorithm a : {Algorithm::svm, Algorithm::knn, Algorithm::rf, Algorithm::nn})
    for (std::size_t n : {1u, 10u, 100u, 1000u})
      for (std::size_t p : {1u, 5u})
        for (DataType t : {DataType::tabular, DataType::text, DataType::image})
          for (const auto& g : gs) {
            PredictorInputs in{a, n, p, t, g};
            const auto row = design_row(in, target);
            double y = 0.0;
            for (std::size_t i = 0; i < 12; ++i) y += kTheta[i] * row[i];
            records.push_back(synthetic_record(in, target, y));
          }
  return records;
}

// ---------------------------------------------------------------- criterion 1
bool encoding_fidelity(Check& c) {
  const GuardrailConfig g{0.7, 0.1, 0.25, 0.3, 0.9};
  for (Algorithm a : {Algorithm::svm, Algorithm::knn, Algorithm::rf, Algorithm::nn}) {
    for (DataType t : {DataType::tabular, DataType::text, DataType::image}) {
      PredictorInputs in{a, 37, 9, t, g};
      const auto row = design_row(in, Target::latency);
      c.expect(row.size() == 12, "row length 12");
      c.expect(row[0] == 1.0, "intercept slot");
      c.expect(row[6] == double(int(t)), "t enters as its stated 0/1/2 code");

      const auto hot = one_hot(a);
      c.expect(hot[0] + hot[1] + hot[2] + hot[3] == 1, "one-hot has exactly one 1");
      // documented reference-level mapping: contrasts are the one-hot tail
      c.expect(row[1] == hot[1] && row[2] == hot[2] && row[3] == hot[3],
               "contrast slots mirror the one-hot tail");
      const double active = row[1] + row[2] + row[3];
      c.expect(a == Algorithm::svm ? active == 0.0 : active == 1.0,
               "exactly one active contrast unless the reference algorithm");

      const auto ga = g.as_array();
      for (std::size_t i = 0; i < 5; ++i) {
        c.expect(row[7 + i] == ga[i], "g values pass through unchanged");
      }
    }
  }
  return c.ok;
}

// ---------------------------------------------------------------- criterion 2
bool equation_form(Check& c) {
  for (std::size_t n : {1u, 10u, 100u, 1000u}) {
    PredictorInputs in{Algorithm::rf, n, 7, DataType::text, GuardrailConfig{0.2, 0.4, 0.6, 0.8, 1.0}};
    const auto lat = design_row(in, Target::latency);
    const auto en = design_row(in, Target::energy);
    for (std::size_t i = 0; i < 12; ++i) {
      if (i == 4) continue;
      c.expect(lat[i] == en[i], "rows identical outside the size component");
    }
    c.expect(lat[4] == std::log(double(n)), "latency size term is ln n");
    c.expect(en[4] == double(n), "energy size term is n");
    if (n == 1) c.expect(lat[4] == 0.0, "ln(1) is exactly zero");
  }
  return c.ok;
}

// ---------------------------------------------------------------- criterion 3
bool ols_recovery(Check& c) {
  for (Target target : {Target::latency, Target::energy}) {
    const FittedEquation eq = fit(noiseless_grid(target), target);
    for (std::size_t i = 0; i < 12; ++i) {
      const double rel = std::abs(eq.coef[i] - kTheta[i]) / std::max(1.0, std::abs(kTheta[i]));
      c.expect(rel <= 1e-8, "noiseless relative error <= 1e-8 on " + column_names()[i]);
    }
  }

  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::uniform_int_distribution<int> algo(0, 3), tcode(0, 2);
  std::uniform_int_distribution<std::size_t> nd(1, 1000), pd(1, 40);
  std::uniform_real_distribution<double> gd(0.0, 1.0);
  std::vector<MeasurementRecord> noisy;
  for (int i = 0; i < 500; ++i) {
    PredictorInputs in;
    in.algorithm = static_cast<Algorithm>(algo(rng));
    in.n = nd(rng);
    in.p = pd(rng);
    in.t = data_type_from_code(tcode(rng));
    in.g = GuardrailConfig{gd(rng), gd(rng), gd(rng), gd(rng), gd(rng)};
    const auto row = design_row(in, Target::latency);
    double y = noise(rng);
    for (std::size_t k = 0; k < 12; ++k) y += kTheta[k] * row[k];
    noisy.push_back(synthetic_record(in, Target::latency, y));
  }
  const FittedEquation eq = fit(noisy, Target::latency);
  for (std::size_t i = 0; i < 12; ++i) {
    c.expect(eq.std_errors[i] > 0.0, "standard error available");
    c.expect(std::abs(eq.coef[i] - kTheta[i]) <= 5.0 * eq.std_errors[i],
             column_names()[i] + " within 5 standard errors");
  }
  c.expect(eq.sigma_eps >= 0.08 && eq.sigma_eps <= 0.12,
           "sigma_eps within 20% of 0.1 (got " + format_double(eq.sigma_eps) + ")");
  return c.ok;
}

// ---------------------------------------------------------------- criterion 4
bool additive_guardrail(Check& c) {
  const FittedEquation eq = fit(noiseless_grid(Target::latency), Target::latency);
  const std::array<const char*, 5> phis = {"phi_expl", "phi_fair", "phi_interp", "phi_safety",
                                           "phi_privacy"};
  for (std::size_t i = 0; i < 5; ++i) {
    for (double x : {0.25, 0.7, 1.0}) {
      PredictorInputs off{Algorithm::nn, 200, 12, DataType::image, {}};
      PredictorInputs on = off;
      auto garr = on.g.as_array();
      switch (i) {
        case 0: on.g.expl = x; break;
        case 1: on.g.fair = x; break;
        case 2: on.g.interp = x; break;
        case 3: on.g.safety = x; break;
        case 4: on.g.privacy = x; break;
      }
      (void)garr;
      const double delta = predict(eq, on).point - predict(eq, off).point;
      const double want = eq.coefficient(phis[i]) * x;
      c.expect(std::abs(delta - want) <= 1e-12 * std::max(1.0, std::abs(want)),
               std::string(phis[i]) + " decomposes to 1e-12");
    }
  }
  return c.ok;
}

// ---------------------------------------------------------------- criterion 5
bool guardrail_mechanics(Check& c) {
  const Dataset d = generate(200, 10, DataType::tabular, 2.5, 61);
  const Dataset q = generate(8, 10, DataType::tabular, 2.5, 62);
  const TrainedModel nn = train(Algorithm::nn, d, {}, 61);

  // the worked example: intensity 0.7, p = 10 -> exactly 7 features
  auto calls_before = inference_meter().predict_calls;
  const Explanation e = explain(nn, q.row(0), 0.7, 5);
  const auto expl_calls = inference_meter().predict_calls - calls_before;
  c.expect(e.ranked.size() == 7, "0.7 x p=10 explains exactly 7 features");
  c.expect(expl_calls == 45, "ceil(0.7 x 64) = 45 extra predict calls");

  // all-zero config is byte-identical to bare predict
  for (std::size_t i = 0; i < q.n; ++i) {
    const Prediction bare = predict(nn, q.row(i));
    calls_before = inference_meter().predict_calls;
    const GuardedPrediction gp = guarded_predict(nn, q.row(i), q.groups[i], {}, nullptr, i);
    const auto guarded_calls = inference_meter().predict_calls - calls_before;
    c.expect(gp.label == bare.label, "zero config: label identical");
    c.expect(std::bit_cast<std::uint64_t>(gp.score) == std::bit_cast<std::uint64_t>(bare.score),
             "zero config: score bit-identical");
    c.expect(!gp.explanation && !gp.interpretation && !gp.fairness && !gp.safety,
             "zero config: no artifacts");
    c.expect(gp.marks.empty() && gp.errors.empty(), "zero config: no marks or errors");
    c.expect(guarded_calls == 1, "zero config: exactly the one base call");
  }

  // instrumented call counts match the closed forms per guardrail
  auto extra_for = [&](const GuardrailConfig& cfg) {
    FairnessWindow w(cfg.fair > 0 ? fairness_window_capacity(cfg.fair) : 1);
    const auto before = inference_meter().predict_calls;
    guarded_predict(nn, q.row(0), q.groups[0], cfg, &w, 9);
    return inference_meter().predict_calls - before - 1;
  };
  for (double i : {0.1, 0.3, 0.5, 0.7, 1.0}) {
    c.expect(extra_for(GuardrailConfig{i, 0, 0, 0, 0}) == std::uint64_t(std::ceil(i * 64)),
             "expl calls = ceil(i*64)");
    c.expect(extra_for(GuardrailConfig{0, 0, 0, i, 0}) == std::uint64_t(std::ceil(i * 32)),
             "safety calls = ceil(i*32)");
    c.expect(extra_for(GuardrailConfig{0, 0, i, 0, 0}) == std::uint64_t(std::ceil(i * 10)),
             "interp calls = ceil(i*p)");
    c.expect(extra_for(GuardrailConfig{0, i, 0, 0, 0}) == 0, "fairness adds no predict calls");
    c.expect(extra_for(GuardrailConfig{0, 0, 0, 0, i}) == 0, "privacy adds no predict calls");
  }
  const std::uint64_t sum = extra_for({1, 0, 0, 0, 0}) + extra_for({0, 1, 0, 0, 0}) +
                            extra_for({0, 0, 1, 0, 0}) + extra_for({0, 0, 0, 1, 0}) +
                            extra_for({0, 0, 0, 0, 1});
  c.expect(extra_for({1, 1, 1, 1, 1}) == sum, "call counts additive across guardrails");
  return c.ok;
}

// ---------------------------------------------------------------- criterion 6
bool cost_model_structure(Check& c) {
  const fs::path dir = fs::temp_directory_path() / "raibench_acceptance_c6";
  fs::remove_all(dir);
  fs::create_directories(dir);

  GridPlan plan;
  plan.n_values = {100, 200, 300, 400, 800};
  plan.p_values = {10};
  plan.t_values = {DataType::tabular};
  plan.guardrails = {GuardrailConfig{}};
  plan.seeds = {1, 2, 3, 4, 5};
  plan.reps = 30;
  plan.warmup = 2;
  plan.queries = 8;

  auto split = [](const std::vector<MeasurementRecord>& records) {
    std::pair<std::vector<MeasurementRecord>, std::vector<MeasurementRecord>> out;
    for (const auto& r : records) {
      (r.seed <= 3 ? out.first : out.second).push_back(r);
    }
    return out;
  };

  {
    plan.algorithms = {Algorithm::knn};
    CostModelProvider provider;
    run_grid(plan, provider, dir / "knn.csv");
    const auto records = read_records_csv(dir / "knn.csv");
    c.expect(records.size() == 25, "25 knn records");
    const auto [train_recs, holdout] = split(records);
    FitOptions opt;
    opt.columns = {"alpha", "beta_D"};
    const FittedEquation eq = fit(train_recs, Target::energy, opt);
    const EvalMetrics m = evaluate(eq, holdout);
    c.expect(m.r_squared >= 0.99,
             "knn energy linear in n: holdout R^2 = " + format_double(m.r_squared));
    c.expect(eq.coefficient("beta_D") > 0.0, "knn energy slope positive");
  }
  {
    plan.algorithms = {Algorithm::svm};
    CostModelProvider provider;
    run_grid(plan, provider, dir / "svm.csv");
    const auto records = read_records_csv(dir / "svm.csv");
    const auto [train_recs, holdout] = split(records);
    FitOptions opt;
    opt.columns = {"alpha", "beta_D"};
    const FittedEquation eq = fit(train_recs, Target::energy, opt);
    double scale = 0.0;
    for (const auto& r : train_recs) scale = std::max(scale, std::abs(r.energy_mj));
    c.expect(std::abs(eq.coefficient("beta_D")) <= 1e-12 * std::max(1.0, scale),
             "svm energy slope indistinguishable from 0 (got " +
                 format_double(eq.coefficient("beta_D")) + ")");
  }
  return c.ok;
}

// ---------------------------------------------------------------- criterion 7
bool latency_sanity(Check& c) {
  Hyper hyper;
  std::vector<double> medians;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    const Dataset d = generate(n, 10, DataType::tabular, 2.5, 71);
    const Dataset q = generate(16, 10, DataType::tabular, 2.5, 72);
    const TrainedModel m = train(Algorithm::knn, d, hyper, 71);
    std::size_t i = 0;
    volatile double sink = 0.0;
    const LatencyStats stats = measure_latency(
        [&] {
          sink = sink + predict(m, q.row(i % q.n)).score;
          ++i;
        },
        50, 200);
    medians.push_back(stats.median_ms);
  }
  c.expect(medians[0] <= medians[1] && medians[1] <= medians[2],
           "knn median latency non-decreasing over n in {100,1000,10000}: " +
               format_double(medians[0]) + ", " + format_double(medians[1]) + ", " +
               format_double(medians[2]));

  const Dataset d = generate(1000, 10, DataType::tabular, 2.5, 73);
  const Dataset q = generate(16, 10, DataType::tabular, 2.5, 74);
  const TrainedModel m = train(Algorithm::knn, d, hyper, 73);
  auto bench = [&](const GuardrailConfig& cfg) {
    FairnessWindow w(cfg.fair > 0 ? fairness_window_capacity(cfg.fair) : 1);
    std::size_t i = 0;
    return measure_latency(
        [&] {
          guarded_predict(m, q.row(i % q.n), q.groups[i % q.n], cfg, &w, i);
          ++i;
        },
        50, 200);
  };
  const std::array<std::pair<const char*, GuardrailConfig>, 5> singles = {
      std::pair{"expl", GuardrailConfig{1, 0, 0, 0, 0}},
      std::pair{"fair", GuardrailConfig{0, 1, 0, 0, 0}},
      std::pair{"interp", GuardrailConfig{0, 0, 1, 0, 0}},
      std::pair{"safety", GuardrailConfig{0, 0, 0, 1, 0}},
      std::pair{"privacy", GuardrailConfig{0, 0, 0, 0, 1}}};
  for (const auto& [name, cfg] : singles) {
    // paired adjacent runs so clock-speed drift hits both sides; a transient
    // scheduler blip must repeat three times to count as a violation
    bool held = false;
    double last_on = 0.0, last_off = 0.0;
    for (int attempt = 0; attempt < 3 && !held; ++attempt) {
      const LatencyStats off = bench(GuardrailConfig{});
      const LatencyStats on = bench(cfg);
      last_on = on.median_ms;
      last_off = off.median_ms;
      held = on.median_ms + on.mad_ms + off.mad_ms >= off.median_ms;
    }
    c.expect(held, std::string(name) +
                       " at intensity 1 never decreases median latency (on " +
                       format_double(last_on) + " vs off " + format_double(last_off) + ")");
  }
  return c.ok;
}

// ---------------------------------------------------------------- criterion 8
int run_cli(const fs::path& cwd, const std::string& args) {
  std::ostringstream cmd;
  cmd << "cd " << cwd << " && " << RAIBENCH_CLI_PATH << " " << args
      << " > cli_log.txt 2>&1";
  const int status = std::system(cmd.str().c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool end_to_end(Check& c) {
  const char* grid = R"({
    "algorithms": ["svm", "knn", "rf", "nn"],
    "n": [100, 200, 400],
    "p": [8],
    "t": [0],
    "guardrails": [[0,0,0,0,0], {"expl": 1.0}],
    "seeds": [7],
    "reps": 30,
    "warmup": 2,
    "queries": 8,
    "provider": "cost-model",
    "out": "records.csv"
  })";

  std::array<fs::path, 2> dirs;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir =
        fs::temp_directory_path() / ("raibench_acceptance_c8_" + std::to_string(run));
    fs::remove_all(dir);
    fs::create_directories(dir);
    dirs[std::size_t(run)] = dir;
    atomic_write(dir / "grid.json", grid);

    c.expect(run_cli(dir, "gen --n 120 --p 8 --t 0 --seed 5 --out data") == 0, "gen step");
    c.expect(run_cli(dir, "bench --config grid.json") == 0, "bench step");
    c.expect(run_cli(dir, "fit --records records.csv --target both --out eq.json "
                          "--columns alpha,beta_kNN,beta_RF,beta_NN,beta_D,phi_expl") == 0,
             "fit step");
    c.expect(run_cli(dir, "predict --eq eq_latency.json --algo knn --n 500 --p 8 --t 0 "
                          "--g-expl 0.7 --out predict.json") == 0,
             "predict step");
    c.expect(run_cli(dir, "report --records records.csv --out report.csv "
                          "--scatter scatter.csv") == 0,
             "report step");
  }

  for (const char* f : {"data.csv", "data.json", "records.csv", "eq_latency.json",
                        "eq_energy.json", "predict.json", "report.csv", "scatter.csv"}) {
    const bool same = read_file(dirs[0] / f) == read_file(dirs[1] / f);
    c.expect(same, std::string(f) + " bit-identical across reruns");
  }
  const auto records = read_records_csv(dirs[0] / "records.csv");
  c.expect(records.size() == 24, "4 algos x 3 n x 2 guardrail configs = 24 records");
  return c.ok;
}

}  // namespace

int main() {
  using Criterion = std::pair<const char*, std::function<bool(Check&)>>;
  const std::vector<Criterion> criteria = {
      {"encoding fidelity", encoding_fidelity},
      {"equation-form fidelity", equation_form},
      {"OLS recovery", ols_recovery},
      {"additive guardrail property", additive_guardrail},
      {"guardrail mechanics", guardrail_mechanics},
      {"cost-model structure matches theory", cost_model_structure},
      {"latency sanity on real timers", latency_sanity},
      {"end-to-end pipeline determinism", end_to_end},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check check;
    bool ok = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ok = criteria[i].second(check);
    } catch (const std::exception& e) {
      ok = false;
      check.detail << "exception: " << e.what();
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << i + 1 << ": "
              << criteria[i].first << " (" << format_double(dt.count()) << "s)";
    if (!ok) {
      std::cout << " -- " << check.detail.str();
      ++failed;
    }
    std::cout << '\n';
  }
  if (failed != 0) {
    std::cout << failed << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
