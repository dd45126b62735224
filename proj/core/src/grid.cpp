#include <bit>
#include <chrono>
#include <fstream>
#include <set>

#include <json.hpp>

#include "raibench/io.hpp"
#include "raibench/measure.hpp"

namespace raibench {

std::size_t GridPlan::cells() const {
  return algorithms.size() * n_values.size() * p_values.size() * t_values.size() *
         guardrails.size() * seeds.size();
}

void GridPlan::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  require(!algorithms.empty(), "grid: algorithms axis is empty");
  require(!n_values.empty(), "grid: n axis is empty");
  require(!p_values.empty(), "grid: p axis is empty");
  require(!t_values.empty(), "grid: t axis is empty");
  require(!guardrails.empty(), "grid: guardrails axis is empty");
  require(!seeds.empty(), "grid: seeds axis is empty");
  require(reps >= 1, "grid: reps must be >= 1");
  require(warmup >= 0, "grid: warmup must be >= 0");
  require(queries >= 1, "grid: queries must be >= 1");
  require(separation >= 0.0, "grid: separation must be >= 0");
  for (std::size_t n : n_values) require(n >= 2, "grid: every n must be >= 2");
  for (std::size_t p : p_values) require(p >= 1, "grid: every p must be >= 1");
  for (const GuardrailConfig& g : guardrails) raibench::validate(g);
}

namespace {

std::uint64_t cell_hash(Algorithm a, std::size_t n, std::size_t p, DataType t,
                        const GuardrailConfig& g, std::uint64_t seed) {
  std::uint64_t h = mix64(seed ^ 0x63656c6cULL);
  h = mix64(h ^ static_cast<std::uint64_t>(a));
  h = mix64(h ^ n);
  h = mix64(h ^ p);
  h = mix64(h ^ static_cast<std::uint64_t>(t));
  for (double v : g.as_array()) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  return h;
}

}  // namespace

std::size_t run_grid(const GridPlan& plan, EnergyProvider& provider,
                     const std::filesystem::path& records_csv, std::ostream* log) {
  plan.validate();
  if (!provider.available()) {
    throw EnergyUnavailable("energy provider '" + provider.name() + "' is not available");
  }

  std::set<std::string> done;
  bool have_file = std::filesystem::exists(records_csv);
  if (have_file) {
    for (const auto& r : read_records_csv(records_csv)) done.insert(r.key());
  }

  if (auto dir = records_csv.parent_path(); !dir.empty()) {
    std::filesystem::create_directories(dir);
  }
  std::ofstream out(records_csv, std::ios::app);
  if (!out) throw std::runtime_error("cannot open record sink: " + records_csv.string());
  if (!have_file || std::filesystem::file_size(records_csv) == 0) {
    out << kRecordsHeader << '\n';
    out.flush();
  }

  const bool deterministic = provider.capability() == EnergyCapability::cost_model;
  std::size_t written = 0;
  std::size_t index = 0;
  const std::size_t total = plan.cells();

  for (Algorithm algo : plan.algorithms)
    for (std::size_t n : plan.n_values)
      for (std::size_t p : plan.p_values)
        for (DataType t : plan.t_values)
          for (const GuardrailConfig& g : plan.guardrails)
            for (std::uint64_t seed : plan.seeds) {
              ++index;
              MeasurementRecord rec;
              rec.algo = algo;
              rec.n = n;
              rec.p = p;
              rec.t = t;
              rec.g = g;
              rec.reps = plan.reps;
              rec.warmup = plan.warmup;
              rec.provider = provider.name();
              rec.seed = seed;

              if (done.contains(rec.key())) {
                if (log) *log << "[" << index << "/" << total << "] skip " << rec.key() << '\n';
                continue;
              }

              try {
                const std::uint64_t h = cell_hash(algo, n, p, t, g, seed);
                const Dataset train_data =
                    generate(n, p, t, plan.separation, mix64(h ^ 0x747261696eULL));
                const Dataset query_data = generate(plan.queries < 2 ? 2 : plan.queries, p, t,
                                                    plan.separation, mix64(h ^ 0x7175657279ULL));
                const TrainedModel model = train(algo, train_data, plan.hyper, h);

                FairnessWindow window(
                    g.fair > 0.0 ? fairness_window_capacity(g.fair, plan.guardrail_constants) : 1);

                std::uint64_t exec = 0;
                auto task = [&] {
                  const std::size_t q = exec % query_data.n;
                  guarded_predict(model, query_data.row(q), query_data.groups[q], g, &window,
                                  mix64(h ^ exec), plan.guardrail_constants);
                  ++exec;
                };

                auto* cost_model = dynamic_cast<CostModelProvider*>(&provider);
                if (deterministic && cost_model != nullptr) {
                  // Difference the integer op counts so a cell's values do not
                  // depend on what ran before it in the session.
                  for (int i = 0; i < plan.warmup; ++i) task();
                  const InferenceMeter before = inference_meter();
                  for (int i = 0; i < plan.reps; ++i) task();
                  const InferenceMeter after = inference_meter();
                  const OpCount delta{after.ops.mults - before.ops.mults,
                                      after.ops.adds - before.ops.adds,
                                      after.ops.compares - before.ops.compares};
                  const std::uint64_t calls = after.predict_calls - before.predict_calls;
                  rec.energy_mj = cost_model->energy_mj(delta, calls) / plan.reps;
                  rec.latency_ms = cost_model->time_ms(delta, calls) / plan.reps;
                  rec.timestamp = 0;
                } else {
                  for (int i = 0; i < plan.warmup; ++i) task();
                  const double e0 = provider.read_mj();
                  LatencyStats stats = measure_latency(task, /*warmup=*/0, plan.reps);
                  const double e1 = provider.read_mj();
                  rec.energy_mj = (e1 - e0) / plan.reps;
                  rec.latency_ms = stats.median_ms;
                  rec.timestamp =
                      std::chrono::duration_cast<std::chrono::seconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
                }

                out << record_to_csv_line(rec) << '\n';
                out.flush();
                done.insert(rec.key());
                ++written;
                if (log) {
                  *log << "[" << index << "/" << total << "] " << rec.key() << " latency_ms="
                       << format_double(rec.latency_ms) << " energy_mj="
                       << format_double(rec.energy_mj) << '\n';
                }
              } catch (const std::exception& e) {
                if (log) {
                  *log << "[" << index << "/" << total << "] FAILED " << rec.key() << ": "
                       << e.what() << '\n';
                }
              }
            }
  return written;
}

// ----- config parsing

namespace {

using nlohmann::json;

GuardrailConfig guardrail_from_json(const json& j) {
  GuardrailConfig g;
  if (j.is_array()) {
    if (j.size() != 5) throw std::invalid_argument("guardrail array must have 5 intensities");
    g.expl = j[0].get<double>();
    g.fair = j[1].get<double>();
    g.interp = j[2].get<double>();
    g.safety = j[3].get<double>();
    g.privacy = j[4].get<double>();
  } else {
    g.expl = j.value("expl", 0.0);
    g.fair = j.value("fair", 0.0);
    g.interp = j.value("interp", 0.0);
    g.safety = j.value("safety", 0.0);
    g.privacy = j.value("privacy", 0.0);
  }
  validate(g);
  return g;
}

}  // namespace

RunConfig run_config_from_json_string(const std::string& text) {
  const json j = json::parse(text);
  RunConfig cfg;
  GridPlan& plan = cfg.plan;

  for (const auto& name : j.at("algorithms")) {
    plan.algorithms.push_back(algorithm_from_name(name.get<std::string>()));
  }
  plan.n_values = j.at("n").get<std::vector<std::size_t>>();
  plan.p_values = j.at("p").get<std::vector<std::size_t>>();
  for (const auto& code : j.at("t")) plan.t_values.push_back(data_type_from_code(code.get<int>()));
  for (const auto& g : j.at("guardrails")) plan.guardrails.push_back(guardrail_from_json(g));
  plan.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();

  plan.reps = j.value("reps", plan.reps);
  plan.warmup = j.value("warmup", plan.warmup);
  plan.separation = j.value("separation", plan.separation);
  plan.queries = j.value("queries", plan.queries);

  if (j.contains("constants")) {
    const json& c = j["constants"];
    GuardrailConstants& gc = plan.guardrail_constants;
    gc.expl_samples_max = c.value("expl_samples_max", gc.expl_samples_max);
    gc.fairness_window_max = c.value("fairness_window_max", gc.fairness_window_max);
    gc.safety_probes_max = c.value("safety_probes_max", gc.safety_probes_max);
    gc.privacy_flip_ceiling = c.value("privacy_flip_ceiling", gc.privacy_flip_ceiling);
    gc.privacy_score_noise = c.value("privacy_score_noise", gc.privacy_score_noise);
    gc.safety_radius = c.value("safety_radius", gc.safety_radius);
    gc.expl_sigma = c.value("expl_sigma", gc.expl_sigma);
  }
  if (j.contains("hyper")) {
    const json& h = j["hyper"];
    Hyper& hy = plan.hyper;
    if (h.contains("svm")) {
      hy.svm.epochs = h["svm"].value("epochs", hy.svm.epochs);
      hy.svm.lambda = h["svm"].value("lambda", hy.svm.lambda);
      hy.svm.rbf = h["svm"].value("rbf", hy.svm.rbf);
      hy.svm.gamma = h["svm"].value("gamma", hy.svm.gamma);
    }
    if (h.contains("knn")) hy.knn.k = h["knn"].value("k", hy.knn.k);
    if (h.contains("rf")) {
      hy.rf.trees = h["rf"].value("trees", hy.rf.trees);
      hy.rf.max_depth = h["rf"].value("max_depth", hy.rf.max_depth);
    }
    if (h.contains("nn")) {
      hy.nn.hidden = h["nn"].value("hidden", hy.nn.hidden);
      hy.nn.epochs = h["nn"].value("epochs", hy.nn.epochs);
    }
  }

  cfg.provider = j.value("provider", cfg.provider);
  cfg.out = j.value("out", cfg.out.string());
  return cfg;
}

}  // namespace raibench
