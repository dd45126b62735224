#include <doctest.h>

#include <bit>
#include <cmath>
#include <functional>
#include <random>

#include "raibench/guardrail.hpp"
#include "raibench/io.hpp"

using namespace raibench;

namespace {

TrainedModel manual_linear_svm(std::vector<double> w, double b) {
  TrainedModel m;
  m.kind = Algorithm::svm;
  m.meta = TrainMeta{2, w.size(), DataType::tabular, 0};
  SvmModel p;
  p.rbf = false;
  p.weights = std::move(w);
  p.bias = b;
  m.params = std::move(p);
  m.per_inference_ops = op_count(m, m.meta.p);
  return m;
}

TrainedModel fixture_model(Algorithm a, std::size_t n = 80, std::size_t p = 10) {
  const Dataset d = generate(n, p, DataType::tabular, 2.5, 31);
  return train(a, d, {}, 31);
}

std::uint64_t calls_of(const std::function<void()>& body) {
  const std::uint64_t before = inference_meter().predict_calls;
  body();
  return inference_meter().predict_calls - before;
}

}  // namespace

TEST_CASE("guarded_predict: all-zero config equals bare predict byte for byte") {
  const TrainedModel m = fixture_model(Algorithm::nn);
  const Dataset q = generate(5, 10, DataType::tabular, 2.5, 99);
  for (std::size_t i = 0; i < q.n; ++i) {
    const Prediction bare = predict(m, q.row(i));
    std::uint64_t guarded_calls = 0;
    GuardedPrediction gp;
    guarded_calls = calls_of([&] { gp = guarded_predict(m, q.row(i), q.groups[i], {}, nullptr, 1); });
    CHECK(gp.label == bare.label);
    CHECK(std::bit_cast<std::uint64_t>(gp.score) == std::bit_cast<std::uint64_t>(bare.score));
    CHECK_FALSE(gp.explanation.has_value());
    CHECK_FALSE(gp.interpretation.has_value());
    CHECK_FALSE(gp.fairness.has_value());
    CHECK_FALSE(gp.safety.has_value());
    CHECK(gp.marks.empty());
    CHECK(gp.errors.empty());
    CHECK(guarded_calls == 1);
  }
}

TEST_CASE("explain: intensity 0.7 with p=10 covers exactly 7 features in 45 calls") {
  const TrainedModel m = fixture_model(Algorithm::svm);
  Explanation e;
  const std::uint64_t extra = calls_of([&] { e = explain(m, generate(2, 10, DataType::tabular, 2.5, 1).row(0), 0.7, 5); });
  CHECK(e.ranked.size() == 7);
  CHECK(e.samples_used == 45);  // ceil(0.7 * 64)
  CHECK(extra == 45);

  Explanation full;
  const std::uint64_t extra_full = calls_of([&] { full = explain(m, generate(2, 10, DataType::tabular, 2.5, 1).row(0), 1.0, 5); });
  CHECK(full.ranked.size() == 10);
  CHECK(extra_full == 64);
}

TEST_CASE("explain: surrogate recovers the dominant linear weight") {
  const TrainedModel m = manual_linear_svm({5.0, 0.0, 0.0}, 0.0);
  const std::vector<double> x{0.2, -0.4, 0.1};

  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Explanation e = explain(m, x, 1.0, seed);
    REQUIRE(!e.ranked.empty());
    CHECK(e.ranked[0].feature == 0);
  }

  // independent oracle: forward differences on a fixed probe grid give the
  // local gradient directly, dominated by feature 0
  const double base = predict(m, x).score;
  std::vector<double> grad(3);
  for (std::size_t j = 0; j < 3; ++j) {
    std::vector<double> probe(x);
    probe[j] += 1e-4;
    grad[j] = (predict(m, probe).score - base) / 1e-4;
  }
  CHECK(std::abs(grad[0]) > 10.0 * std::abs(grad[1]));
  CHECK(std::abs(grad[0]) > 10.0 * std::abs(grad[2]));
}

TEST_CASE("explain: rejects out-of-range intensity") {
  const TrainedModel m = manual_linear_svm({1.0}, 0.0);
  const std::vector<double> x{0.0};
  CHECK_THROWS_AS(explain(m, x, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(explain(m, x, 1.5, 1), std::invalid_argument);
}

TEST_CASE("fairness window: hand-counted parity gaps") {
  FairnessWindow w2(8);
  audit_fairness(w2, 0, 1);
  CHECK(audit_fairness(w2, 1, 1) == 0.0);  // rates 1.0 vs 1.0

  FairnessWindow w3(8);
  audit_fairness(w3, 0, 1);
  audit_fairness(w3, 0, 0);
  audit_fairness(w3, 1, 1);
  CHECK(audit_fairness(w3, 1, 1) == 0.5);  // 0.5 vs 1.0
}

TEST_CASE("fairness window: eviction keeps only the newest entries") {
  FairnessWindow w(4);
  for (int i = 0; i < 4; ++i) audit_fairness(w, 0, 1);  // fill: group0 all positive
  CHECK(w.size() == 4);
  for (int i = 0; i < 4; ++i) audit_fairness(w, 0, 0);  // evict them all
  CHECK(w.size() == 4);
  CHECK(w.parity_gap() == 0.0);  // group0 rate now 0, group1 empty -> 0
  audit_fairness(w, 1, 1);
  CHECK(w.parity_gap() == 1.0);  // group0 0/3, group1 1/1
}

TEST_CASE("fairness window: random labels independent of group concentrate near zero gap") {
  FairnessWindow w(fairness_window_capacity(1.0));
  CHECK(w.capacity() == 1024);
  std::mt19937_64 rng(12345);
  double gap = 1.0;
  for (int i = 0; i < 1000; ++i) {
    gap = audit_fairness(w, int(rng() & 1), int(rng() & 1));
  }
  CHECK(gap < 0.1);
}

TEST_CASE("interpret: rf paths and depth-0 leaves") {
  const Dataset d = generate(200, 6, DataType::tabular, 2.0, 12);
  Hyper hyper;
  hyper.rf.trees = 16;
  const TrainedModel m = train(Algorithm::rf, d, hyper, 12);
  const InterpretationTrace t = interpret(m, d.row(0), 1.0);
  CHECK(t.mode == "tree_paths");
  CHECK(t.paths.size() == 16);

  hyper.rf.trees = 4;
  hyper.rf.max_depth = 0;
  const TrainedModel leafy = train(Algorithm::rf, d, hyper, 12);
  const InterpretationTrace lt = interpret(leafy, d.row(0), 1.0);
  REQUIRE(lt.paths.size() == 4);
  for (const auto& path : lt.paths) CHECK(path.empty());
}

TEST_CASE("interpret: knn returns nearest neighbours, svm/nn probe features") {
  const TrainedModel knn = fixture_model(Algorithm::knn);
  const std::vector<double> x(10, 0.1);
  const InterpretationTrace nt = interpret(knn, x, 1.0);
  CHECK(nt.mode == "neighbors");
  CHECK(nt.neighbors.size() == 5);  // ceil(1.0 * k), k=5

  const TrainedModel nn = fixture_model(Algorithm::nn);
  const std::uint64_t extra = calls_of([&] {
    const InterpretationTrace st = interpret(nn, x, 0.5, predict(nn, x).score);
    CHECK(st.mode == "sensitivity");
    CHECK(st.sensitivities.size() == 5);  // ceil(0.5 * 10)
  }) - 1;  // minus the base predict computed in the argument
  CHECK(extra == 5);
}

TEST_CASE("safety: constant predictor is always stable") {
  const Dataset d = generate(11, 2, DataType::tabular, 5.0, 9);
  Hyper hyper;
  hyper.rf.trees = 1;
  hyper.rf.max_depth = 0;
  const TrainedModel m = train(Algorithm::rf, d, hyper, 9);
  const SafetyReport r = safety_probe(m, d.row(0), 1.0, 77);
  CHECK(r.stable);
  CHECK(r.flips == 0);
  CHECK(r.probes == 32);
}

TEST_CASE("safety: boundary sample flips under perturbation") {
  const TrainedModel m = manual_linear_svm({1.0, 0.0}, 0.0);
  const std::vector<double> boundary{0.0, 0.5};  // margin exactly 0
  const SafetyReport r = safety_probe(m, boundary, 1.0, 4242);
  CHECK(r.flips > 0);
  CHECK_FALSE(r.stable);
}

TEST_CASE("safety: minimum enabled effort is one probe") {
  const TrainedModel m = manual_linear_svm({1.0}, 5.0);
  const std::vector<double> x{1.0};
  const SafetyReport r = safety_probe(m, x, 0.01, 1);
  CHECK(r.probes == 1);
}

TEST_CASE("safety: non-finite input reported unstable without probing") {
  const TrainedModel m = manual_linear_svm({1.0}, 0.0);
  const std::vector<double> bad{std::numeric_limits<double>::infinity()};
  const SafetyReport r = safety_probe(m, bad, 1.0, 1);
  CHECK_FALSE(r.stable);
  CHECK(r.probes == 0);
}

TEST_CASE("privatize: zero intensity is the identity") {
  for (std::uint64_t seed : {1ull, 99ull}) {
    const Privatized p = privatize(0.75, 1, 0.0, seed);
    CHECK(p.score == 0.75);
    CHECK(p.label == 1);
  }
}

TEST_CASE("privatize: empirical flip rate matches the ceiling") {
  int flips = 0;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) {
    if (privatize(0.5, 0, 1.0, std::uint64_t(i)).label != 0) ++flips;
  }
  const double rate = double(flips) / trials;
  CHECK(rate > 0.24);
  CHECK(rate < 0.26);
}

TEST_CASE("privatize: scores stay clamped") {
  for (int i = 0; i < 200; ++i) {
    CHECK(privatize(1.0, 1, 1.0, std::uint64_t(i)).score <= 1.0);
    CHECK(privatize(0.0, 0, 1.0, std::uint64_t(i)).score >= 0.0);
  }
}

TEST_CASE("guardrail effort: monotone in intensity and exact for expl/interp") {
  const TrainedModel m = fixture_model(Algorithm::nn);
  const std::vector<double> x(10, 0.3);
  std::uint64_t prev_expl = 0, prev_safety = 0;
  for (double i : {0.1, 0.25, 0.5, 0.75, 1.0}) {
    const std::uint64_t e = calls_of([&] { explain(m, x, i, 3); });
    CHECK(e == std::uint64_t(std::ceil(i * 64)));
    CHECK(e >= prev_expl);
    prev_expl = e;

    const std::uint64_t s = calls_of([&] { safety_probe(m, x, i, 3, {}, 1); });
    CHECK(s == std::uint64_t(std::ceil(i * 32)));
    CHECK(s >= prev_safety);
    prev_safety = s;

    const std::uint64_t t = calls_of([&] { interpret(m, x, i, 0.5); });
    CHECK(t == std::uint64_t(std::ceil(i * 10)));
  }
}

TEST_CASE("guardrail call counts are additive across enabled guardrails") {
  const TrainedModel m = fixture_model(Algorithm::nn);
  const Dataset q = generate(3, 10, DataType::tabular, 2.5, 55);
  const std::size_t i = 0;

  auto extra_for = [&](const GuardrailConfig& cfg) {
    FairnessWindow w(cfg.fair > 0 ? fairness_window_capacity(cfg.fair) : 1);
    return calls_of([&] { guarded_predict(m, q.row(i), q.groups[i], cfg, &w, 7); }) - 1;
  };

  GuardrailConfig all;
  all.expl = 1.0;
  all.fair = 1.0;
  all.interp = 1.0;
  all.safety = 1.0;
  all.privacy = 1.0;

  std::uint64_t sum = 0;
  sum += extra_for(GuardrailConfig{1.0, 0, 0, 0, 0});
  sum += extra_for(GuardrailConfig{0, 1.0, 0, 0, 0});
  sum += extra_for(GuardrailConfig{0, 0, 1.0, 0, 0});
  sum += extra_for(GuardrailConfig{0, 0, 0, 1.0, 0});
  sum += extra_for(GuardrailConfig{0, 0, 0, 0, 1.0});
  CHECK(extra_for(all) == sum);
  CHECK(sum == 64 + 0 + 10 + 32 + 0);
}

TEST_CASE("guarded_predict: privacy at zero never alters the label") {
  const TrainedModel m = fixture_model(Algorithm::svm);
  const Dataset q = generate(64, 10, DataType::tabular, 2.5, 77);
  GuardrailConfig cfg;
  cfg.privacy = 0.0;
  for (std::size_t i = 0; i < q.n; ++i) {
    const Prediction bare = predict(m, q.row(i));
    const GuardedPrediction gp = guarded_predict(m, q.row(i), q.groups[i], cfg, nullptr, i);
    CHECK(gp.label == bare.label);
  }
}

TEST_CASE("guarded_predict: privacy at full intensity flips some labels") {
  const TrainedModel m = fixture_model(Algorithm::svm);
  const Dataset q = generate(128, 10, DataType::tabular, 2.5, 78);
  GuardrailConfig cfg;
  cfg.privacy = 1.0;
  int changed = 0;
  for (std::size_t i = 0; i < q.n; ++i) {
    const Prediction bare = predict(m, q.row(i));
    const GuardedPrediction gp = guarded_predict(m, q.row(i), q.groups[i], cfg, nullptr, i);
    changed += gp.label != bare.label;
  }
  CHECK(changed > 0);
}

TEST_CASE("guarded_predict: artifacts present iff intensity positive, marks in order") {
  const TrainedModel m = fixture_model(Algorithm::rf);
  const Dataset q = generate(2, 10, DataType::tabular, 2.5, 81);
  GuardrailConfig cfg;
  cfg.safety = 0.2;
  cfg.expl = 0.4;
  cfg.interp = 0.6;
  cfg.fair = 0.8;
  cfg.privacy = 1.0;
  FairnessWindow w(fairness_window_capacity(cfg.fair));
  const GuardedPrediction gp = guarded_predict(m, q.row(0), q.groups[0], cfg, &w, 3);
  CHECK(gp.safety.has_value());
  CHECK(gp.explanation.has_value());
  CHECK(gp.interpretation.has_value());
  CHECK(gp.fairness.has_value());
  REQUIRE(gp.marks.size() == 5);
  CHECK(gp.marks[0].name == "safety");
  CHECK(gp.marks[1].name == "expl");
  CHECK(gp.marks[2].name == "interp");
  CHECK(gp.marks[3].name == "fair");
  CHECK(gp.marks[4].name == "privacy");

  const std::string json = to_json_string(gp);
  CHECK(json.find("\"explanation\"") != std::string::npos);
  CHECK(json.find("\"fairness\"") != std::string::npos);

  GuardrailConfig partial;
  partial.safety = 1.0;
  const GuardedPrediction only = guarded_predict(m, q.row(0), q.groups[0], partial, nullptr, 3);
  CHECK(only.safety.has_value());
  CHECK_FALSE(only.explanation.has_value());
  CHECK_FALSE(only.interpretation.has_value());
  CHECK_FALSE(only.fairness.has_value());
  const std::string pj = to_json_string(only);
  CHECK(pj.find("\"explanation\"") == std::string::npos);
}

TEST_CASE("guarded_predict: deterministic given the rng seed") {
  const TrainedModel m = fixture_model(Algorithm::nn);
  const Dataset q = generate(2, 10, DataType::tabular, 2.5, 91);
  GuardrailConfig cfg;
  cfg.expl = 0.5;
  cfg.safety = 0.5;
  cfg.privacy = 0.9;
  const GuardedPrediction a = guarded_predict(m, q.row(0), q.groups[0], cfg, nullptr, 1234);
  const GuardedPrediction b = guarded_predict(m, q.row(0), q.groups[0], cfg, nullptr, 1234);
  CHECK(a.label == b.label);
  CHECK(std::bit_cast<std::uint64_t>(a.score) == std::bit_cast<std::uint64_t>(b.score));
  REQUIRE(a.explanation.has_value());
  REQUIRE(b.explanation.has_value());
  REQUIRE(a.explanation->ranked.size() == b.explanation->ranked.size());
  for (std::size_t i = 0; i < a.explanation->ranked.size(); ++i) {
    CHECK(a.explanation->ranked[i].feature == b.explanation->ranked[i].feature);
    CHECK(std::bit_cast<std::uint64_t>(a.explanation->ranked[i].weight) ==
          std::bit_cast<std::uint64_t>(b.explanation->ranked[i].weight));
  }
  CHECK(a.safety->flips == b.safety->flips);
}

TEST_CASE("guarded_predict: fairness faults degrade to error reports") {
  const TrainedModel m = fixture_model(Algorithm::svm);
  const Dataset q = generate(2, 10, DataType::tabular, 2.5, 95);
  GuardrailConfig cfg;
  cfg.fair = 1.0;
  const GuardedPrediction gp = guarded_predict(m, q.row(0), q.groups[0], cfg, nullptr, 5);
  CHECK_FALSE(gp.fairness.has_value());
  REQUIRE(!gp.errors.empty());
  CHECK(gp.errors[0].find("fair") != std::string::npos);
  // the prediction itself still came through
  CHECK((gp.label == 0 || gp.label == 1));
}

TEST_CASE("guardrail config validation") {
  GuardrailConfig bad;
  bad.expl = 1.5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad.expl = -0.1;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}
