#include "raibench/guardrail.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

#include "internal.hpp"
#include "raibench/io.hpp"

namespace raibench {

namespace {

constexpr std::uint64_t kSafetyStream = 0x736166ULL;
constexpr std::uint64_t kExplStream = 0x6578706cULL;
constexpr std::uint64_t kPrivacyStream = 0x70726976ULL;

void check_intensity(double intensity, const char* what) {
  if (!(intensity > 0.0) || intensity > 1.0) {
    throw std::invalid_argument(std::string(what) + ": intensity must be in (0,1]");
  }
}

double feature_scale(std::span<const double> raw) {
  double m = 1.0;
  for (double v : raw) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

void validate(const GuardrailConfig& cfg) {
  for (double v : cfg.as_array()) {
    if (!(v >= 0.0) || v > 1.0) {
      throw std::invalid_argument("guardrail intensity must be in [0,1]");
    }
  }
}

int effort_units(double intensity, int cap) {
  return static_cast<int>(std::ceil(intensity * static_cast<double>(cap)));
}

// ----- fairness window

FairnessWindow::FairnessWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("FairnessWindow: capacity must be > 0");
  entries_.reserve(capacity_);
}

void FairnessWindow::observe(int group, int label) {
  const int g = group ? 1 : 0;
  const int pos = label ? 1 : 0;
  if (entries_.size() == capacity_) {
    const std::uint8_t old = entries_[head_];
    const int og = (old >> 1) & 1;
    count_[og] -= 1;
    positive_[og] -= old & 1;
    entries_[head_] = static_cast<std::uint8_t>((g << 1) | pos);
    head_ = (head_ + 1) % capacity_;
  } else {
    entries_.push_back(static_cast<std::uint8_t>((g << 1) | pos));
  }
  count_[g] += 1;
  positive_[g] += static_cast<std::size_t>(pos);
}

double FairnessWindow::parity_gap() const {
  const double r0 = count_[0] ? static_cast<double>(positive_[0]) / static_cast<double>(count_[0]) : 0.0;
  const double r1 = count_[1] ? static_cast<double>(positive_[1]) / static_cast<double>(count_[1]) : 0.0;
  return std::abs(r1 - r0);
}

std::size_t fairness_window_capacity(double intensity, const GuardrailConstants& c) {
  check_intensity(intensity, "fairness");
  return static_cast<std::size_t>(effort_units(intensity, c.fairness_window_max));
}

double audit_fairness(FairnessWindow& window, int group, int label) {
  window.observe(group, label);
  return window.parity_gap();
}

// ----- explainability

Explanation explain(const TrainedModel& model, std::span<const double> raw, double intensity,
                    std::uint64_t rng_seed, const GuardrailConstants& constants) {
  check_intensity(intensity, "explain");
  const std::size_t p = model.meta.p;
  const int samples = effort_units(intensity, constants.expl_samples_max);
  const auto top = static_cast<std::size_t>(
      effort_units(intensity, static_cast<int>(p)));

  std::mt19937_64 rng(mix64(rng_seed));
  std::normal_distribution<double> noise(0.0, constants.expl_sigma);

  Eigen::MatrixXd a(samples, static_cast<Eigen::Index>(p) + 1);
  Eigen::VectorXd y(samples);
  std::vector<double> probe(raw.begin(), raw.end());
  for (int s = 0; s < samples; ++s) {
    a(s, 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double d = noise(rng);
      a(s, static_cast<Eigen::Index>(j) + 1) = d;
      probe[j] = raw[j] + d;
    }
    y(s) = predict(model, probe).score;
  }

  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y);

  Explanation out;
  out.samples_used = samples;
  out.ranked.reserve(p);
  for (std::size_t j = 0; j < p; ++j) {
    out.ranked.push_back(Attribution{j, coef(static_cast<Eigen::Index>(j) + 1)});
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const Attribution& l, const Attribution& r) {
                     return std::abs(l.weight) > std::abs(r.weight);
                   });
  out.ranked.resize(std::min(top, out.ranked.size()));
  return out;
}

// ----- interpretability

InterpretationTrace interpret(const TrainedModel& model, std::span<const double> raw,
                              double intensity, std::optional<double> base_score) {
  check_intensity(intensity, "interpret");
  InterpretationTrace trace;

  switch (model.kind) {
    case Algorithm::rf: {
      trace.mode = "tree_paths";
      const auto& forest = std::get<ForestModel>(model.params);
      const auto x = preprocess(raw, model.meta.t);
      const auto used = static_cast<std::size_t>(
          effort_units(intensity, static_cast<int>(forest.trees.size())));
      for (std::size_t t = 0; t < used; ++t) {
        const Tree& tree = forest.trees[t];
        std::vector<PathStep> path;
        int node = 0;
        while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
          const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
          const bool right = x[static_cast<std::size_t>(nd.feature)] > nd.threshold;
          path.push_back(PathStep{nd.feature, nd.threshold, right});
          node = right ? nd.right : nd.left;
        }
        trace.paths.push_back(std::move(path));
      }
      break;
    }

    case Algorithm::knn: {
      trace.mode = "neighbors";
      const auto& m = std::get<KnnModel>(model.params);
      const auto x = preprocess(raw, model.meta.t);
      const auto used = static_cast<std::size_t>(effort_units(intensity, m.k));
      std::vector<std::pair<double, std::size_t>> best;
      for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.data.data() + i * m.cols;
        double d2 = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
          const double d = x[j] - row[j];
          d2 += d * d;
        }
        if (best.size() == used && d2 >= best.back().first) continue;
        auto pos = std::upper_bound(best.begin(), best.end(), std::make_pair(d2, i));
        best.insert(pos, {d2, i});
        if (best.size() > used) best.pop_back();
      }
      for (auto& [d2, i] : best) trace.neighbors.emplace_back(i, std::sqrt(d2));
      break;
    }

    case Algorithm::svm:
    case Algorithm::nn: {
      trace.mode = "sensitivity";
      const std::size_t p = model.meta.p;
      const auto probed = static_cast<std::size_t>(
          effort_units(intensity, static_cast<int>(p)));
      const double base = base_score ? *base_score : predict(model, raw).score;
      std::vector<double> probe(raw.begin(), raw.end());
      for (std::size_t j = 0; j < probed; ++j) {
        const double h = 1e-3 * std::max(1.0, std::abs(raw[j]));
        probe[j] = raw[j] + h;
        const double shifted = predict(model, probe).score;
        probe[j] = raw[j];
        trace.sensitivities.emplace_back(j, (shifted - base) / h);
      }
      break;
    }
  }
  return trace;
}

// ----- safety

SafetyReport safety_probe(const TrainedModel& model, std::span<const double> raw,
                          double intensity, std::uint64_t rng_seed,
                          const GuardrailConstants& constants,
                          std::optional<int> base_label) {
  check_intensity(intensity, "safety");
  SafetyReport report;
  for (double v : raw) {
    if (!std::isfinite(v)) {
      report.stable = false;
      return report;
    }
  }

  const int probes = effort_units(intensity, constants.safety_probes_max);
  report.probes = probes;
  const double radius = constants.safety_radius * feature_scale(raw);
  const int base = base_label ? *base_label : predict(model, raw).label;

  std::mt19937_64 rng(mix64(rng_seed));
  std::uniform_real_distribution<double> jitter(-radius, radius);
  std::vector<double> probe(raw.size());
  for (int s = 0; s < probes; ++s) {
    for (std::size_t j = 0; j < raw.size(); ++j) probe[j] = raw[j] + jitter(rng);
    if (predict(model, probe).label != base) ++report.flips;
  }
  report.stable = report.flips == 0;
  return report;
}

// ----- privacy

Privatized privatize(double score, int label, double intensity, std::uint64_t rng_seed,
                     const GuardrailConstants& constants) {
  if (!(intensity >= 0.0) || intensity > 1.0) {
    throw std::invalid_argument("privatize: intensity must be in [0,1]");
  }
  std::mt19937_64 rng(mix64(rng_seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);

  Privatized out;
  const double flip_p = intensity * constants.privacy_flip_ceiling;
  out.label = unit(rng) < flip_p ? 1 - label : label;
  out.score = std::clamp(score + sym(rng) * intensity * constants.privacy_score_noise, 0.0, 1.0);
  return out;
}

// ----- composed inference

GuardedPrediction guarded_predict(const TrainedModel& model, std::span<const double> raw,
                                  int group, const GuardrailConfig& cfg, FairnessWindow* window,
                                  std::uint64_t rng_seed, const GuardrailConstants& constants) {
  validate(cfg);

  const Prediction base = predict(model, raw);
  GuardedPrediction out;
  out.label = base.label;
  out.score = base.score;
  if (!cfg.any()) return out;

  using clock = std::chrono::steady_clock;
  auto run = [&](const char* name, double intensity, auto&& body) {
    if (intensity <= 0.0) return;
    const auto t0 = clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      out.errors.push_back(std::string(name) + ": " + e.what());
    }
    const std::chrono::duration<double, std::micro> us = clock::now() - t0;
    out.marks.push_back(GuardrailMark{name, us.count()});
  };

  run("safety", cfg.safety, [&] {
    out.safety = safety_probe(model, raw, cfg.safety, mix64(rng_seed ^ kSafetyStream), constants,
                              base.label);
  });
  run("expl", cfg.expl, [&] {
    out.explanation = explain(model, raw, cfg.expl, mix64(rng_seed ^ kExplStream), constants);
  });
  run("interp", cfg.interp,
      [&] { out.interpretation = interpret(model, raw, cfg.interp, base.score); });
  run("fair", cfg.fair, [&] {
    if (window == nullptr) throw std::runtime_error("no fairness window for this stream");
    if (group != 0 && group != 1) throw std::runtime_error("sample has no protected group");
    out.fairness = FairnessReport{audit_fairness(*window, group, base.label), window->size()};
  });
  run("privacy", cfg.privacy, [&] {
    const Privatized pv =
        privatize(base.score, base.label, cfg.privacy, mix64(rng_seed ^ kPrivacyStream), constants);
    out.label = pv.label;
    out.score = pv.score;
  });
  return out;
}

std::string to_json_string(const GuardedPrediction& gp) {
  nlohmann::json j;
  j["label"] = gp.label;
  j["score"] = gp.score;
  if (gp.explanation) {
    nlohmann::json ranked = nlohmann::json::array();
    for (const Attribution& a : gp.explanation->ranked) {
      ranked.push_back({{"feature", a.feature}, {"weight", a.weight}});
    }
    j["explanation"] = {{"ranked", std::move(ranked)},
                        {"samples_used", gp.explanation->samples_used}};
  }
  if (gp.interpretation) {
    const auto& tr = *gp.interpretation;
    nlohmann::json t;
    t["mode"] = tr.mode;
    if (tr.mode == "tree_paths") {
      nlohmann::json paths = nlohmann::json::array();
      for (const auto& path : tr.paths) {
        nlohmann::json steps = nlohmann::json::array();
        for (const PathStep& s : path) {
          steps.push_back({{"feature", s.feature}, {"threshold", s.threshold},
                           {"went_right", s.went_right}});
        }
        paths.push_back(std::move(steps));
      }
      t["paths"] = std::move(paths);
    } else if (tr.mode == "neighbors") {
      nlohmann::json nb = nlohmann::json::array();
      for (auto& [idx, dist] : tr.neighbors) nb.push_back({{"row", idx}, {"distance", dist}});
      t["neighbors"] = std::move(nb);
    } else {
      nlohmann::json sens = nlohmann::json::array();
      for (auto& [f, s] : tr.sensitivities) sens.push_back({{"feature", f}, {"dscore", s}});
      t["sensitivities"] = std::move(sens);
    }
    j["interpretation"] = std::move(t);
  }
  if (gp.fairness) {
    j["fairness"] = {{"parity_gap", gp.fairness->parity_gap},
                     {"window_fill", gp.fairness->window_fill}};
  }
  if (gp.safety) {
    j["safety"] = {{"stable", gp.safety->stable}, {"flips", gp.safety->flips},
                   {"probes", gp.safety->probes}};
  }
  nlohmann::json marks = nlohmann::json::array();
  for (const GuardrailMark& m : gp.marks) {
    marks.push_back({{"name", m.name}, {"elapsed_us", m.elapsed_us}});
  }
  j["overhead_marks"] = std::move(marks);
  if (!gp.errors.empty()) j["errors"] = gp.errors;
  return j.dump(2) + "\n";
}

}  // namespace raibench
