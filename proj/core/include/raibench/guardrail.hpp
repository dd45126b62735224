#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "raibench/classifier.hpp"

namespace raibench {

// Intensity per principle, each in [0,1]; 0 disables the guardrail entirely.
struct GuardrailConfig {
  double expl = 0.0;
  double fair = 0.0;
  double interp = 0.0;
  double safety = 0.0;
  double privacy = 0.0;

  bool any() const { return expl > 0 || fair > 0 || interp > 0 || safety > 0 || privacy > 0; }
  std::array<double, 5> as_array() const { return {expl, fair, interp, safety, privacy}; }
};

void validate(const GuardrailConfig& cfg);  // throws if any score is outside [0,1]

// Effort ceilings and noise scales. Intensity means "fraction of maximum
// effort": an enabled guardrail does ceil(intensity * cap) units of work.
struct GuardrailConstants {
  int expl_samples_max = 64;      // surrogate perturbation budget (K_max)
  int fairness_window_max = 1024; // sliding-window capacity (W_max)
  int safety_probes_max = 32;     // perturbation probes (m_max)
  double privacy_flip_ceiling = 0.25;  // label flip probability at intensity 1
  double privacy_score_noise = 0.1;    // score noise scale at intensity 1
  double safety_radius = 0.01;         // probe radius, fraction of feature scale
  double expl_sigma = 0.1;             // surrogate perturbation std deviation
};

// Units of work an enabled guardrail performs at the given intensity.
int effort_units(double intensity, int cap);

struct Attribution {
  std::size_t feature = 0;
  double weight = 0.0;
};

struct Explanation {
  std::vector<Attribution> ranked;  // by |weight|, descending
  int samples_used = 0;             // extra predict calls spent
};

struct PathStep {
  int feature = 0;
  double threshold = 0.0;
  bool went_right = false;
};

// One of three shapes depending on the model family.
struct InterpretationTrace {
  std::string mode;  // "tree_paths" | "neighbors" | "sensitivity"
  std::vector<std::vector<PathStep>> paths;                  // rf
  std::vector<std::pair<std::size_t, double>> neighbors;     // knn: (row index, distance)
  std::vector<std::pair<std::size_t, double>> sensitivities; // svm/nn: (feature, d score)
};

struct FairnessReport {
  double parity_gap = 0.0;
  std::size_t window_fill = 0;
};

struct SafetyReport {
  bool stable = true;
  int flips = 0;
  int probes = 0;
};

// Sliding window of (group, positive?) observations with O(1) updates.
// Single-writer mutable state: one window per benchmark stream.
class FairnessWindow {
 public:
  explicit FairnessWindow(std::size_t capacity);

  void observe(int group, int label);
  double parity_gap() const;  // |rate(g=1) - rate(g=0)|, empty groups rate 0
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // ring index of the oldest entry
  std::vector<std::uint8_t> entries_;  // packed (group << 1) | positive
  std::size_t count_[2] = {0, 0};
  std::size_t positive_[2] = {0, 0};
};

std::size_t fairness_window_capacity(double intensity, const GuardrailConstants& c = {});

struct GuardrailMark {
  std::string name;
  double elapsed_us = 0.0;  // diagnostic only, not the official latency metric
};

struct GuardedPrediction {
  int label = 0;
  double score = 0.0;  // privatized when the privacy guardrail is enabled
  std::optional<Explanation> explanation;
  std::optional<InterpretationTrace> interpretation;
  std::optional<FairnessReport> fairness;
  std::optional<SafetyReport> safety;
  std::vector<GuardrailMark> marks;
  std::vector<std::string> errors;  // guardrail faults degrade to reports, never throw
};

// Base predict once, then enabled guardrails in the fixed order
// safety -> expl -> interp -> fair -> privacy. Deterministic given rng_seed.
// `group` is the sample's protected attribute (needed when cfg.fair > 0);
// `window` is the stream's fairness state (may be null when cfg.fair == 0).
GuardedPrediction guarded_predict(const TrainedModel& model, std::span<const double> raw,
                                  int group, const GuardrailConfig& cfg, FairnessWindow* window,
                                  std::uint64_t rng_seed, const GuardrailConstants& constants = {});

// Perturbation-based local linear surrogate: ceil(intensity * K_max) extra
// predict calls, top ceil(intensity * p) features by |surrogate weight|.
Explanation explain(const TrainedModel& model, std::span<const double> raw, double intensity,
                    std::uint64_t rng_seed, const GuardrailConstants& constants = {});

// Updates the window with one observation and returns the current parity gap.
double audit_fairness(FairnessWindow& window, int group, int label);

// rf: root-to-leaf paths for ceil(intensity * trees) trees; knn: the
// ceil(intensity * k) nearest stored rows; svm/nn: forward-difference score
// sensitivity for ceil(intensity * p) features (one extra predict each).
// The composed path passes the already-computed base score so the guardrail
// spends exactly its closed-form extra calls.
InterpretationTrace interpret(const TrainedModel& model, std::span<const double> raw,
                              double intensity,
                              std::optional<double> base_score = std::nullopt);

// Input finiteness check plus ceil(intensity * m_max) perturbed re-predictions
// within `safety_radius` of the feature scale; stable iff no label flips.
SafetyReport safety_probe(const TrainedModel& model, std::span<const double> raw,
                          double intensity, std::uint64_t rng_seed,
                          const GuardrailConstants& constants = {},
                          std::optional<int> base_label = std::nullopt);

struct Privatized {
  double score = 0.0;
  int label = 0;
};

// Randomized response: flip the label with probability intensity * 0.25 and
// add bounded symmetric score noise of scale intensity * 0.1, clamped to [0,1].
Privatized privatize(double score, int label, double intensity, std::uint64_t rng_seed,
                     const GuardrailConstants& constants = {});

// Audit-log form.
std::string to_json_string(const GuardedPrediction& gp);

}  // namespace raibench
