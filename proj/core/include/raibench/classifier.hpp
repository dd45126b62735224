#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "raibench/dataset.hpp"

namespace raibench {

enum class Algorithm : int { svm = 0, knn = 1, rf = 2, nn = 3 };

const char* algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);  // throws std::invalid_argument

// One-hot rendering in the fixed order {SVM, kNN, RF, NN}; exactly one slot is 1.
std::array<int, 4> one_hot(Algorithm a);

// Per-inference operation counts; the deterministic energy/time provider
// weights these by per-op constants.
struct OpCount {
  std::uint64_t mults = 0;
  std::uint64_t adds = 0;
  std::uint64_t compares = 0;
};

// ----- family hyperparameters (documented defaults; A is a categorical
// treatment, so these stay fixed unless a study deliberately overrides them)

struct SvmHyper {
  int epochs = 30;
  double lambda = 1e-4;  // hinge-loss regularization
  bool rbf = false;      // off by default; keeps the algorithm effect linear-kernel
  double gamma = 0.5;    // rbf only
};

struct KnnHyper {
  int k = 5;  // must be odd and <= n_train
};

struct ForestHyper {
  int trees = 16;
  int max_depth = 8;
  int min_split = 2;
};

struct MlpHyper {
  int hidden = 32;
  int epochs = 40;
  double learning_rate = 0.1;
  int batch = 32;
};

struct Hyper {
  SvmHyper svm;
  KnnHyper knn;
  ForestHyper rf;
  MlpHyper nn;
};

// ----- learned parameters per family

struct SvmModel {
  bool rbf = false;
  std::vector<double> weights;  // linear: one per feature; rbf: one per support vector
  double bias = 0.0;
  double gamma = 0.5;
  std::vector<double> support;  // rbf only, row-major sv_count x p_effective
  std::size_t sv_count = 0;
};

struct KnnModel {
  int k = 5;
  std::size_t rows = 0;  // n_train, retained in full
  std::size_t cols = 0;
  std::vector<double> data;  // row-major
  std::vector<std::uint8_t> labels;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double prob = 0.0;  // positive-class fraction at the leaf
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int max_depth = 0;            // realized depth, recorded at build time
};

struct ForestModel {
  std::vector<Tree> trees;
};

struct MlpModel {
  int hidden = 0;
  std::vector<double> w1;  // hidden x p_effective, row-major
  std::vector<double> b1;
  std::vector<double> w2;  // hidden
  double b2 = 0.0;
};

struct TrainMeta {
  std::size_t n_train = 0;
  std::size_t p = 0;  // raw input width, pre-preprocessing
  DataType t = DataType::tabular;
  std::uint64_t seed = 0;
};

// Immutable after training; predict() is safe for concurrent callers.
struct TrainedModel {
  Algorithm kind = Algorithm::svm;
  TrainMeta meta;
  std::variant<SvmModel, KnnModel, ForestModel, MlpModel> params;
  OpCount per_inference_ops;  // cached op_count at the model's own width
};

struct Prediction {
  int label = 0;       // 1 iff score >= 0.5
  double score = 0.0;  // in [0,1]
};

// Deterministic given seed. Rejects invalid hyperparameters and single-class
// datasets.
TrainedModel train(Algorithm kind, const Dataset& data, const Hyper& hyper = {},
                   std::uint64_t seed = 0);

// Runs preprocess(meta.t) on the raw row, then the family-specific inference.
// Pure function of (model, sample); throws on dimension mismatch.
Prediction predict(const TrainedModel& model, std::span<const double> raw);

// Closed-form per-inference operation counts at the given post-preprocessing
// width. Conventions (documented here once):
//   linear SVM: p mults, p adds (accumulate + bias), 1 compare
//   rbf SVM:    per SV p+5 mults and 2p+1 adds (diff/square/exp), +1 bias add, 1 compare
//   kNN:        n*p mults, 2*n*p adds (diff + accumulate), n + k compares
//   RF:         sum of per-tree realized depths as compares, T adds, 1 mult
//   MLP:        (p*h + h) mat-vec mults, same adds, 4 ops per activation, 1 compare
OpCount op_count(const TrainedModel& model, std::size_t p_effective);

// Thread-local instrumentation: every predict() bumps the call counter and
// accrues the model's per-inference ops. The cost-model provider reads this.
struct InferenceMeter {
  std::uint64_t predict_calls = 0;
  OpCount ops;
  void reset() { *this = InferenceMeter{}; }
};
InferenceMeter& inference_meter();

// Versioned JSON document; round-trip is lossless for prediction purposes.
std::string to_json_string(const TrainedModel& model);
TrainedModel model_from_json_string(const std::string& text);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace raibench
