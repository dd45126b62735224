#include "raibench/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "internal.hpp"
#include "raibench/io.hpp"

namespace raibench {

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::svm: return "svm";
    case Algorithm::knn: return "knn";
    case Algorithm::rf: return "rf";
    case Algorithm::nn: return "nn";
  }
  return "?";
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "svm") return Algorithm::svm;
  if (name == "knn") return Algorithm::knn;
  if (name == "rf") return Algorithm::rf;
  if (name == "nn") return Algorithm::nn;
  throw std::invalid_argument("unknown algorithm: '" + name + "'");
}

std::array<int, 4> one_hot(Algorithm a) {
  std::array<int, 4> slots{0, 0, 0, 0};
  slots[static_cast<std::size_t>(a)] = 1;
  return slots;
}

InferenceMeter& inference_meter() {
  thread_local InferenceMeter meter;
  return meter;
}

namespace {

constexpr int kModelFormatVersion = 1;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

Matrix preprocess_all(const Dataset& d) {
  Matrix m;
  m.rows = d.n;
  m.cols = preprocessed_width(d.p, d.type);
  m.data.reserve(m.rows * m.cols);
  for (std::size_t i = 0; i < d.n; ++i) {
    auto x = preprocess(d.row(i), d.type);
    m.data.insert(m.data.end(), x.begin(), x.end());
  }
  return m;
}

// Sub-gradient descent on the hinge loss (pegasos schedule). The bias rides
// along as an extra always-one feature.
SvmModel train_svm_linear(const Matrix& x, const std::vector<std::uint8_t>& y,
                          const SvmHyper& hyper, std::uint64_t seed) {
  const std::size_t p = x.cols;
  std::vector<double> w(p + 1, 0.0);
  std::mt19937_64 rng(mix64(seed ^ 0x73766dULL));
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), 0);

  std::uint64_t step = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      ++step;
      const double eta = 1.0 / (hyper.lambda * static_cast<double>(step));
      const double yi = y[i] ? 1.0 : -1.0;
      auto xi = x.row(i);
      double margin = w[p];
      for (std::size_t j = 0; j < p; ++j) margin += w[j] * xi[j];
      margin *= yi;

      const double decay = 1.0 - 1.0 / static_cast<double>(step);
      for (double& wj : w) wj *= decay;
      if (margin < 1.0) {
        for (std::size_t j = 0; j < p; ++j) w[j] += eta * yi * xi[j];
        w[p] += eta * yi;
      }
    }
  }

  SvmModel m;
  m.rbf = false;
  m.bias = w[p];
  w.pop_back();
  m.weights = std::move(w);
  return m;
}

// Kernelized variant (off by default): dual coordinate ascent on the hinge
// loss with an rbf kernel; rows that ever violated the margin are retained as
// support vectors.
SvmModel train_svm_rbf(const Matrix& x, const std::vector<std::uint8_t>& y,
                       const SvmHyper& hyper, std::uint64_t seed) {
  const std::size_t n = x.rows;
  const std::size_t p = x.cols;
  std::vector<double> alpha(n, 0.0);
  std::mt19937_64 rng(mix64(seed ^ 0x726266ULL));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  auto kernel = [&](std::size_t a, std::size_t b) {
    double d2 = 0.0;
    auto xa = x.row(a), xb = x.row(b);
    for (std::size_t j = 0; j < p; ++j) {
      const double d = xa[j] - xb[j];
      d2 += d * d;
    }
    return std::exp(-hyper.gamma * d2);
  };

  const double lr = 1.0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      double f = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (alpha[j] != 0.0) f += alpha[j] * (y[j] ? 1.0 : -1.0) * kernel(j, i);
      }
      const double yi = y[i] ? 1.0 : -1.0;
      if (yi * f < 1.0) alpha[i] += lr;
    }
  }

  SvmModel m;
  m.rbf = true;
  m.gamma = hyper.gamma;
  m.bias = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] == 0.0) continue;
    m.weights.push_back(alpha[i] * (y[i] ? 1.0 : -1.0));
    auto xi = x.row(i);
    m.support.insert(m.support.end(), xi.begin(), xi.end());
  }
  m.sv_count = m.weights.size();
  return m;
}

MlpModel train_mlp(const Matrix& x, const std::vector<std::uint8_t>& y, const MlpHyper& hyper,
                   std::uint64_t seed) {
  const std::size_t p = x.cols;
  const auto h = static_cast<std::size_t>(hyper.hidden);
  std::mt19937_64 rng(mix64(seed ^ 0x6d6c70ULL));

  MlpModel m;
  m.hidden = hyper.hidden;
  m.w1.resize(h * p);
  m.b1.assign(h, 0.0);
  m.w2.resize(h);
  const double s1 = std::sqrt(6.0 / static_cast<double>(p + h));
  const double s2 = std::sqrt(6.0 / static_cast<double>(h + 1));
  std::uniform_real_distribution<double> u1(-s1, s1), u2(-s2, s2);
  for (double& v : m.w1) v = u1(rng);
  for (double& v : m.w2) v = u2(rng);

  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> a1(h), dz1(h);
  std::vector<double> gw1(h * p), gb1(h), gw2(h);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hyper.batch)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(hyper.batch));
      std::fill(gw1.begin(), gw1.end(), 0.0);
      std::fill(gb1.begin(), gb1.end(), 0.0);
      std::fill(gw2.begin(), gw2.end(), 0.0);
      double gb2 = 0.0;

      for (std::size_t idx = start; idx < end; ++idx) {
        auto xi = x.row(order[idx]);
        for (std::size_t u = 0; u < h; ++u) {
          double z = m.b1[u];
          const double* wrow = m.w1.data() + u * p;
          for (std::size_t j = 0; j < p; ++j) z += wrow[j] * xi[j];
          a1[u] = std::tanh(z);
        }
        double z2 = m.b2;
        for (std::size_t u = 0; u < h; ++u) z2 += m.w2[u] * a1[u];
        const double score = sigmoid(z2);
        const double dz2 = score - static_cast<double>(y[order[idx]]);

        gb2 += dz2;
        for (std::size_t u = 0; u < h; ++u) {
          gw2[u] += dz2 * a1[u];
          dz1[u] = dz2 * m.w2[u] * (1.0 - a1[u] * a1[u]);
          gb1[u] += dz1[u];
          double* grow = gw1.data() + u * p;
          for (std::size_t j = 0; j < p; ++j) grow[j] += dz1[u] * xi[j];
        }
      }

      const double scale = hyper.learning_rate / static_cast<double>(end - start);
      for (std::size_t i = 0; i < gw1.size(); ++i) m.w1[i] -= scale * gw1[i];
      for (std::size_t u = 0; u < h; ++u) {
        m.b1[u] -= scale * gb1[u];
        m.w2[u] -= scale * gw2[u];
      }
      m.b2 -= scale * gb2;
    }
  }
  return m;
}

double svm_score(const SvmModel& m, std::span<const double> x) {
  double margin = m.bias;
  if (!m.rbf) {
    for (std::size_t j = 0; j < m.weights.size(); ++j) margin += m.weights[j] * x[j];
  } else {
    const std::size_t p = x.size();
    for (std::size_t s = 0; s < m.sv_count; ++s) {
      const double* sv = m.support.data() + s * p;
      double d2 = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        const double d = x[j] - sv[j];
        d2 += d * d;
      }
      margin += m.weights[s] * std::exp(-m.gamma * d2);
    }
  }
  return sigmoid(margin);
}

double knn_score(const KnnModel& m, std::span<const double> x) {
  const auto k = static_cast<std::size_t>(m.k);
  // running top-k by (distance, index); ties keep the earlier row
  std::vector<std::pair<double, std::size_t>> best;
  best.reserve(k + 1);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = m.data.data() + i * m.cols;
    double d2 = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double d = x[j] - row[j];
      d2 += d * d;
    }
    if (best.size() == k && d2 >= best.back().first) continue;
    auto pos = std::upper_bound(best.begin(), best.end(), std::make_pair(d2, i));
    best.insert(pos, {d2, i});
    if (best.size() > k) best.pop_back();
  }
  double pos_votes = 0.0;
  for (auto& [d2, i] : best) pos_votes += m.labels[i];
  return pos_votes / static_cast<double>(best.size());
}

double mlp_score(const MlpModel& m, std::span<const double> x) {
  const auto h = static_cast<std::size_t>(m.hidden);
  const std::size_t p = x.size();
  double z2 = m.b2;
  for (std::size_t u = 0; u < h; ++u) {
    double z = m.b1[u];
    const double* wrow = m.w1.data() + u * p;
    for (std::size_t j = 0; j < p; ++j) z += wrow[j] * x[j];
    z2 += m.w2[u] * std::tanh(z);
  }
  return sigmoid(z2);
}

void validate_hyper(Algorithm kind, const Hyper& hyper, std::size_t n) {
  switch (kind) {
    case Algorithm::svm:
      if (hyper.svm.epochs < 1 || hyper.svm.lambda <= 0.0)
        throw std::invalid_argument("svm: epochs >= 1 and lambda > 0 required");
      break;
    case Algorithm::knn:
      if (hyper.knn.k < 1 || hyper.knn.k % 2 == 0 ||
          static_cast<std::size_t>(hyper.knn.k) > n)
        throw std::invalid_argument("knn: k must be odd, >= 1 and <= n_train");
      break;
    case Algorithm::rf:
      if (hyper.rf.trees < 1 || hyper.rf.max_depth < 0)
        throw std::invalid_argument("rf: trees >= 1 and max_depth >= 0 required");
      break;
    case Algorithm::nn:
      if (hyper.nn.hidden < 1 || hyper.nn.epochs < 1)
        throw std::invalid_argument("nn: hidden width and epochs must be >= 1");
      break;
  }
}

}  // namespace

TrainedModel train(Algorithm kind, const Dataset& data, const Hyper& hyper, std::uint64_t seed) {
  validate_hyper(kind, hyper, data.n);

  bool has0 = false, has1 = false;
  for (std::uint8_t l : data.labels) (l ? has1 : has0) = true;
  if (!has0 || !has1) throw std::invalid_argument("train: dataset has a single class");

  Matrix x = preprocess_all(data);

  TrainedModel model;
  model.kind = kind;
  model.meta = TrainMeta{data.n, data.p, data.type, seed};

  switch (kind) {
    case Algorithm::svm:
      model.params = hyper.svm.rbf ? train_svm_rbf(x, data.labels, hyper.svm, seed)
                                   : train_svm_linear(x, data.labels, hyper.svm, seed);
      break;
    case Algorithm::knn: {
      KnnModel m;
      m.k = hyper.knn.k;
      m.rows = x.rows;
      m.cols = x.cols;
      m.data = std::move(x.data);
      m.labels = data.labels;
      model.params = std::move(m);
      break;
    }
    case Algorithm::rf:
      model.params = detail::train_forest(x.data, data.labels, x.rows, x.cols, hyper.rf, seed);
      break;
    case Algorithm::nn:
      model.params = train_mlp(x, data.labels, hyper.nn, seed);
      break;
  }
  model.per_inference_ops = op_count(model, preprocessed_width(data.p, data.type));
  return model;
}

Prediction predict(const TrainedModel& model, std::span<const double> raw) {
  if (raw.size() != model.meta.p) {
    throw std::invalid_argument("predict: expected " + std::to_string(model.meta.p) +
                                " features, got " + std::to_string(raw.size()));
  }
  auto& meter = inference_meter();
  ++meter.predict_calls;
  meter.ops.mults += model.per_inference_ops.mults;
  meter.ops.adds += model.per_inference_ops.adds;
  meter.ops.compares += model.per_inference_ops.compares;

  const std::vector<double> x = preprocess(raw, model.meta.t);

  double score = 0.0;
  switch (model.kind) {
    case Algorithm::svm: score = svm_score(std::get<SvmModel>(model.params), x); break;
    case Algorithm::knn: score = knn_score(std::get<KnnModel>(model.params), x); break;
    case Algorithm::rf: score = detail::forest_score(std::get<ForestModel>(model.params), x); break;
    case Algorithm::nn: score = mlp_score(std::get<MlpModel>(model.params), x); break;
  }
  return Prediction{score >= 0.5 ? 1 : 0, score};
}

OpCount op_count(const TrainedModel& model, std::size_t p_effective) {
  const auto p = static_cast<std::uint64_t>(p_effective);
  OpCount c;
  switch (model.kind) {
    case Algorithm::svm: {
      const auto& m = std::get<SvmModel>(model.params);
      if (!m.rbf) {
        c = {p, p, 1};
      } else {
        const auto sv = static_cast<std::uint64_t>(m.sv_count);
        c = {sv * (p + 5), sv * (2 * p + 1) + 1, 1};
      }
      break;
    }
    case Algorithm::knn: {
      const auto& m = std::get<KnnModel>(model.params);
      const auto n = static_cast<std::uint64_t>(m.rows);
      c = {n * p, 2 * n * p, n + static_cast<std::uint64_t>(m.k)};
      break;
    }
    case Algorithm::rf: {
      const auto& m = std::get<ForestModel>(model.params);
      std::uint64_t depth_sum = 0;
      for (const Tree& t : m.trees) depth_sum += static_cast<std::uint64_t>(t.max_depth);
      c = {1, static_cast<std::uint64_t>(m.trees.size()), depth_sum};
      break;
    }
    case Algorithm::nn: {
      const auto& m = std::get<MlpModel>(model.params);
      const auto h = static_cast<std::uint64_t>(m.hidden);
      const std::uint64_t matvec = p * h + h;
      const std::uint64_t act = 2 * (h + 1);  // 2 mults + 2 adds per activation
      c = {matvec + act, matvec + act, 1};
      break;
    }
  }
  return c;
}

// ----- JSON serialization

namespace {

using nlohmann::json;

json params_to_json(const TrainedModel& model) {
  json j;
  switch (model.kind) {
    case Algorithm::svm: {
      const auto& m = std::get<SvmModel>(model.params);
      j = {{"rbf", m.rbf}, {"weights", m.weights}, {"bias", m.bias},
           {"gamma", m.gamma}, {"support", m.support}, {"sv_count", m.sv_count}};
      break;
    }
    case Algorithm::knn: {
      const auto& m = std::get<KnnModel>(model.params);
      j = {{"k", m.k}, {"rows", m.rows}, {"cols", m.cols},
           {"data", m.data}, {"labels", m.labels}};
      break;
    }
    case Algorithm::rf: {
      const auto& m = std::get<ForestModel>(model.params);
      json trees = json::array();
      for (const Tree& t : m.trees) {
        json nodes = json::array();
        for (const TreeNode& nd : t.nodes) {
          nodes.push_back({{"feature", nd.feature}, {"threshold", nd.threshold},
                           {"left", nd.left}, {"right", nd.right}, {"prob", nd.prob}});
        }
        trees.push_back({{"max_depth", t.max_depth}, {"nodes", std::move(nodes)}});
      }
      j = {{"trees", std::move(trees)}};
      break;
    }
    case Algorithm::nn: {
      const auto& m = std::get<MlpModel>(model.params);
      j = {{"hidden", m.hidden}, {"w1", m.w1}, {"b1", m.b1}, {"w2", m.w2}, {"b2", m.b2}};
      break;
    }
  }
  return j;
}

void params_from_json(const json& j, TrainedModel& model) {
  const std::size_t p_eff = preprocessed_width(model.meta.p, model.meta.t);
  switch (model.kind) {
    case Algorithm::svm: {
      SvmModel m;
      m.rbf = j.at("rbf").get<bool>();
      m.weights = j.at("weights").get<std::vector<double>>();
      m.bias = j.at("bias").get<double>();
      m.gamma = j.at("gamma").get<double>();
      m.support = j.at("support").get<std::vector<double>>();
      m.sv_count = j.at("sv_count").get<std::size_t>();
      if (m.rbf ? m.support.size() != m.sv_count * p_eff : m.weights.size() != p_eff)
        throw std::invalid_argument("svm: parameter shape inconsistent with p");
      model.params = std::move(m);
      break;
    }
    case Algorithm::knn: {
      KnnModel m;
      m.k = j.at("k").get<int>();
      m.rows = j.at("rows").get<std::size_t>();
      m.cols = j.at("cols").get<std::size_t>();
      m.data = j.at("data").get<std::vector<double>>();
      m.labels = j.at("labels").get<std::vector<std::uint8_t>>();
      if (m.cols != p_eff || m.data.size() != m.rows * m.cols || m.labels.size() != m.rows ||
          m.rows != model.meta.n_train)
        throw std::invalid_argument("knn: parameter shape inconsistent with meta");
      model.params = std::move(m);
      break;
    }
    case Algorithm::rf: {
      ForestModel m;
      for (const json& tj : j.at("trees")) {
        Tree t;
        t.max_depth = tj.at("max_depth").get<int>();
        for (const json& nj : tj.at("nodes")) {
          t.nodes.push_back(TreeNode{nj.at("feature").get<int>(), nj.at("threshold").get<double>(),
                                     nj.at("left").get<int>(), nj.at("right").get<int>(),
                                     nj.at("prob").get<double>()});
        }
        m.trees.push_back(std::move(t));
      }
      if (m.trees.empty()) throw std::invalid_argument("rf: no trees");
      model.params = std::move(m);
      break;
    }
    case Algorithm::nn: {
      MlpModel m;
      m.hidden = j.at("hidden").get<int>();
      m.w1 = j.at("w1").get<std::vector<double>>();
      m.b1 = j.at("b1").get<std::vector<double>>();
      m.w2 = j.at("w2").get<std::vector<double>>();
      m.b2 = j.at("b2").get<double>();
      const auto h = static_cast<std::size_t>(m.hidden);
      if (m.hidden < 1 || m.w1.size() != h * p_eff || m.b1.size() != h || m.w2.size() != h)
        throw std::invalid_argument("nn: parameter shape inconsistent with p");
      model.params = std::move(m);
      break;
    }
  }
}

}  // namespace

std::string to_json_string(const TrainedModel& model) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["family"] = algorithm_name(model.kind);
  j["meta"] = {{"n_train", model.meta.n_train}, {"p", model.meta.p},
               {"t", static_cast<int>(model.meta.t)}, {"seed", model.meta.seed}};
  j["params"] = params_to_json(model);
  return j.dump(2) + "\n";
}

TrainedModel model_from_json_string(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("format_version").get<int>() != kModelFormatVersion)
    throw std::invalid_argument("unsupported model format version");

  TrainedModel model;
  model.kind = algorithm_from_name(j.at("family").get<std::string>());
  const json& meta = j.at("meta");
  model.meta.n_train = meta.at("n_train").get<std::size_t>();
  model.meta.p = meta.at("p").get<std::size_t>();
  model.meta.t = data_type_from_code(meta.at("t").get<int>());
  model.meta.seed = meta.at("seed").get<std::uint64_t>();
  params_from_json(j.at("params"), model);
  model.per_inference_ops = op_count(model, preprocessed_width(model.meta.p, model.meta.t));
  return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  atomic_write(path, to_json_string(model));
}

TrainedModel load_model(const std::filesystem::path& path) {
  return model_from_json_string(read_file(path));
}

}  // namespace raibench
