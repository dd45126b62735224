#include "raibench/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <json.hpp>

#include "raibench/io.hpp"

namespace raibench {

const char* target_name(Target t) { return t == Target::latency ? "latency" : "energy"; }

Target target_from_name(const std::string& name) {
  if (name == "latency") return Target::latency;
  if (name == "energy") return Target::energy;
  throw std::invalid_argument("unknown target: '" + name + "' (expected latency or energy)");
}

void validate(const PredictorInputs& inputs) {
  if (inputs.n < 1) throw std::invalid_argument("inputs: n must be >= 1");
  if (inputs.p < 1) throw std::invalid_argument("inputs: p must be >= 1");
  validate(inputs.g);
}

const std::vector<std::string>& column_names(TypeEncoding enc) {
  static const std::vector<std::string> numeric = {
      "alpha",   "beta_kNN", "beta_RF", "beta_NN",   "beta_D",     "gamma_D",
      "delta_D", "phi_expl", "phi_fair", "phi_interp", "phi_safety", "phi_privacy"};
  static const std::vector<std::string> one_hot = {
      "alpha",        "beta_kNN", "beta_RF",  "beta_NN",   "beta_D",     "gamma_D",
      "delta_D_text", "delta_D_image", "phi_expl", "phi_fair", "phi_interp", "phi_safety",
      "phi_privacy"};
  return enc == TypeEncoding::numeric ? numeric : one_hot;
}

std::array<double, kDesignColumns> design_row(const PredictorInputs& inputs, Target target) {
  validate(inputs);
  std::array<double, kDesignColumns> row{};
  row[0] = 1.0;
  row[1] = inputs.algorithm == Algorithm::knn ? 1.0 : 0.0;
  row[2] = inputs.algorithm == Algorithm::rf ? 1.0 : 0.0;
  row[3] = inputs.algorithm == Algorithm::nn ? 1.0 : 0.0;
  row[4] = target == Target::latency ? std::log(static_cast<double>(inputs.n))
                                     : static_cast<double>(inputs.n);
  row[5] = static_cast<double>(inputs.p);
  row[6] = static_cast<double>(static_cast<int>(inputs.t));
  const auto g = inputs.g.as_array();
  for (std::size_t i = 0; i < 5; ++i) row[7 + i] = g[i];
  return row;
}

std::vector<double> design_row_encoded(const PredictorInputs& inputs, Target target,
                                       TypeEncoding enc) {
  const auto base = design_row(inputs, target);
  if (enc == TypeEncoding::numeric) return {base.begin(), base.end()};
  // one-hot: replace the numeric t column with text/image indicators
  std::vector<double> row(base.begin(), base.begin() + 6);
  row.push_back(inputs.t == DataType::text ? 1.0 : 0.0);
  row.push_back(inputs.t == DataType::image ? 1.0 : 0.0);
  row.insert(row.end(), base.begin() + 7, base.end());
  return row;
}

PredictorInputs inputs_from_record(const MeasurementRecord& r) {
  PredictorInputs in;
  in.algorithm = r.algo;
  in.n = r.n;
  in.p = r.p;
  in.t = r.t;
  in.g = r.g;
  return in;
}

double response_of(const MeasurementRecord& r, Target target) {
  return target == Target::latency ? r.latency_ms : r.energy_mj;
}

double FittedEquation::coefficient(const std::string& name) const {
  const auto& names = column_names(t_encoding);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return coef[i];
  }
  throw std::invalid_argument("no such coefficient: " + name);
}

FittedEquation fit(const std::vector<MeasurementRecord>& records, Target target,
                   const FitOptions& options) {
  const auto& names = column_names(options.t_encoding);
  const std::size_t width = names.size();

  if (records.size() < width + 1) {
    throw std::invalid_argument("fit: need at least " + std::to_string(width + 1) +
                                " records, got " + std::to_string(records.size()));
  }

  std::vector<std::size_t> selected;
  if (options.columns.empty()) {
    selected.resize(width);
    for (std::size_t i = 0; i < width; ++i) selected[i] = i;
  } else {
    for (const std::string& want : options.columns) {
      const auto it = std::find(names.begin(), names.end(), want);
      if (it == names.end()) throw std::invalid_argument("fit: unknown column '" + want + "'");
      selected.push_back(static_cast<std::size_t>(it - names.begin()));
    }
    std::sort(selected.begin(), selected.end());
    selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  }
  const auto k = static_cast<Eigen::Index>(selected.size());
  const auto rows = static_cast<Eigen::Index>(records.size());

  Eigen::MatrixXd x(rows, k);
  Eigen::VectorXd y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& rec = records[static_cast<std::size_t>(r)];
    const auto full = design_row_encoded(inputs_from_record(rec), target, options.t_encoding);
    for (Eigen::Index c = 0; c < k; ++c) x(r, c) = full[selected[static_cast<std::size_t>(c)]];
    y(r) = response_of(rec, target);
  }

  // Pivots below max_pivot / condition_limit count as zero, so near-collinear
  // designs are rejected along with exactly singular ones.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  qr.setThreshold(1.0 / options.condition_limit);
  qr.compute(x);
  const Eigen::Index rank = qr.rank();
  const Eigen::MatrixXd r_top =
      qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();

  double condition = std::numeric_limits<double>::infinity();
  if (r_top(k - 1, k - 1) != 0.0) {
    condition = std::abs(r_top(0, 0) / r_top(k - 1, k - 1));
  }
  if (rank < k) {
    // Name the columns that add no rank given the ones before them, scanning
    // in design order so the report blames e.g. a constant size column rather
    // than the intercept.
    std::vector<std::string> bad;
    Eigen::MatrixXd sub(rows, k);
    Eigen::Index kept = 0;
    for (Eigen::Index c = 0; c < k; ++c) {
      sub.col(kept) = x.col(c);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> probe;
      probe.setThreshold(1.0 / options.condition_limit);
      probe.compute(sub.leftCols(kept + 1));
      if (probe.rank() == kept + 1) {
        ++kept;
      } else {
        bad.push_back(names[selected[static_cast<std::size_t>(c)]]);
      }
    }
    std::string msg = "fit: design matrix is rank deficient; collinear columns:";
    for (const auto& b : bad) msg += " " + b;
    throw RankDeficiencyError(msg, std::move(bad));
  }

  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd residuals = y - x * beta;
  const double rss = residuals.squaredNorm();
  const double mean_y = y.mean();
  const double tss = (y.array() - mean_y).matrix().squaredNorm();

  FittedEquation eq;
  eq.target = target;
  eq.t_encoding = options.t_encoding;
  eq.coef.assign(width, 0.0);
  eq.std_errors.assign(width, 0.0);
  for (Eigen::Index c = 0; c < k; ++c) {
    eq.coef[selected[static_cast<std::size_t>(c)]] = beta(c);
  }

  const auto dof = static_cast<double>(rows - k);
  eq.sigma_eps = dof > 0 ? std::sqrt(rss / dof) : 0.0;
  eq.diagnostics.r_squared = tss > 0.0 ? 1.0 - rss / tss : 0.0;
  eq.diagnostics.record_count = records.size();
  eq.diagnostics.condition_estimate = condition;
  for (const std::size_t s : selected) eq.fitted_columns.push_back(names[s]);

  // Covariance of the estimates: X P = Q R  =>  (X'X)^-1 = P (R'R)^-1 P'.
  const Eigen::MatrixXd r_inv =
      r_top.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd m = r_inv * r_inv.transpose();
  const Eigen::MatrixXd cov = qr.colsPermutation() * m * qr.colsPermutation().transpose();
  for (Eigen::Index c = 0; c < k; ++c) {
    eq.std_errors[selected[static_cast<std::size_t>(c)]] =
        eq.sigma_eps * std::sqrt(std::max(0.0, cov(c, c)));
  }
  return eq;
}

PredictionInterval predict(const FittedEquation& eq, const PredictorInputs& inputs) {
  const auto row = design_row_encoded(inputs, eq.target, eq.t_encoding);
  double point = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) point += eq.coef[i] * row[i];
  return PredictionInterval{point, point - 2.0 * eq.sigma_eps, point + 2.0 * eq.sigma_eps};
}

EvalMetrics evaluate(const FittedEquation& eq, const std::vector<MeasurementRecord>& holdout) {
  if (holdout.empty()) throw std::invalid_argument("evaluate: no holdout records");
  double se = 0.0, ae = 0.0, mean_y = 0.0;
  for (const auto& r : holdout) mean_y += response_of(r, eq.target);
  mean_y /= static_cast<double>(holdout.size());

  double tss = 0.0;
  for (const auto& r : holdout) {
    const double y = response_of(r, eq.target);
    const double e = y - predict(eq, inputs_from_record(r)).point;
    se += e * e;
    ae += std::abs(e);
    tss += (y - mean_y) * (y - mean_y);
  }
  const auto count = static_cast<double>(holdout.size());
  EvalMetrics m;
  m.rmse = std::sqrt(se / count);
  m.mae = ae / count;
  m.r_squared = tss > 0.0 ? 1.0 - se / tss : 0.0;
  return m;
}

// ----- JSON

std::string to_json_string(const FittedEquation& eq) {
  nlohmann::json j;
  j["encoding_version"] = 1;
  j["target"] = target_name(eq.target);
  j["t_encoding"] = eq.t_encoding == TypeEncoding::numeric ? "numeric" : "one_hot";
  const auto& names = column_names(eq.t_encoding);
  nlohmann::json coef, se;
  for (std::size_t i = 0; i < names.size(); ++i) {
    coef[names[i]] = eq.coef[i];
    se[names[i]] = eq.std_errors[i];
  }
  j["coefficients"] = std::move(coef);
  j["sigma_eps"] = eq.sigma_eps;
  j["diagnostics"] = {{"r_squared", eq.diagnostics.r_squared},
                      {"record_count", eq.diagnostics.record_count},
                      {"condition_estimate", eq.diagnostics.condition_estimate},
                      {"std_errors", std::move(se)},
                      {"fitted_columns", eq.fitted_columns}};
  return j.dump(2) + "\n";
}

FittedEquation equation_from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.at("encoding_version").get<int>() != 1) {
    throw std::invalid_argument("unsupported equation encoding_version");
  }
  FittedEquation eq;
  eq.target = target_from_name(j.at("target").get<std::string>());
  const std::string enc = j.value("t_encoding", "numeric");
  eq.t_encoding = enc == "one_hot" ? TypeEncoding::one_hot : TypeEncoding::numeric;

  const auto& names = column_names(eq.t_encoding);
  eq.coef.assign(names.size(), 0.0);
  eq.std_errors.assign(names.size(), 0.0);
  const nlohmann::json& coef = j.at("coefficients");
  for (std::size_t i = 0; i < names.size(); ++i) {
    eq.coef[i] = coef.at(names[i]).get<double>();
  }
  eq.sigma_eps = j.at("sigma_eps").get<double>();
  if (j.contains("diagnostics")) {
    const nlohmann::json& d = j["diagnostics"];
    eq.diagnostics.r_squared = d.value("r_squared", 0.0);
    eq.diagnostics.record_count = d.value("record_count", std::size_t{0});
    eq.diagnostics.condition_estimate = d.value("condition_estimate", 0.0);
    if (d.contains("std_errors")) {
      for (std::size_t i = 0; i < names.size(); ++i) {
        eq.std_errors[i] = d["std_errors"].value(names[i], 0.0);
      }
    }
    eq.fitted_columns = d.value("fitted_columns", std::vector<std::string>{});
  }
  return eq;
}

void save_equation(const FittedEquation& eq, const std::filesystem::path& path) {
  atomic_write(path, to_json_string(eq));
}

FittedEquation load_equation(const std::filesystem::path& path) {
  return equation_from_json_string(read_file(path));
}

}  // namespace raibench
