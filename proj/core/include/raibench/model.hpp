#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "raibench/measure.hpp"

namespace raibench {

enum class Target { latency, energy };

const char* target_name(Target t);
Target target_from_name(const std::string& name);

// One configuration the fitted equations can score.
struct PredictorInputs {
  Algorithm algorithm = Algorithm::svm;
  std::size_t n = 1;  // >= 1 so log(n) is defined
  std::size_t p = 1;
  DataType t = DataType::tabular;
  GuardrailConfig g;
};

void validate(const PredictorInputs& inputs);

// How the data-type code enters the design: as the numeric 0/1/2 column
// (default) or as two indicator columns (adds one column).
enum class TypeEncoding { numeric, one_hot };

inline constexpr int kDesignColumns = 12;

// Names in column order for the numeric-t design:
// alpha, beta_kNN, beta_RF, beta_NN (SVM is the reference level, absorbed by
// alpha), beta_D (log n for latency, n for energy), gamma_D, delta_D,
// phi_expl..phi_privacy.
const std::vector<std::string>& column_names(TypeEncoding enc = TypeEncoding::numeric);

// The standard 12-component design row. Latency and energy rows differ only
// in the size component: ln(n) vs n.
std::array<double, kDesignColumns> design_row(const PredictorInputs& inputs, Target target);

// Variable-width variant used by the fitter (12 or 13 columns).
std::vector<double> design_row_encoded(const PredictorInputs& inputs, Target target,
                                       TypeEncoding enc);

class RankDeficiencyError : public std::runtime_error {
 public:
  RankDeficiencyError(const std::string& msg, std::vector<std::string> cols)
      : std::runtime_error(msg), columns(std::move(cols)) {}
  std::vector<std::string> columns;  // collinear (non-identifiable) columns
};

struct FitOptions {
  // Coefficient names to estimate; empty means all columns. Restricting the
  // set is how grids that deliberately hold a factor fixed stay fittable;
  // with the full set, any constant or collinear column is an error.
  std::vector<std::string> columns;
  double condition_limit = 1e10;
  TypeEncoding t_encoding = TypeEncoding::numeric;
};

struct FitDiagnostics {
  double r_squared = 0.0;  // 0 by convention when the response has no variance
  std::size_t record_count = 0;
  double condition_estimate = 0.0;
};

// Coefficients of one prediction equation. Unestimated columns (when fitting
// a restricted set) carry coefficient 0 and are absent from fitted_columns.
struct FittedEquation {
  Target target = Target::latency;
  TypeEncoding t_encoding = TypeEncoding::numeric;
  std::vector<double> coef;        // one per design column
  std::vector<double> std_errors;  // same order; 0 for unestimated columns
  double sigma_eps = 0.0;          // residual standard deviation
  FitDiagnostics diagnostics;
  std::vector<std::string> fitted_columns;

  double coefficient(const std::string& name) const;
};

// Ordinary least squares via column-pivoted Householder QR (never the normal
// equations). Requires >= 13 records; throws RankDeficiencyError naming the
// collinear columns when the requested design is not numerically full rank.
// sigma_eps = sqrt(RSS / (rows - fitted columns)).
FittedEquation fit(const std::vector<MeasurementRecord>& records, Target target,
                   const FitOptions& options = {});

struct PredictionInterval {
  double point = 0.0;
  double lower = 0.0;  // point - 2 sigma_eps
  double upper = 0.0;  // point + 2 sigma_eps
};

// Fixed-order dot product of coefficients and design row; reproducible to
// 1e-12 relative across platforms.
PredictionInterval predict(const FittedEquation& eq, const PredictorInputs& inputs);

struct EvalMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double r_squared = 0.0;
};

// Standard holdout metrics; caller keeps holdout disjoint from training
// records by record key.
EvalMetrics evaluate(const FittedEquation& eq, const std::vector<MeasurementRecord>& holdout);

PredictorInputs inputs_from_record(const MeasurementRecord& r);
double response_of(const MeasurementRecord& r, Target target);

std::string to_json_string(const FittedEquation& eq);
FittedEquation equation_from_json_string(const std::string& text);
void save_equation(const FittedEquation& eq, const std::filesystem::path& path);
FittedEquation load_equation(const std::filesystem::path& path);

}  // namespace raibench
