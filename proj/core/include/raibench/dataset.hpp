#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace raibench {

// Data type behaves as a categorical code and selects the preprocessing
// transform that runs inside the inference path.
enum class DataType : int { tabular = 0, text = 1, image = 2 };

DataType data_type_from_code(int code);  // throws std::invalid_argument outside {0,1,2}
const char* data_type_name(DataType t);

// Synthetic binary-classification dataset: two Gaussian class clouds in p
// dimensions with an independent binary protected attribute for fairness
// auditing.
struct Dataset {
  std::size_t n = 0;
  std::size_t p = 0;
  DataType type = DataType::tabular;
  double separation = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> samples;         // row-major, n*p
  std::vector<std::uint8_t> labels;    // {0,1}, balanced within +/-1
  std::vector<std::uint8_t> groups;    // protected attribute, {0,1}

  std::span<const double> row(std::size_t i) const { return {samples.data() + i * p, p}; }
};

// Deterministic generator: identical arguments (including seed) produce
// bit-identical datasets. Class means sit `separation` apart along the
// normalized all-ones direction; both clouds have unit variance per feature.
Dataset generate(std::size_t n, std::size_t p, DataType t, double separation, std::uint64_t seed);

// Output width of preprocess() for a p-wide input of type t.
std::size_t preprocessed_width(std::size_t p, DataType t);

// Hash routing used by the text transform: bucket index for one feature value.
std::size_t feature_bucket(double value, std::size_t buckets);

// Type-dependent transform executed inside the timed inference path:
//   tabular -> identity copy
//   text    -> hashing vectorizer (each value adds count 1.0 to its bucket)
//   image   -> reshape to the nearest square grid, 2x2 mean-pool, flatten
// Rejects non-finite inputs.
std::vector<double> preprocess(std::span<const double> raw, DataType t);

// CSV with header f0..f{p-1},label,protected plus a JSON metadata sidecar
// {n, p, t, separation, seed}. Both files are written atomically.
std::string to_csv(const Dataset& d);
std::string sidecar_json(const Dataset& d);
void write_dataset(const Dataset& d, const std::filesystem::path& csv_path,
                   const std::filesystem::path& sidecar_path);

}  // namespace raibench
