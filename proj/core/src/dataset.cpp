#include "raibench/dataset.hpp"

#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "raibench/io.hpp"

namespace raibench {

namespace {
constexpr std::uint64_t kFeatureStream = 0x666561747572ULL;
constexpr std::uint64_t kGroupStream = 0x67726f7570ULL;
}  // namespace

DataType data_type_from_code(int code) {
  switch (code) {
    case 0: return DataType::tabular;
    case 1: return DataType::text;
    case 2: return DataType::image;
    default: throw std::invalid_argument("data type code must be 0, 1 or 2; got " + std::to_string(code));
  }
}

const char* data_type_name(DataType t) {
  switch (t) {
    case DataType::tabular: return "tabular";
    case DataType::text: return "text";
    case DataType::image: return "image";
  }
  return "?";
}

Dataset generate(std::size_t n, std::size_t p, DataType t, double separation, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("generate: n must be >= 2");
  if (p < 1) throw std::invalid_argument("generate: p must be >= 1");
  if (!(separation >= 0.0)) throw std::invalid_argument("generate: separation must be >= 0");

  Dataset d;
  d.n = n;
  d.p = p;
  d.type = t;
  d.separation = separation;
  d.seed = seed;
  d.samples.resize(n * p);
  d.labels.resize(n);
  d.groups.resize(n);

  // Class 1 mean sits `separation` away from the origin along the normalized
  // all-ones direction, so every feature carries signal.
  const double shift = separation / std::sqrt(static_cast<double>(p));

  std::mt19937_64 feature_rng(mix64(seed ^ kFeatureStream));
  std::mt19937_64 group_rng(mix64(seed ^ kGroupStream));
  std::normal_distribution<double> unit(0.0, 1.0);

  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t label = static_cast<std::uint8_t>(i % 2);
    d.labels[i] = label;
    d.groups[i] = static_cast<std::uint8_t>(group_rng() & 1u);
    double* row = d.samples.data() + i * p;
    for (std::size_t j = 0; j < p; ++j) {
      row[j] = unit(feature_rng) + (label ? shift : 0.0);
    }
  }
  return d;
}

std::size_t feature_bucket(double value, std::size_t buckets) {
  return static_cast<std::size_t>(mix64(std::bit_cast<std::uint64_t>(value)) % buckets);
}

namespace {

std::size_t image_side(std::size_t p) {
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(p))));
  return side < 1 ? 1 : side;
}

}  // namespace

std::size_t preprocessed_width(std::size_t p, DataType t) {
  switch (t) {
    case DataType::tabular:
    case DataType::text:
      return p;
    case DataType::image: {
      const std::size_t side = image_side(p);
      const std::size_t half = (side + 1) / 2;
      return half * half;
    }
  }
  return p;
}

std::vector<double> preprocess(std::span<const double> raw, DataType t) {
  for (double v : raw) {
    if (!std::isfinite(v)) throw std::invalid_argument("preprocess: non-finite feature value");
  }
  switch (t) {
    case DataType::tabular:
      return {raw.begin(), raw.end()};

    case DataType::text: {
      // Hashing vectorizer: every input value routes one unit of count mass
      // into a deterministic bucket, so the output sums to raw.size().
      std::vector<double> out(raw.size(), 0.0);
      for (double v : raw) {
        out[feature_bucket(v, out.size())] += 1.0;
      }
      return out;
    }

    case DataType::image: {
      // Reshape to the nearest square grid (zero-padded / truncated row-major),
      // then 2x2 mean-pool with stride 2; edge blocks average only the cells
      // that exist.
      const std::size_t side = image_side(raw.size());
      const std::size_t half = (side + 1) / 2;
      std::vector<double> out(half * half, 0.0);
      for (std::size_t by = 0; by < half; ++by) {
        for (std::size_t bx = 0; bx < half; ++bx) {
          double sum = 0.0;
          std::size_t count = 0;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t y = by * 2 + dy;
              const std::size_t x = bx * 2 + dx;
              if (y >= side || x >= side) continue;
              const std::size_t idx = y * side + x;
              sum += idx < raw.size() ? raw[idx] : 0.0;
              ++count;
            }
          }
          out[by * half + bx] = sum / static_cast<double>(count);
        }
      }
      return out;
    }
  }
  throw std::invalid_argument("preprocess: bad data type");
}

std::string to_csv(const Dataset& d) {
  std::string out;
  out.reserve(d.n * (d.p * 20 + 8));
  for (std::size_t j = 0; j < d.p; ++j) {
    out += "f" + std::to_string(j) + ",";
  }
  out += "label,protected\n";
  for (std::size_t i = 0; i < d.n; ++i) {
    const double* row = d.samples.data() + i * d.p;
    for (std::size_t j = 0; j < d.p; ++j) {
      out += format_double(row[j]);
      out += ',';
    }
    out += std::to_string(int(d.labels[i]));
    out += ',';
    out += std::to_string(int(d.groups[i]));
    out += '\n';
  }
  return out;
}

std::string sidecar_json(const Dataset& d) {
  nlohmann::json j;
  j["n"] = d.n;
  j["p"] = d.p;
  j["t"] = static_cast<int>(d.type);
  j["separation"] = d.separation;
  j["seed"] = d.seed;
  return j.dump(2) + "\n";
}

void write_dataset(const Dataset& d, const std::filesystem::path& csv_path,
                   const std::filesystem::path& sidecar_path) {
  atomic_write(csv_path, to_csv(d));
  atomic_write(sidecar_path, sidecar_json(d));
}

}  // namespace raibench
