#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "raibench/classifier.hpp"

// Cross-file internals of the core library; not installed.
namespace raibench::detail {

ForestModel train_forest(const std::vector<double>& x, const std::vector<std::uint8_t>& y,
                         std::size_t rows, std::size_t cols, const ForestHyper& hyper,
                         std::uint64_t seed);

double forest_score(const ForestModel& model, std::span<const double> x);

}  // namespace raibench::detail
