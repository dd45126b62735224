#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "internal.hpp"
#include "raibench/io.hpp"

namespace raibench::detail {

namespace {

struct Builder {
  const std::vector<double>& x;
  const std::vector<std::uint8_t>& y;
  std::size_t cols;
  const ForestHyper& hyper;
  std::mt19937_64& rng;
  Tree tree;

  double value(std::size_t row, std::size_t col) const { return x[row * cols + col]; }

  // Gini impurity of a split given positive/total counts on each side.
  static double gini(double pos, double total) {
    if (total <= 0.0) return 0.0;
    const double q = pos / total;
    return 2.0 * q * (1.0 - q);
  }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = std::numeric_limits<double>::infinity();
  };

  Split best_split(const std::vector<std::size_t>& rows) {
    Split best;
    const std::size_t mtry =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(cols))));
    std::vector<std::size_t> features(cols);
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng);
    features.resize(std::min(mtry, features.size()));
    std::sort(features.begin(), features.end());  // fixed evaluation order

    std::vector<std::pair<double, std::uint8_t>> vals(rows.size());
    for (std::size_t f : features) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        vals[i] = {value(rows[i], f), y[rows[i]]};
      }
      std::sort(vals.begin(), vals.end());
      double total_pos = 0.0;
      for (auto& [v, lab] : vals) total_pos += lab;
      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        left_pos += vals[i].second;
        if (vals[i].first == vals[i + 1].first) continue;  // no boundary between equal values
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(vals.size()) - nl;
        const double score =
            (nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr)) /
            static_cast<double>(vals.size());
        if (score < best.score) {
          best.score = score;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    return best;
  }

  int grow(const std::vector<std::size_t>& rows, int depth) {
    double pos = 0.0;
    for (std::size_t r : rows) pos += y[r];
    const double prob = rows.empty() ? 0.0 : pos / static_cast<double>(rows.size());

    const bool pure = pos == 0.0 || pos == static_cast<double>(rows.size());
    if (depth >= hyper.max_depth || pure ||
        rows.size() < static_cast<std::size_t>(hyper.min_split)) {
      return make_leaf(prob, depth);
    }
    Split split = best_split(rows);
    if (split.feature < 0) return make_leaf(prob, depth);

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (value(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right)
          .push_back(r);
    }
    if (left.empty() || right.empty()) return make_leaf(prob, depth);

    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{split.feature, split.threshold, -1, -1, prob});
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].left = l;
    tree.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  int make_leaf(double prob, int depth) {
    tree.max_depth = std::max(tree.max_depth, depth);
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, prob});
    return static_cast<int>(tree.nodes.size()) - 1;
  }
};

// grow() pushes a node before recursing into children, so nodes[0] is the root.
Tree build_tree(const std::vector<double>& x, const std::vector<std::uint8_t>& y,
                std::size_t cols, const std::vector<std::size_t>& rows,
                const ForestHyper& hyper, std::mt19937_64& rng) {
  Builder b{x, y, cols, hyper, rng, {}};
  b.grow(rows, 0);
  return b.tree;
}

}  // namespace

ForestModel train_forest(const std::vector<double>& x, const std::vector<std::uint8_t>& y,
                         std::size_t rows, std::size_t cols, const ForestHyper& hyper,
                         std::uint64_t seed) {
  if (hyper.trees < 1) throw std::invalid_argument("rf: trees must be >= 1");
  if (hyper.max_depth < 0) throw std::invalid_argument("rf: max_depth must be >= 0");

  ForestModel model;
  model.trees.reserve(static_cast<std::size_t>(hyper.trees));
  std::vector<std::size_t> all(rows);
  std::iota(all.begin(), all.end(), 0);

  for (int t = 0; t < hyper.trees; ++t) {
    std::mt19937_64 rng(mix64(seed ^ (0x7472656500ULL + static_cast<std::uint64_t>(t))));
    std::vector<std::size_t> sample;
    if (hyper.trees == 1) {
      sample = all;  // a single-tree forest is plain CART on the full data
    } else {
      sample.resize(rows);
      std::uniform_int_distribution<std::size_t> pick(0, rows - 1);
      for (auto& s : sample) s = pick(rng);
    }
    model.trees.push_back(build_tree(x, y, cols, sample, hyper, rng));
  }
  return model;
}

double forest_score(const ForestModel& model, std::span<const double> x) {
  double sum = 0.0;
  for (const Tree& tree : model.trees) {
    int node = 0;
    while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
      const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
      node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    sum += tree.nodes[static_cast<std::size_t>(node)].prob;
  }
  return sum / static_cast<double>(model.trees.size());
}

}  // namespace raibench::detail
