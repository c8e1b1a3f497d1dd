#ifndef EDTWEETLAB_FOREST_HPP_
#define EDTWEETLAB_FOREST_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "edtweetlab/eval.hpp"
#include "edtweetlab/features.hpp"
#include "edtweetlab/util.hpp"

namespace edtweetlab {

// Gini impurity of a binary node: 1 - p0^2 - p1^2.
inline double gini_impurity(std::size_t negatives, std::size_t positives) {
  std::size_t n = negatives + positives;
  if (n == 0) throw InvalidArgument("gini_impurity: empty node");
  double p0 = static_cast<double>(negatives) / static_cast<double>(n);
  double p1 = static_cast<double>(positives) / static_cast<double>(n);
  return 1.0 - p0 * p0 - p1 * p1;
}

enum class MaxFeatures { kAuto, kSqrt, kLog2, kAll };

inline std::string to_string(MaxFeatures mf) {
  switch (mf) {
    case MaxFeatures::kAuto: return "auto";
    case MaxFeatures::kSqrt: return "sqrt";
    case MaxFeatures::kLog2: return "log2";
    case MaxFeatures::kAll: return "all";
  }
  throw InvalidArgument("unknown max_features value");
}

inline MaxFeatures parse_max_features(const std::string& s) {
  if (s == "auto") return MaxFeatures::kAuto;
  if (s == "sqrt") return MaxFeatures::kSqrt;
  if (s == "log2") return MaxFeatures::kLog2;
  if (s == "all") return MaxFeatures::kAll;
  throw ConfigError("max_features must be auto, sqrt, log2 or all (got '" + s + "')");
}

// Number of candidate features examined per split. "auto" is an alias for
// sqrt. Integer bit scans keep the floor exact.
inline std::size_t feature_subset_size(MaxFeatures mf, std::size_t n_features) {
  if (n_features == 0) throw InvalidArgument("feature_subset_size: no features");
  switch (mf) {
    case MaxFeatures::kAll:
      return n_features;
    case MaxFeatures::kAuto:
    case MaxFeatures::kSqrt: {
      std::size_t r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features)));
      while (r * r > n_features) --r;
      while ((r + 1) * (r + 1) <= n_features) ++r;
      return std::max<std::size_t>(1, r);
    }
    case MaxFeatures::kLog2: {
      std::size_t bits = 0, n = n_features;
      while (n >>= 1) ++bits;
      return std::max<std::size_t>(1, bits);
    }
  }
  throw InvalidArgument("unknown max_features value");
}

struct ForestConfig {
  std::size_t max_depth = 8;
  MaxFeatures max_features = MaxFeatures::kAuto;
  std::size_t n_estimators = 100;
  std::uint64_t seed = 42;

  // Tuned per-category defaults (gini criterion throughout).
  static ForestConfig category_default(int category) {
    ForestConfig c;
    switch (category) {
      case 1:
        c.max_depth = 7;
        c.max_features = MaxFeatures::kLog2;
        c.n_estimators = 200;
        break;
      case 2:
        c.max_depth = 8;
        c.max_features = MaxFeatures::kAuto;
        c.n_estimators = 1000;
        break;
      case 3:
        c.max_depth = 8;
        c.max_features = MaxFeatures::kSqrt;
        c.n_estimators = 800;
        break;
      case 4:
        c.max_depth = 8;
        c.max_features = MaxFeatures::kAuto;
        c.n_estimators = 1000;
        break;
      default:
        throw InvalidArgument("category must lie in 1..4");
    }
    return c;
  }

  void validate() const {
    if (max_depth == 0) throw InvalidArgument("max_depth must be at least 1");
    if (n_estimators == 0) throw InvalidArgument("n_estimators must be at least 1");
  }
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double prob = 0.0;  // positive-class fraction at a leaf

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  template <typename FeatureAt>
  double predict_prob_with(FeatureAt&& feature_at) const {
    std::size_t cur = 0;
    while (!nodes[cur].is_leaf()) {
      const TreeNode& n = nodes[cur];
      cur = (feature_at(static_cast<std::uint32_t>(n.feature)) <= n.threshold)
                ? static_cast<std::size_t>(n.left)
                : static_cast<std::size_t>(n.right);
    }
    return nodes[cur].prob;
  }

  double predict_prob(const std::vector<double>& x) const {
    return predict_prob_with([&](std::uint32_t f) { return x[f]; });
  }

  double predict_prob(const FeatureMatrix& x, std::size_t row) const {
    return predict_prob_with([&](std::uint32_t f) { return x.at(row, f); });
  }
};

namespace detail {

struct DenseMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * n_cols + c]; }
};

inline DenseMatrix densify(const FeatureMatrix& x) {
  DenseMatrix d;
  d.n_rows = x.n_rows();
  d.n_cols = x.n_cols;
  d.values.assign(d.n_rows * d.n_cols, 0.0);
  for (std::size_t r = 0; r < d.n_rows; ++r) {
    for (const FeatureMatrix::Entry& e : x.rows[r]) d.values[r * d.n_cols + e.col] = e.value;
  }
  return d;
}

// Recursive splitter. Candidate thresholds are midpoints between consecutive
// distinct sorted values; the best strictly-larger gini gain wins, ties going
// to the earliest sampled feature and then the smallest threshold.
struct TreeBuilder {
  const DenseMatrix& x;
  const std::vector<int>& y;
  std::size_t max_depth;
  std::size_t subset;
  Rng rng;
  std::vector<TreeNode> nodes;

  TreeBuilder(const DenseMatrix& x, const std::vector<int>& y, std::size_t max_depth,
              std::size_t subset, std::uint64_t seed)
      : x(x), y(y), max_depth(max_depth), subset(subset), rng(seed) {}

  std::int32_t make_leaf(std::size_t positives, std::size_t n) {
    TreeNode leaf;
    leaf.prob = static_cast<double>(positives) / static_cast<double>(n);
    nodes.push_back(leaf);
    return static_cast<std::int32_t>(nodes.size() - 1);
  }

  std::int32_t build(std::vector<std::size_t>& idx, std::size_t depth) {
    std::size_t n = idx.size();
    std::size_t positives = 0;
    for (std::size_t i : idx) positives += static_cast<std::size_t>(y[i]);
    if (n < 2 || positives == 0 || positives == n || depth >= max_depth) {
      return make_leaf(positives, n);
    }
    double parent_gini = gini_impurity(n - positives, positives);
    std::vector<std::size_t> features = rng.sample_without_replacement(x.n_cols, subset);

    double best_gain = 0.0;
    std::int32_t best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, int>> vals(n);
    for (std::size_t f : features) {
      for (std::size_t i = 0; i < n; ++i) vals[i] = {x.at(idx[i], f), y[idx[i]]};
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t left_pos = 0;
      for (std::size_t i = 1; i < n; ++i) {
        left_pos += static_cast<std::size_t>(vals[i - 1].second);
        if (vals[i - 1].first == vals[i].first) continue;
        std::size_t nl = i, nr = n - i;
        std::size_t right_pos = positives - left_pos;
        double gl = gini_impurity(nl - left_pos, left_pos);
        double gr = gini_impurity(nr - right_pos, right_pos);
        double gain = parent_gini - (static_cast<double>(nl) * gl +
                                     static_cast<double>(nr) * gr) /
                                        static_cast<double>(n);
        if (gain > best_gain + 1e-12 || (best_feature < 0 && gain >= best_gain)) {
          best_gain = gain;
          best_feature = static_cast<std::int32_t>(f);
          best_threshold = (vals[i - 1].first + vals[i].first) / 2.0;
        }
      }
    }
    if (best_feature < 0) return make_leaf(positives, n);

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx) {
      (x.at(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? left_idx : right_idx)
          .push_back(i);
    }
    TreeNode node;
    node.feature = best_feature;
    node.threshold = best_threshold;
    nodes.push_back(node);
    std::size_t self = nodes.size() - 1;
    idx.clear();
    idx.shrink_to_fit();
    nodes[self].left = build(left_idx, depth + 1);
    nodes[self].right = build(right_idx, depth + 1);
    return static_cast<std::int32_t>(self);
  }
};

inline DecisionTree train_tree_dense(const DenseMatrix& x, const std::vector<std::size_t>& rows,
                                     const std::vector<int>& y, const ForestConfig& config,
                                     std::uint64_t seed, bool bootstrap) {
  std::size_t subset = feature_subset_size(config.max_features, x.n_cols);
  TreeBuilder builder(x, y, config.max_depth, subset, seed);
  std::vector<std::size_t> idx;
  if (bootstrap) {
    idx.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) idx[i] = rows[builder.rng.index(rows.size())];
  } else {
    idx = rows;
  }
  DecisionTree tree;
  builder.build(idx, 0);
  tree.nodes = std::move(builder.nodes);
  return tree;
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

inline void validate_training_data(std::size_t n_rows, std::size_t n_cols,
                                   const std::vector<int>& y) {
  if (n_rows != y.size()) throw InvalidArgument("training data: row/label count mismatch");
  if (n_rows < 2) throw InvalidArgument("training data: need at least 2 rows");
  if (n_cols == 0) throw InvalidArgument("training data: no feature columns");
  for (int v : y) {
    if (v != 0 && v != 1) throw InvalidArgument("training data: labels must be 0 or 1");
  }
}

}  // namespace detail

struct RandomForest {
  ForestConfig config;
  std::vector<DecisionTree> trees;

  // soft vote: mean of the trees' leaf probabilities
  template <typename FeatureAt>
  double predict_prob_with(FeatureAt&& feature_at) const {
    double total = 0.0;
    for (const DecisionTree& t : trees) total += t.predict_prob_with(feature_at);
    return total / static_cast<double>(trees.size());
  }

  double predict_prob(const FeatureMatrix& x, std::size_t row) const {
    return predict_prob_with([&](std::uint32_t f) { return x.at(row, f); });
  }
};

// Trains a single tree on the full data (no bootstrap); feature subsets are
// still drawn per node.
inline DecisionTree train_tree(const FeatureMatrix& x, const std::vector<int>& y,
                               const ForestConfig& config) {
  config.validate();
  detail::validate_training_data(x.n_rows(), x.n_cols, y);
  detail::DenseMatrix dense = detail::densify(x);
  return detail::train_tree_dense(dense, detail::all_rows(dense.n_rows), y, config, config.seed,
                                  /*bootstrap=*/false);
}

namespace detail {

inline RandomForest train_forest_dense(const DenseMatrix& dense,
                                       const std::vector<std::size_t>& rows,
                                       const std::vector<int>& y, const ForestConfig& config,
                                       std::size_t jobs) {
  RandomForest forest;
  forest.config = config;
  forest.trees.resize(config.n_estimators);
  // Per-tree seeds are derived up front, so any thread schedule grows the
  // same forest.
  auto train_range = [&](std::size_t first, std::size_t last) {
    for (std::size_t t = first; t < last; ++t) {
      std::uint64_t tree_seed = derive_seed(config.seed, "tree/" + std::to_string(t));
      forest.trees[t] = train_tree_dense(dense, rows, y, config, tree_seed, /*bootstrap=*/true);
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, config.n_estimators));
  if (jobs == 1) {
    train_range(0, config.n_estimators);
  } else {
    std::vector<std::thread> workers;
    std::size_t chunk = (config.n_estimators + jobs - 1) / jobs;
    for (std::size_t w = 0; w < jobs; ++w) {
      std::size_t first = w * chunk;
      std::size_t last = std::min(first + chunk, config.n_estimators);
      if (first >= last) break;
      workers.emplace_back(train_range, first, last);
    }
    for (std::thread& th : workers) th.join();
  }
  return forest;
}

}  // namespace detail

// Bagged forest: every tree sees a bootstrap resample (n draws with
// replacement) of the training rows.
inline RandomForest train_forest(const FeatureMatrix& x, const std::vector<int>& y,
                                 const ForestConfig& config, std::size_t jobs = 1) {
  config.validate();
  detail::validate_training_data(x.n_rows(), x.n_cols, y);
  detail::DenseMatrix dense = detail::densify(x);
  return detail::train_forest_dense(dense, detail::all_rows(dense.n_rows), y, config, jobs);
}

// Hard labels from the soft vote; ties at exactly 0.5 go to class 0.
inline std::vector<int> forest_predict(const RandomForest& forest, const FeatureMatrix& x) {
  std::vector<int> out(x.n_rows());
  for (std::size_t r = 0; r < x.n_rows(); ++r) {
    out[r] = forest.predict_prob(x, r) > 0.5 ? 1 : 0;
  }
  return out;
}

// --- grid search ---------------------------------------------------------

struct ForestGrid {
  std::vector<std::size_t> max_depth;
  std::vector<MaxFeatures> max_features;
  std::vector<std::size_t> n_estimators;
};

struct GridSearchRow {
  ForestConfig config;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

struct GridSearchResult {
  ForestConfig best;
  double best_mean_accuracy = 0.0;
  std::vector<GridSearchRow> rows;  // enumeration order
};

// Exhaustive sweep over the grid, scored by k-fold cross-validated accuracy.
// Combinations are enumerated depth -> features -> estimators; on ties the
// earlier combination wins. All combinations share one fold plan.
inline GridSearchResult grid_search(const FeatureMatrix& x, const std::vector<int>& y,
                                    const ForestGrid& grid, std::size_t folds,
                                    std::uint64_t seed, std::size_t jobs = 1) {
  if (grid.max_depth.empty() || grid.max_features.empty() || grid.n_estimators.empty()) {
    throw InvalidArgument("grid_search: empty grid axis");
  }
  detail::validate_training_data(x.n_rows(), x.n_cols, y);
  detail::DenseMatrix dense = detail::densify(x);
  std::vector<std::vector<std::size_t>> fold_rows =
      kfold(detail::all_rows(x.n_rows()), folds, derive_seed(seed, "grid/folds"));

  GridSearchResult result;
  bool have_best = false;
  std::size_t combo = 0;
  for (std::size_t depth : grid.max_depth) {
    for (MaxFeatures mf : grid.max_features) {
      for (std::size_t trees : grid.n_estimators) {
        ForestConfig config;
        config.max_depth = depth;
        config.max_features = mf;
        config.n_estimators = trees;
        config.validate();
        std::vector<double> fold_acc;
        for (std::size_t f = 0; f < fold_rows.size(); ++f) {
          std::vector<std::size_t> train_rows;
          for (std::size_t g = 0; g < fold_rows.size(); ++g) {
            if (g == f) continue;
            train_rows.insert(train_rows.end(), fold_rows[g].begin(), fold_rows[g].end());
          }
          config.seed = derive_seed(
              seed, "grid/combo" + std::to_string(combo) + "/fold" + std::to_string(f));
          RandomForest forest = detail::train_forest_dense(dense, train_rows, y, config, jobs);
          std::size_t correct = 0;
          for (std::size_t r : fold_rows[f]) {
            double p = forest.predict_prob_with(
                [&](std::uint32_t col) { return dense.at(r, col); });
            int pred = p > 0.5 ? 1 : 0;
            correct += static_cast<std::size_t>(pred == y[r]);
          }
          fold_acc.push_back(static_cast<double>(correct) /
                             static_cast<double>(fold_rows[f].size()));
        }
        double mean = 0.0;
        for (double a : fold_acc) mean += a / static_cast<double>(fold_acc.size());
        double var = 0.0;
        for (double a : fold_acc) var += (a - mean) * (a - mean) / static_cast<double>(fold_acc.size());
        GridSearchRow row;
        row.config = config;
        row.config.seed = seed;
        row.mean_accuracy = mean;
        row.std_accuracy = std::sqrt(var);
        result.rows.push_back(row);
        if (!have_best || mean > result.best_mean_accuracy) {
          have_best = true;
          result.best = row.config;
          result.best_mean_accuracy = mean;
        }
        ++combo;
      }
    }
  }
  return result;
}

}  // namespace edtweetlab

#endif  // EDTWEETLAB_FOREST_HPP_
