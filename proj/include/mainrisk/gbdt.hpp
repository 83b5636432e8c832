#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mainrisk/features.hpp"

namespace mainrisk::gbdt {

struct TrainConfig {
    int iterations = 100;
    int max_depth = 3;
    double subsample = 0.5;
    double learning_rate = 0.1;
    int min_samples_leaf = 5;
    std::uint64_t seed = 0;

    void validate() const {
        if (iterations < 1) {
            throw std::invalid_argument("iterations must be >= 1");
        }
        if (max_depth < 1) {
            throw std::invalid_argument("max_depth must be >= 1");
        }
        if (!(subsample > 0.0 && subsample <= 1.0)) {
            throw std::invalid_argument("subsample must be in (0, 1]");
        }
        if (learning_rate <= 0.0) {
            throw std::invalid_argument("learning_rate must be positive");
        }
        if (min_samples_leaf < 1) {
            throw std::invalid_argument("min_samples_leaf must be >= 1");
        }
    }
};

/// One node of a regression tree, stored flat. Internal nodes carry the
/// split (rows with feature < threshold go left) and the sum-of-squares
/// reduction achieved on the rows that reached the node; leaves carry the
/// mean target of their rows.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double gain = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(std::span<const double> row) const {
        int i = 0;
        while (!nodes[i].is_leaf()) {
            i = row[nodes[i].feature] < nodes[i].threshold ? nodes[i].left
                                                           : nodes[i].right;
        }
        return nodes[i].value;
    }

    int max_leaf_depth() const {
        int deepest = 0;
        struct Item {
            int node;
            int depth;
        };
        std::vector<Item> stack = {{0, 0}};
        while (!stack.empty()) {
            const auto [n, d] = stack.back();
            stack.pop_back();
            if (nodes[n].is_leaf()) {
                deepest = std::max(deepest, d);
            } else {
                stack.push_back({nodes[n].left, d + 1});
                stack.push_back({nodes[n].right, d + 1});
            }
        }
        return deepest;
    }
};

struct SplitCandidate {
    double threshold = 0.0;
    double gain = 0.0;
};

/// Best sum-of-squares split of one column. Thresholds are midpoints
/// between adjacent distinct sorted values; gain is SS(parent) − SS(left)
/// − SS(right). Returns nullopt when every value is identical or no split
/// leaves min_samples_leaf rows on both sides. Ties go to the smallest
/// threshold.
inline std::optional<SplitCandidate> best_split(std::span<const double> xs,
                                                std::span<const double> ys,
                                                int min_samples_leaf) {
    const size_t n = xs.size();
    if (n < 2 * static_cast<size_t>(min_samples_leaf)) {
        return std::nullopt;
    }
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return xs[a] < xs[b]; });

    // Work with mean-centered targets: sums of squares stay well scaled and
    // a shift of the targets cannot move any gain.
    double mean = 0.0;
    for (const double y : ys) {
        mean += y;
    }
    mean /= static_cast<double>(n);
    double total = 0.0, total_sq = 0.0;
    for (const double y : ys) {
        const double c = y - mean;
        total += c;
        total_sq += c * c;
    }
    const double parent_ss = total_sq - total * total / static_cast<double>(n);

    std::optional<SplitCandidate> best;
    double left_sum = 0.0, left_sq = 0.0;
    for (size_t i = 1; i < n; ++i) {
        const double y = ys[order[i - 1]] - mean;
        left_sum += y;
        left_sq += y * y;
        if (i < static_cast<size_t>(min_samples_leaf) ||
            n - i < static_cast<size_t>(min_samples_leaf)) {
            continue;
        }
        const double lo = xs[order[i - 1]];
        const double hi = xs[order[i]];
        if (lo == hi) {
            continue;
        }
        const double nl = static_cast<double>(i);
        const double nr = static_cast<double>(n - i);
        const double right_sum = total - left_sum;
        const double right_sq = total_sq - left_sq;
        const double gain = parent_ss - (left_sq - left_sum * left_sum / nl) -
                            (right_sq - right_sum * right_sum / nr);
        // Strict > keeps the first (smallest) threshold on gain ties.
        if (!best || gain > best->gain) {
            best = SplitCandidate{0.5 * (lo + hi), gain};
        }
    }
    return best;
}

namespace detail {

/// Row accessor decoupling tree growth from FeatureMatrix storage.
struct Frame {
    const std::vector<std::vector<double>>* values;
    double at(size_t row, int col) const { return (*values)[row][col]; }
    int n_cols() const {
        return values->empty() ? 0 : static_cast<int>((*values)[0].size());
    }
};

inline int grow(RegressionTree& tree, const Frame& frame,
                std::span<const double> targets, std::vector<size_t>& rows,
                int depth, int max_depth, int min_samples_leaf) {
    double sum = 0.0;
    double lo = targets[rows.front()], hi = lo;
    for (const size_t r : rows) {
        sum += targets[r];
        lo = std::min(lo, targets[r]);
        hi = std::max(hi, targets[r]);
    }
    const double mean = sum / static_cast<double>(rows.size());

    auto make_leaf = [&] {
        tree.nodes.push_back(TreeNode{-1, 0.0, 0.0, -1, -1, mean});
        return static_cast<int>(tree.nodes.size()) - 1;
    };

    // Constant targets have nothing to split; the exact check avoids
    // phantom gains from floating-point cancellation.
    if (depth >= max_depth || lo == hi ||
        rows.size() < 2 * static_cast<size_t>(min_samples_leaf)) {
        return make_leaf();
    }

    // Best split across features: gain desc, then threshold asc, then
    // feature index asc. The total order keeps growth deterministic no
    // matter how the search is scheduled.
    int best_feature = -1;
    SplitCandidate best{};
    std::vector<double> xs(rows.size()), ys(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        ys[i] = targets[rows[i]];
    }
    for (int f = 0; f < frame.n_cols(); ++f) {
        for (size_t i = 0; i < rows.size(); ++i) {
            xs[i] = frame.at(rows[i], f);
        }
        const auto cand = best_split(xs, ys, min_samples_leaf);
        if (!cand) {
            continue;
        }
        if (best_feature < 0 || cand->gain > best.gain ||
            (cand->gain == best.gain && cand->threshold < best.threshold)) {
            best_feature = f;
            best = *cand;
        }
    }
    if (best_feature < 0 || best.gain <= 0.0) {
        return make_leaf();
    }

    std::vector<size_t> left_rows, right_rows;
    for (const size_t r : rows) {
        (frame.at(r, best_feature) < best.threshold ? left_rows : right_rows)
            .push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    const int me = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{best_feature, best.threshold, best.gain,
                                  -1, -1, 0.0});
    // grow() may reallocate tree.nodes; index after both calls return.
    const int left = grow(tree, frame, targets, left_rows, depth + 1,
                          max_depth, min_samples_leaf);
    const int right = grow(tree, frame, targets, right_rows, depth + 1,
                           max_depth, min_samples_leaf);
    tree.nodes[me].left = left;
    tree.nodes[me].right = right;
    return me;
}

}  // namespace detail

/// Greedy CART growth to max_depth with mean-target leaves. `row_indices`
/// selects the training rows (the stochastic subsample during boosting).
inline RegressionTree fit_tree(const std::vector<std::vector<double>>& values,
                               std::span<const double> targets,
                               std::vector<size_t> row_indices, int max_depth,
                               int min_samples_leaf) {
    if (row_indices.empty()) {
        throw std::invalid_argument("fit_tree: no rows");
    }
    RegressionTree tree;
    detail::Frame frame{&values};
    detail::grow(tree, frame, targets, row_indices, 0, max_depth,
                 min_samples_leaf);
    return tree;
}

/// Additive model: base score (training label mean) plus shrinkage-weighted
/// regression trees fit to residuals. `objective` records the full-sample
/// squared-error after each boosting iteration.
struct GbdtModel {
    TrainConfig config;
    std::vector<std::string> feature_names;
    double base_score = 0.0;
    std::vector<double> tree_weights;
    std::vector<RegressionTree> trees;
    std::vector<double> objective;

    size_t total_splits() const {
        size_t n = 0;
        for (const auto& t : trees) {
            for (const auto& node : t.nodes) {
                if (!node.is_leaf()) {
                    ++n;
                }
            }
        }
        return n;
    }
};

namespace detail {

/// Maps model feature indices onto another matrix's columns, erroring on
/// the first missing column by name.
inline std::vector<int> column_mapping(const GbdtModel& model,
                                       const FeatureMatrix& m) {
    std::vector<int> mapping;
    mapping.reserve(model.feature_names.size());
    for (const auto& name : model.feature_names) {
        const int idx = m.column_index(name);
        if (idx < 0) {
            throw std::invalid_argument("missing feature column: " + name);
        }
        mapping.push_back(idx);
    }
    return mapping;
}

}  // namespace detail

/// Stochastic gradient boosting for squared loss: each iteration draws a
/// fresh row subsample without replacement, fits a tree to the current
/// residuals and adds it with the constant learning-rate weight.
inline GbdtModel train(const FeatureMatrix& matrix, const TrainConfig& config,
                       std::string* warning = nullptr) {
    config.validate();
    if (!matrix.labels) {
        throw std::invalid_argument("train: matrix has no labels");
    }
    const size_t n = matrix.n_rows();
    if (n < 2) {
        throw std::invalid_argument("train: need at least 2 rows");
    }
    for (const int y : *matrix.labels) {
        if (y != 0 && y != 1) {
            throw std::invalid_argument("train: labels must be 0/1");
        }
    }

    GbdtModel model;
    model.config = config;
    model.feature_names = matrix.columns;

    std::vector<double> y(n);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        y[i] = static_cast<double>((*matrix.labels)[i]);
        sum += y[i];
    }
    model.base_score = sum / static_cast<double>(n);

    if (sum == 0.0 || sum == static_cast<double>(n)) {
        if (warning) {
            *warning = "degenerate label vector: model is the constant base score";
        }
        return model;
    }

    std::vector<double> score(n, model.base_score);
    std::mt19937_64 rng(config.seed);
    const size_t k = std::clamp<size_t>(
        static_cast<size_t>(config.subsample * static_cast<double>(n)), 1, n);

    std::vector<size_t> pool(n);
    std::iota(pool.begin(), pool.end(), size_t{0});
    std::vector<double> residuals(n);

    for (int iter = 0; iter < config.iterations; ++iter) {
        std::vector<size_t> drawn;
        if (k == n) {
            drawn = pool;
        } else {
            std::vector<size_t> shuffled = pool;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            drawn.assign(shuffled.begin(), shuffled.begin() + k);
            std::sort(drawn.begin(), drawn.end());
        }
        for (size_t i = 0; i < n; ++i) {
            residuals[i] = y[i] - score[i];
        }
        auto tree = fit_tree(matrix.values, residuals, std::move(drawn),
                             config.max_depth, config.min_samples_leaf);
        double obj = 0.0;
        for (size_t i = 0; i < n; ++i) {
            score[i] +=
                config.learning_rate * tree.predict(matrix.values[i]);
            const double r = y[i] - score[i];
            obj += r * r;
        }
        model.objective.push_back(obj);
        model.tree_weights.push_back(config.learning_rate);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline double predict_row(const GbdtModel& model, std::span<const double> row) {
    double score = model.base_score;
    for (size_t j = 0; j < model.trees.size(); ++j) {
        score += model.tree_weights[j] * model.trees[j].predict(row);
    }
    return std::clamp(score, 0.0, 1.0);
}

/// Scores every row of a matrix whose columns may be ordered differently
/// from the training matrix; alignment is by column name.
inline std::vector<double> predict(const GbdtModel& model,
                                   const FeatureMatrix& m) {
    const auto mapping = detail::column_mapping(model, m);
    std::vector<double> out;
    out.reserve(m.n_rows());
    std::vector<double> row(mapping.size());
    for (size_t i = 0; i < m.n_rows(); ++i) {
        for (size_t c = 0; c < mapping.size(); ++c) {
            row[c] = m.values[i][mapping[c]];
        }
        out.push_back(predict_row(model, row));
    }
    return out;
}

/// Gini importance: per feature, the sum of impurity (sum-of-squares)
/// reductions over every split that uses it, normalized to sum to one.
inline std::vector<double> gini_importance(const GbdtModel& model) {
    std::vector<double> raw(model.feature_names.size(), 0.0);
    double total = 0.0;
    for (const auto& tree : model.trees) {
        for (const auto& node : tree.nodes) {
            if (!node.is_leaf()) {
                raw[node.feature] += node.gain;
                total += node.gain;
            }
        }
    }
    if (total <= 0.0) {
        throw std::invalid_argument("gini_importance: model has no splits");
    }
    for (auto& v : raw) {
        v /= total;
    }
    return raw;
}

// --- model serialization ---------------------------------------------------

inline nlohmann::ordered_json tree_to_json(const RegressionTree& tree) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : tree.nodes) {
        if (n.is_leaf()) {
            nodes.push_back({{"value", n.value}});
        } else {
            nodes.push_back({{"feature", n.feature},
                             {"threshold", n.threshold},
                             {"gain", n.gain},
                             {"left", n.left},
                             {"right", n.right}});
        }
    }
    return nodes;
}

inline nlohmann::ordered_json model_to_json(const GbdtModel& model) {
    nlohmann::ordered_json doc;
    doc["format"] = "mainrisk.gbdt";
    doc["version"] = 1;
    doc["config"] = {{"iterations", model.config.iterations},
                     {"max_depth", model.config.max_depth},
                     {"subsample", model.config.subsample},
                     {"learning_rate", model.config.learning_rate},
                     {"min_samples_leaf", model.config.min_samples_leaf},
                     {"seed", model.config.seed}};
    doc["feature_names"] = model.feature_names;
    doc["base_score"] = model.base_score;
    doc["objective"] = model.objective;
    auto trees = nlohmann::ordered_json::array();
    for (size_t j = 0; j < model.trees.size(); ++j) {
        trees.push_back({{"weight", model.tree_weights[j]},
                         {"nodes", tree_to_json(model.trees[j])}});
    }
    doc["trees"] = std::move(trees);
    return doc;
}

inline GbdtModel model_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "mainrisk.gbdt" || doc.value("version", 0) != 1) {
        throw std::invalid_argument("not a mainrisk.gbdt v1 model document");
    }
    GbdtModel model;
    const auto& c = doc.at("config");
    model.config.iterations = c.at("iterations").get<int>();
    model.config.max_depth = c.at("max_depth").get<int>();
    model.config.subsample = c.at("subsample").get<double>();
    model.config.learning_rate = c.at("learning_rate").get<double>();
    model.config.min_samples_leaf = c.at("min_samples_leaf").get<int>();
    model.config.seed = c.at("seed").get<std::uint64_t>();
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    model.base_score = doc.at("base_score").get<double>();
    model.objective = doc.at("objective").get<std::vector<double>>();
    for (const auto& t : doc.at("trees")) {
        model.tree_weights.push_back(t.at("weight").get<double>());
        RegressionTree tree;
        for (const auto& n : t.at("nodes")) {
            TreeNode node;
            if (n.contains("value")) {
                node.value = n.at("value").get<double>();
            } else {
                node.feature = n.at("feature").get<int>();
                node.threshold = n.at("threshold").get<double>();
                node.gain = n.at("gain").get<double>();
                node.left = n.at("left").get<int>();
                node.right = n.at("right").get<int>();
            }
            tree.nodes.push_back(node);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline void save_model(const GbdtModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write model file: " + path);
    }
    out << model_to_json(model).dump(2) << '\n';
}

inline GbdtModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read model file: " + path);
    }
    nlohmann::json doc;
    in >> doc;
    return model_from_json(doc);
}

}  // namespace mainrisk::gbdt
