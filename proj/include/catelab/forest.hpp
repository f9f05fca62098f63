/*
 * Copyright 2026 The catelab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// CART regression trees grown by greedy variance reduction, and bagged
// forests of them.

#ifndef CATELAB_FOREST_HPP
#define CATELAB_FOREST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "catelab/common.hpp"

namespace catelab::forest {

struct TreeConfig {
    int max_depth = -1;      // < 0: unlimited
    int min_leaf_size = 5;
    int features_per_split = 0;  // 0: ceil(sqrt(d)); >= d: every feature
};

struct ForestConfig {
    int n_trees = 100;
    bool bootstrap = true;
    TreeConfig tree{};
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean training target of the node

    bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
public:
    RegressionTree() = default;
    RegressionTree(std::vector<TreeNode> nodes, Eigen::Index width) : nodes_(std::move(nodes)), width_(width) {}

    double predict_row(const Matrix& x, Eigen::Index row) const {
        int i = 0;
        while (!nodes_[static_cast<std::size_t>(i)].is_leaf()) {
            const auto& n = nodes_[static_cast<std::size_t>(i)];
            i = x(row, n.feature) < n.threshold ? n.left : n.right;
        }
        return nodes_[static_cast<std::size_t>(i)].value;
    }

    Vector predict(const Matrix& x) const {
        require(x.cols() == width_, "tree predict: width mismatch");
        Vector out(x.rows());
        for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) = predict_row(x, r);
        return out;
    }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    Eigen::Index width() const { return width_; }

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
    }

    int depth() const { return depth_from(0); }

private:
    int depth_from(int i) const {
        const auto& n = nodes_[static_cast<std::size_t>(i)];
        if (n.is_leaf()) return 0;
        return 1 + std::max(depth_from(n.left), depth_from(n.right));
    }

    std::vector<TreeNode> nodes_;
    Eigen::Index width_ = 0;
};

namespace detail {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, const Vector& y, const TreeConfig& config, Rng& rng)
        : x_(x), y_(y), config_(config), rng_(rng) {
        const auto d = static_cast<int>(x.cols());
        mtry_ = config.features_per_split > 0 ? std::min(config.features_per_split, d)
                                              : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
        features_.resize(static_cast<std::size_t>(d));
        std::iota(features_.begin(), features_.end(), 0);
    }

    int grow(std::vector<Eigen::Index>& rows, int depth) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        double sum = 0.0;
        for (auto r : rows) sum += y_(r);
        nodes_[static_cast<std::size_t>(id)].value = sum / static_cast<double>(rows.size());

        const bool depth_ok = config_.max_depth < 0 || depth < config_.max_depth;
        if (!depth_ok || rows.size() < 2 * static_cast<std::size_t>(config_.min_leaf_size) || is_pure(rows)) {
            return id;
        }
        const SplitChoice split = best_split(rows);
        if (split.feature < 0) return id;

        std::vector<Eigen::Index> left, right;
        for (auto r : rows) (x_(r, split.feature) < split.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        const int l = grow(left, depth + 1);
        const int rgt = grow(right, depth + 1);
        auto& node = nodes_[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = rgt;
        return id;
    }

    std::vector<TreeNode> take_nodes() { return std::move(nodes_); }

private:
    bool is_pure(const std::vector<Eigen::Index>& rows) const {
        const double first = y_(rows.front());
        return std::all_of(rows.begin(), rows.end(), [&](auto r) { return y_(r) == first; });
    }

    SplitChoice best_split(const std::vector<Eigen::Index>& rows) {
        // Partial Fisher-Yates picks the candidate features for this node.
        for (int i = 0; i < mtry_; ++i) {
            std::uniform_int_distribution<int> pick(i, static_cast<int>(features_.size()) - 1);
            std::swap(features_[static_cast<std::size_t>(i)], features_[static_cast<std::size_t>(pick(rng_))]);
        }
        SplitChoice best;
        const auto n = rows.size();
        const auto min_leaf = static_cast<std::size_t>(config_.min_leaf_size);
        double total = 0.0;
        for (auto r : rows) total += y_(r);
        std::vector<std::pair<double, double>> order(n);
        for (int fi = 0; fi < mtry_; ++fi) {
            const int f = features_[static_cast<std::size_t>(fi)];
            for (std::size_t i = 0; i < n; ++i) order[i] = {x_(rows[i], f), y_(rows[i])};
            std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
            if (order.front().first == order.back().first) continue;
            double left_sum = 0.0;
            for (std::size_t i = 1; i < n; ++i) {
                left_sum += order[i - 1].second;
                if (order[i].first == order[i - 1].first) continue;
                if (i < min_leaf || n - i < min_leaf) continue;
                const double nl = static_cast<double>(i);
                const double nr = static_cast<double>(n - i);
                const double mean_diff = left_sum / nl - (total - left_sum) / nr;
                // SSE reduction of the split.
                const double gain = nl * nr / static_cast<double>(n) * mean_diff * mean_diff;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = f;
                    best.threshold = 0.5 * (order[i - 1].first + order[i].first);
                    // Midpoints can round onto the upper value for adjacent doubles.
                    if (!(best.threshold > order[i - 1].first)) best.threshold = order[i].first;
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    const Vector& y_;
    TreeConfig config_;
    Rng& rng_;
    int mtry_ = 1;
    std::vector<int> features_;
    std::vector<TreeNode> nodes_;
};

}  // namespace detail

inline RegressionTree fit_tree_rows(const Matrix& x, const Vector& y, std::vector<Eigen::Index> rows,
                                    const TreeConfig& config, Rng& rng) {
    require(!rows.empty(), "fit_tree: empty data");
    require(config.min_leaf_size >= 1, "fit_tree: min_leaf_size must be >= 1");
    detail::TreeBuilder builder(x, y, config, rng);
    builder.grow(rows, 0);
    return RegressionTree(builder.take_nodes(), x.cols());
}

inline RegressionTree fit_tree(const Matrix& x, const Vector& y, const TreeConfig& config, Rng& rng) {
    require(x.rows() >= 1 && x.rows() == y.size(), "fit_tree: need matching, non-empty X and y");
    require(x.rows() >= config.min_leaf_size, "fit_tree: fewer rows than min_leaf_size");
    require(x.allFinite() && y.allFinite(), "fit_tree: non-finite input");
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    return fit_tree_rows(x, y, std::move(rows), config, rng);
}

class Forest {
public:
    Forest() = default;
    Forest(std::vector<RegressionTree> trees, std::uint64_t seed) : trees_(std::move(trees)), seed_(seed) {
        require(!trees_.empty(), "forest needs at least one tree");
    }

    Vector predict(const Matrix& x) const {
        require(!trees_.empty(), "forest predict: forest is empty");
        require(x.cols() == trees_.front().width(), "forest predict: width mismatch");
        Vector sum = Vector::Zero(x.rows());
        for (const auto& t : trees_) sum += t.predict(x);
        return sum / static_cast<double>(trees_.size());
    }

    const std::vector<RegressionTree>& trees() const { return trees_; }
    std::size_t n_trees() const { return trees_.size(); }
    std::uint64_t seed() const { return seed_; }

private:
    std::vector<RegressionTree> trees_;
    std::uint64_t seed_ = 0;
};

/// Each tree draws its own generator from (seed, tree index), so trees can
/// be grown in any order or in parallel with identical results.
inline Forest fit_forest(const Matrix& x, const Vector& y, const ForestConfig& config, std::uint64_t seed) {
    require(config.n_trees >= 1, "fit_forest: n_trees must be >= 1");
    require(x.rows() >= 1 && x.rows() == y.size(), "fit_forest: need matching, non-empty X and y");
    require(x.allFinite() && y.allFinite(), "fit_forest: non-finite input");
    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<std::size_t>(config.n_trees));
    const auto n = static_cast<std::size_t>(x.rows());
    for (int t = 0; t < config.n_trees; ++t) {
        Rng rng(derive_seed(seed, "tree", t));
        std::vector<Eigen::Index> rows(n);
        if (config.bootstrap) {
            std::uniform_int_distribution<Eigen::Index> pick(0, x.rows() - 1);
            for (auto& r : rows) r = pick(rng);
        } else {
            std::iota(rows.begin(), rows.end(), Eigen::Index{0});
        }
        trees.push_back(fit_tree_rows(x, y, std::move(rows), config.tree, rng));
    }
    return Forest(std::move(trees), seed);
}

inline Forest fit_forest(const Matrix& x, const Vector& y, const ForestConfig& config, Rng& rng) {
    return fit_forest(x, y, config, rng());
}

inline Vector predict(const Forest& forest, const Matrix& x) { return forest.predict(x); }

}  // namespace catelab::forest

#endif  // CATELAB_FOREST_HPP
