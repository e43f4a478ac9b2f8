#pragma once

#include "hteselect/data.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace hteselect {

// Flat binary regression tree. feature < 0 marks a leaf.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict_row(const Matrix& X, Eigen::Index row) const {
        int nd = 0;
        while (!nodes[static_cast<std::size_t>(nd)].is_leaf()) {
            const TreeNode& t = nodes[static_cast<std::size_t>(nd)];
            nd = X(row, t.feature) <= t.threshold ? t.left : t.right;
        }
        return nodes[static_cast<std::size_t>(nd)].value;
    }

    Vector predict(const Matrix& X) const {
        Vector out(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_row(X, i);
        return out;
    }

    int depth() const { return depth_from(0); }

private:
    int depth_from(int nd) const {
        const TreeNode& t = nodes[static_cast<std::size_t>(nd)];
        if (t.is_leaf()) return 0;
        return 1 + std::max(depth_from(t.left), depth_from(t.right));
    }
};

// Greedy least-squares tree builder over a fixed training matrix. Feature
// orderings are sorted once at construction and reused across every tree fit
// on the same rows (all boosting rounds, all targets). Each level walks the
// full sorted order per feature and buckets rows by their current node, so a
// depth-D fit costs O(D * d * n) after the one-time sort.
//
// Split candidates are midpoints between consecutive distinct feature values
// within a node; ties in gain resolve to the lowest feature index, then the
// lowest threshold. Splitting stops at max_depth, min_leaf, or zero variance.
class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, const Vector& w) : X_(X), w_(w) {
        n_ = static_cast<int>(X.rows());
        d_ = static_cast<int>(X.cols());
        require(w.size() == n_, "tree: weight length mismatch");
        require((w.array() >= 0.0).all(), "tree: weights must be nonnegative");
        sorted_.resize(static_cast<std::size_t>(d_));
        sorted_values_.resize(static_cast<std::size_t>(d_));
        for (int f = 0; f < d_; ++f) {
            auto& ord = sorted_[static_cast<std::size_t>(f)];
            ord.resize(static_cast<std::size_t>(n_));
            std::iota(ord.begin(), ord.end(), 0);
            std::stable_sort(ord.begin(), ord.end(),
                             [&](int a, int b) { return X(a, f) < X(b, f); });
            auto& vals = sorted_values_[static_cast<std::size_t>(f)];
            vals.resize(static_cast<std::size_t>(n_));
            for (int k = 0; k < n_; ++k) vals[static_cast<std::size_t>(k)] = X(ord[static_cast<std::size_t>(k)], f);
        }
        node_of_.resize(static_cast<std::size_t>(n_));
    }

    Tree fit(const Vector& y, int max_depth, int min_leaf) {
        require(y.size() == n_, "tree: target length mismatch");
        require(min_leaf >= 1, "tree: min_leaf must be positive");

        struct NodeStats {
            std::int64_t count = 0;
            double sum_w = 0, sum_wy = 0, sum_wy2 = 0, sum_y = 0;
            int flat = -1;       // index into tree.nodes
            bool active = false;  // may still split at the current level
            int best_feature = -1;
            double best_threshold = 0, best_gain = 0;
            double sse() const {
                if (sum_w <= 0.0) return 0.0;
                return std::max(0.0, sum_wy2 - sum_wy * sum_wy / sum_w);
            }
            double leaf_value() const {
                if (sum_w > 0.0) return sum_wy / sum_w;
                return count > 0 ? sum_y / static_cast<double>(count) : 0.0;
            }
        };

        Tree tree;
        tree.nodes.push_back(TreeNode{});
        std::vector<NodeStats> stats(1);
        stats[0].flat = 0;
        for (int i = 0; i < n_; ++i) {
            node_of_[static_cast<std::size_t>(i)] = 0;
            double wi = w_(i), yi = y(i);
            stats[0].count++;
            stats[0].sum_w += wi;
            stats[0].sum_wy += wi * yi;
            stats[0].sum_wy2 += wi * yi * yi;
            stats[0].sum_y += yi;
        }

        std::vector<int> level_nodes{0};
        for (int depth = 0; depth < max_depth && !level_nodes.empty(); ++depth) {
            bool any_active = false;
            for (int nd : level_nodes) {
                NodeStats& s = stats[static_cast<std::size_t>(nd)];
                double tol = 1e-12 * (1.0 + std::abs(s.sum_wy2));
                s.active = s.count >= 2 * static_cast<std::int64_t>(min_leaf) && s.sse() > tol;
                s.best_feature = -1;
                s.best_gain = 0.0;
                any_active = any_active || s.active;
            }
            if (!any_active) break;

            scan_splits(y, stats, min_leaf);

            // materialize children and reassign rows
            std::vector<int> next_level;
            std::vector<int> left_of(stats.size(), -1), right_of(stats.size(), -1);
            for (int nd : level_nodes) {
                NodeStats& s = stats[static_cast<std::size_t>(nd)];
                if (s.active && s.best_feature < 0) s.active = false;  // permanent leaf
                if (!s.active) continue;
                int li = static_cast<int>(stats.size());
                stats.emplace_back();
                int ri = static_cast<int>(stats.size());
                stats.emplace_back();
                NodeStats& sl = stats[static_cast<std::size_t>(li)];
                NodeStats& sr = stats[static_cast<std::size_t>(ri)];
                sl.flat = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back(TreeNode{});
                sr.flat = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back(TreeNode{});
                NodeStats& sp = stats[static_cast<std::size_t>(nd)];  // emplace may reallocate
                TreeNode& parent = tree.nodes[static_cast<std::size_t>(sp.flat)];
                parent.feature = sp.best_feature;
                parent.threshold = sp.best_threshold;
                parent.left = sl.flat;
                parent.right = sr.flat;
                left_of[static_cast<std::size_t>(nd)] = li;
                right_of[static_cast<std::size_t>(nd)] = ri;
                next_level.push_back(li);
                next_level.push_back(ri);
            }
            if (next_level.empty()) break;

            for (int i = 0; i < n_; ++i) {
                int nd = node_of_[static_cast<std::size_t>(i)];
                if (left_of[static_cast<std::size_t>(nd)] < 0) continue;
                const NodeStats& sp = stats[static_cast<std::size_t>(nd)];
                const TreeNode& parent = tree.nodes[static_cast<std::size_t>(sp.flat)];
                int child = X_(i, parent.feature) <= parent.threshold ? left_of[static_cast<std::size_t>(nd)]
                                                                      : right_of[static_cast<std::size_t>(nd)];
                node_of_[static_cast<std::size_t>(i)] = child;
                NodeStats& sc = stats[static_cast<std::size_t>(child)];
                double wi = w_(i), yi = y(i);
                sc.count++;
                sc.sum_w += wi;
                sc.sum_wy += wi * yi;
                sc.sum_wy2 += wi * yi * yi;
                sc.sum_y += yi;
            }
            level_nodes = std::move(next_level);
        }

        for (std::size_t s = 0; s < stats.size(); ++s) {
            TreeNode& t = tree.nodes[static_cast<std::size_t>(stats[s].flat)];
            if (t.feature < 0) t.value = stats[s].leaf_value();
        }

        // leaf value per training row, for O(n) boosting updates
        leaf_value_of_rows_.resize(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            int nd = node_of_[static_cast<std::size_t>(i)];
            leaf_value_of_rows_[static_cast<std::size_t>(i)] =
                tree.nodes[static_cast<std::size_t>(stats[static_cast<std::size_t>(nd)].flat)].value;
        }
        return tree;
    }

    const std::vector<double>& fitted_values() const { return leaf_value_of_rows_; }

private:
    template <typename Stats>
    void scan_splits(const Vector& y, std::vector<Stats>& stats, int min_leaf) {
        scratch_.resize(stats.size());
        for (int f = 0; f < d_; ++f) {
            for (std::size_t s = 0; s < stats.size(); ++s) scratch_[s] = Scan{};
            const auto& ord = sorted_[static_cast<std::size_t>(f)];
            const auto& vals = sorted_values_[static_cast<std::size_t>(f)];
            for (int k = 0; k < n_; ++k) {
                int i = ord[static_cast<std::size_t>(k)];
                int nd = node_of_[static_cast<std::size_t>(i)];
                Stats& s = stats[static_cast<std::size_t>(nd)];
                if (!s.active) continue;
                Scan& sc = scratch_[static_cast<std::size_t>(nd)];
                double v = vals[static_cast<std::size_t>(k)];
                if (sc.count > 0 && v > sc.last_value) {
                    std::int64_t right_count = s.count - sc.count;
                    if (sc.count >= min_leaf && right_count >= min_leaf) {
                        double sse_left = sc.sum_w > 0.0
                                              ? std::max(0.0, sc.sum_wy2 - sc.sum_wy * sc.sum_wy / sc.sum_w)
                                              : 0.0;
                        double rw = s.sum_w - sc.sum_w;
                        double rwy = s.sum_wy - sc.sum_wy;
                        double rwy2 = s.sum_wy2 - sc.sum_wy2;
                        double sse_right = rw > 0.0 ? std::max(0.0, rwy2 - rwy * rwy / rw) : 0.0;
                        double gain = s.sse() - sse_left - sse_right;
                        double tol = 1e-12 * (1.0 + std::abs(s.sum_wy2));
                        if (gain > tol && gain > s.best_gain) {
                            double t = sc.last_value + (v - sc.last_value) / 2.0;
                            if (t >= v) t = sc.last_value;  // adjacent doubles: keep partition consistent
                            s.best_gain = gain;
                            s.best_feature = f;
                            s.best_threshold = t;
                        }
                    }
                }
                double wi = w_(i), yi = y(i);
                sc.count++;
                sc.sum_w += wi;
                sc.sum_wy += wi * yi;
                sc.sum_wy2 += wi * yi * yi;
                sc.last_value = v;
            }
        }
    }

    struct Scan {
        std::int64_t count = 0;
        double sum_w = 0, sum_wy = 0, sum_wy2 = 0;
        double last_value = 0;
    };

    const Matrix& X_;
    const Vector& w_;
    int n_ = 0, d_ = 0;
    std::vector<std::vector<int>> sorted_;
    std::vector<std::vector<double>> sorted_values_;
    std::vector<int> node_of_;
    std::vector<double> leaf_value_of_rows_;
    std::vector<Scan> scratch_;
};

inline Tree fit_regression_tree(const Matrix& X, const Vector& y, const Vector& w, int max_depth,
                                int min_leaf) {
    require(X.rows() >= 2 * static_cast<Eigen::Index>(min_leaf), "tree: need at least 2*min_leaf rows");
    TreeBuilder builder(X, w);
    return builder.fit(y, max_depth, min_leaf);
}

}  // namespace hteselect
