#pragma once

#include "hteselect/data.hpp"
#include "hteselect/grid.hpp"
#include "hteselect/rng.hpp"
#include "hteselect/tree.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace hteselect {

struct GbtHyper {
    double learning_rate = 0.1;
    int max_depth = 1;
    int n_estimators = 20;
};

struct GbtModel {
    double base_prediction = 0.0;
    double learning_rate = 0.1;
    std::vector<Tree> trees;
    GbtHyper chosen{};
    int n_features = 0;

    Vector predict(const Matrix& X) const {
        require(static_cast<int>(X.cols()) == n_features, "gbt predict: feature count mismatch");
        Vector out = Vector::Constant(X.rows(), base_prediction);
        for (const Tree& t : trees)
            for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) += learning_rate * t.predict_row(X, i);
        return out;
    }
};

struct GbtFitTrace {
    std::vector<double> train_weighted_mse;  // one entry per boosting round
};

namespace detail {

inline double weighted_mean(const Vector& y, const Vector& w) {
    double sw = w.sum();
    if (sw > 0.0) return w.dot(y) / sw;
    return y.size() > 0 ? y.mean() : 0.0;
}

}  // namespace detail

// Stagewise least-squares boosting: each round fits a regression tree to the
// current residuals and shrinks it by the learning rate.
inline GbtModel fit_gbt_fixed(const Matrix& X, const Vector& y, const Vector& w, const GbtHyper& hyper,
                              int min_leaf, GbtFitTrace* trace = nullptr) {
    const int n = static_cast<int>(X.rows());
    require(y.size() == n && w.size() == n, "gbt: dimension mismatch");
    require(hyper.learning_rate > 0.0 && hyper.learning_rate <= 1.0, "gbt: learning rate in (0,1]");

    GbtModel model;
    model.base_prediction = detail::weighted_mean(y, w);
    model.learning_rate = hyper.learning_rate;
    model.chosen = hyper;
    model.n_features = static_cast<int>(X.cols());

    TreeBuilder builder(X, w);
    Vector resid = y.array() - model.base_prediction;
    for (int round = 0; round < hyper.n_estimators; ++round) {
        Tree tree = builder.fit(resid, hyper.max_depth, min_leaf);
        const std::vector<double>& fitted = builder.fitted_values();
        for (int i = 0; i < n; ++i) resid(i) -= hyper.learning_rate * fitted[static_cast<std::size_t>(i)];
        model.trees.push_back(std::move(tree));
        if (trace) {
            double sw = w.sum();
            double mse = (w.array() * resid.array().square()).sum() / (sw > 0.0 ? sw : 1.0);
            trace->train_weighted_mse.push_back(mse);
        }
    }
    return model;
}

// 5-fold CV over the full (learning_rate x max_depth x n_estimators) grid.
// Boosting paths are shared across estimator counts: one run per
// (rate, depth) records held-out error at each estimator checkpoint. Ties
// prefer the simplest model: smaller depth, then fewer estimators, then
// smaller learning rate.
inline GbtModel fit_gbt(const Matrix& X, const Vector& y, const Vector& w, const HyperGrid& grid,
                        Seed seed, GbtFitTrace* trace = nullptr) {
    grid.validate();
    const int n = static_cast<int>(X.rows());
    require(n >= 2, "gbt: need at least two rows");
    require(y.size() == n && w.size() == n, "gbt: dimension mismatch");

    std::vector<int> depths = grid.gbt_max_depths;
    std::sort(depths.begin(), depths.end());
    std::vector<int> counts = grid.gbt_n_estimators;
    std::sort(counts.begin(), counts.end());
    std::vector<double> rates = grid.gbt_learning_rates;
    std::sort(rates.begin(), rates.end());
    const int max_rounds = counts.back();

    const int k = std::min(grid.cv_folds, n);
    std::vector<int> fold = assign_folds(n, k, seed.child("folds"));

    // cv_err[rate][depth][checkpoint]
    std::vector<std::vector<std::vector<double>>> cv_err(
        rates.size(), std::vector<std::vector<double>>(depths.size(), std::vector<double>(counts.size(), 0.0)));

    for (int f = 0; f < k; ++f) {
        std::vector<int> tr = rows_in_fold(fold, f, true);
        std::vector<int> va = rows_in_fold(fold, f, false);
        if (tr.empty() || va.empty()) continue;
        Matrix Xtr = take_rows(X, tr), Xva = take_rows(X, va);
        Vector ytr = take_rows(y, tr), yva = take_rows(y, va);
        Vector wtr = take_rows(w, tr), wva = take_rows(w, va);

        TreeBuilder builder(Xtr, wtr);
        const double base = detail::weighted_mean(ytr, wtr);
        for (std::size_t ri = 0; ri < rates.size(); ++ri) {
            for (std::size_t di = 0; di < depths.size(); ++di) {
                Vector resid = ytr.array() - base;
                Vector pred_va = Vector::Constant(Xva.rows(), base);
                std::size_t next_ckpt = 0;
                for (int round = 0; round < max_rounds; ++round) {
                    Tree tree = builder.fit(resid, depths[di], grid.gbt_min_leaf);
                    const std::vector<double>& fitted = builder.fitted_values();
                    for (Eigen::Index i = 0; i < resid.size(); ++i)
                        resid(i) -= rates[ri] * fitted[static_cast<std::size_t>(i)];
                    for (Eigen::Index i = 0; i < Xva.rows(); ++i)
                        pred_va(i) += rates[ri] * tree.predict_row(Xva, i);
                    while (next_ckpt < counts.size() && round + 1 == counts[next_ckpt]) {
                        cv_err[ri][di][next_ckpt] +=
                            (wva.array() * (yva - pred_va).array().square()).sum();
                        ++next_ckpt;
                    }
                }
            }
        }
    }

    GbtHyper best{};
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t di = 0; di < depths.size(); ++di)
        for (std::size_t ci = 0; ci < counts.size(); ++ci)
            for (std::size_t ri = 0; ri < rates.size(); ++ri)
                if (cv_err[ri][di][ci] < best_err) {
                    best_err = cv_err[ri][di][ci];
                    best = GbtHyper{rates[ri], depths[di], counts[ci]};
                }

    return fit_gbt_fixed(X, y, w, best, grid.gbt_min_leaf, trace);
}

}  // namespace hteselect
