#pragma once

#include "hteselect/data.hpp"
#include "hteselect/grid.hpp"
#include "hteselect/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace hteselect {

// Probabilities used as propensities are clipped away from {0, 1} so that
// inverse-weighted quantities stay bounded.
inline constexpr double kProbClip = 1e-3;

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

struct LogisticModel {
    double intercept = 0.0;
    Vector coefficients;
    double chosen_lambda = 0.0;

    Vector linear(const Matrix& X) const {
        require(X.cols() == coefficients.size(), "logistic predict: feature count mismatch");
        return (X * coefficients).array() + intercept;
    }

    Vector predict_proba(const Matrix& X) const {
        Vector z = linear(X);
        Vector p(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i)
            p(i) = std::clamp(sigmoid(z(i)), kProbClip, 1.0 - kProbClip);
        return p;
    }
};

struct IrlsTrace {
    std::vector<double> penalized_loglik;
    int iterations = 0;
    bool converged = false;
};

// L2-penalized logistic regression by IRLS with step halving. Objective:
// loglik(theta) - lambda/2 ||beta||^2 with the intercept unpenalized.
inline LogisticModel logistic_irls(const Matrix& X, const Vector& a, double lambda,
                                   IrlsTrace* trace = nullptr) {
    const Eigen::Index n = X.rows(), d = X.cols();
    require(a.size() == n, "logistic: dimension mismatch");

    Vector theta = Vector::Zero(d + 1);
    auto penalized_negll = [&](const Vector& th) {
        double nll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double z = th(0) + X.row(i).dot(th.segment(1, d));
            nll += softplus(z) - a(i) * z;
        }
        return nll + 0.5 * lambda * th.segment(1, d).squaredNorm();
    };

    double f = penalized_negll(theta);
    if (trace) trace->penalized_loglik.push_back(-f);

    const int max_iter = 100;
    for (int it = 0; it < max_iter; ++it) {
        Vector z = (X * theta.segment(1, d)).array() + theta(0);
        Vector p(n), wgt(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = sigmoid(z(i));
            double pc = std::clamp(p(i), 1e-10, 1.0 - 1e-10);
            wgt(i) = pc * (1.0 - pc);
        }

        Vector grad(d + 1);
        grad(0) = (p - a).sum();
        grad.segment(1, d) = X.transpose() * (p - a) + lambda * theta.segment(1, d);

        Matrix Xtw = X.transpose() * wgt.asDiagonal();
        Matrix H(d + 1, d + 1);
        H(0, 0) = wgt.sum();
        H.block(0, 1, 1, d) = Xtw.rowwise().sum().transpose();
        H.block(1, 0, d, 1) = Xtw.rowwise().sum();
        H.block(1, 1, d, d) = Xtw * X;
        for (Eigen::Index j = 1; j <= d; ++j) H(j, j) += lambda;

        Vector delta = H.ldlt().solve(-grad);

        double step = 1.0;
        Vector cand = theta + delta;
        double f_cand = penalized_negll(cand);
        int halvings = 0;
        while (f_cand > f && halvings < 60) {
            step *= 0.5;
            cand = theta + step * delta;
            f_cand = penalized_negll(cand);
            ++halvings;
        }

        double max_change = (step * delta).cwiseAbs().maxCoeff();
        theta = cand;
        f = f_cand;
        if (trace) {
            trace->penalized_loglik.push_back(-f);
            trace->iterations = it + 1;
        }
        if (max_change < 1e-8) {
            if (trace) trace->converged = true;
            break;
        }
    }

    LogisticModel model;
    model.intercept = theta(0);
    model.coefficients = theta.segment(1, d);
    model.chosen_lambda = lambda;
    return model;
}

// Regularization chosen by k-fold CV log-loss. Grid entries are inverse
// penalty strengths (the convention of the usual CV logistic implementations):
// entry c fits with penalty 1/c, so the listed {1e-5,...,1} spans penalties
// {1e5,...,1} and noise data can be shrunk hard. Ties prefer the stronger
// penalty; chosen_lambda records the grid entry.
inline LogisticModel fit_logistic(const Matrix& X, const Vector& a, const HyperGrid& grid, Seed seed) {
    grid.validate();
    const int n = static_cast<int>(X.rows());
    require(a.size() == n, "logistic: dimension mismatch");
    require(has_both_groups(a), "degenerate treatment assignment");

    std::vector<double> cs = grid.logistic_lambdas;
    std::sort(cs.begin(), cs.end(), std::greater<>());  // descending: ties land on the strongest penalty

    const int k = std::min(grid.cv_folds, n);
    std::vector<int> fold = assign_folds(n, k, seed.child("folds"));

    std::vector<double> cv_loss(cs.size(), 0.0);
    for (int f = 0; f < k; ++f) {
        std::vector<int> tr = rows_in_fold(fold, f, true);
        std::vector<int> va = rows_in_fold(fold, f, false);
        Matrix Xtr = take_rows(X, tr), Xva = take_rows(X, va);
        Vector atr = take_rows(a, tr), ava = take_rows(a, va);
        if (!has_both_groups(atr)) continue;  // fold carries no usable signal
        for (std::size_t li = 0; li < cs.size(); ++li) {
            LogisticModel m = logistic_irls(Xtr, atr, 1.0 / cs[li]);
            Vector z = m.linear(Xva);
            for (Eigen::Index i = 0; i < z.size(); ++i) cv_loss[li] += softplus(z(i)) - ava(i) * z(i);
        }
    }

    std::size_t best = 0;
    for (std::size_t li = 1; li < cs.size(); ++li)
        if (cv_loss[li] <= cv_loss[best]) best = li;

    LogisticModel model = logistic_irls(X, a, 1.0 / cs[best]);
    model.chosen_lambda = cs[best];
    return model;
}

}  // namespace hteselect
