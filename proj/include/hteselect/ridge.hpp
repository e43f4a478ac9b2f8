#pragma once

#include "hteselect/data.hpp"
#include "hteselect/grid.hpp"
#include "hteselect/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>

namespace hteselect {

struct RidgeModel {
    double intercept = 0.0;
    Vector coefficients;
    double chosen_lambda = 0.0;

    Vector predict(const Matrix& X) const {
        require(X.cols() == coefficients.size(), "ridge predict: feature count mismatch");
        return (X * coefficients).array() + intercept;
    }
};

// Closed-form weighted ridge with unpenalized intercept:
// minimizes sum_i w_i (y_i - b - x_i' beta)^2 + lambda ||beta||^2.
inline RidgeModel ridge_solve(const Matrix& X, const Vector& y, const Vector& w, double lambda) {
    const Eigen::Index n = X.rows(), d = X.cols();
    require(y.size() == n && w.size() == n, "ridge: dimension mismatch");
    require((w.array() >= 0.0).all(), "ridge: weights must be nonnegative");
    require(w.sum() > 0.0, "ridge: at least one positive weight required");

    Matrix Xtw = X.transpose() * w.asDiagonal();  // d x n
    Matrix M(d + 1, d + 1);
    M(0, 0) = w.sum();
    M.block(0, 1, 1, d) = (Xtw.rowwise().sum()).transpose();
    M.block(1, 0, d, 1) = Xtw.rowwise().sum();
    M.block(1, 1, d, d) = Xtw * X;
    for (Eigen::Index j = 1; j <= d; ++j) M(j, j) += lambda;

    Vector b(d + 1);
    b(0) = w.dot(y);
    b.segment(1, d) = Xtw * y;

    Vector theta = M.ldlt().solve(b);
    RidgeModel model;
    model.intercept = theta(0);
    model.coefficients = theta.segment(1, d);
    model.chosen_lambda = lambda;
    return model;
}

// Cross-validated weighted ridge. The penalty is chosen by k-fold CV on the
// weighted squared error; ties go to the larger lambda.
inline RidgeModel fit_ridge(const Matrix& X, const Vector& y, const Vector& w, const HyperGrid& grid,
                            Seed seed) {
    grid.validate();
    const int n = static_cast<int>(X.rows());
    require(n >= 2, "ridge: need at least two rows");
    require(y.size() == n && w.size() == n, "ridge: dimension mismatch");

    std::vector<double> lambdas = grid.ridge_lambdas;
    std::sort(lambdas.begin(), lambdas.end());

    const int k = std::min(grid.cv_folds, n);
    std::vector<int> fold = assign_folds(n, k, seed.child("folds"));

    std::vector<double> cv_err(lambdas.size(), 0.0);
    for (int f = 0; f < k; ++f) {
        std::vector<int> tr = rows_in_fold(fold, f, true);
        std::vector<int> va = rows_in_fold(fold, f, false);
        Matrix Xtr = take_rows(X, tr), Xva = take_rows(X, va);
        Vector ytr = take_rows(y, tr), yva = take_rows(y, va);
        Vector wtr = take_rows(w, tr), wva = take_rows(w, va);
        if (wtr.sum() <= 0.0) continue;  // degenerate fold, no information
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            RidgeModel m = ridge_solve(Xtr, ytr, wtr, lambdas[li]);
            Vector resid = yva - m.predict(Xva);
            cv_err[li] += (wva.array() * resid.array().square()).sum();
        }
    }

    std::size_t best = 0;
    for (std::size_t li = 1; li < lambdas.size(); ++li)
        if (cv_err[li] <= cv_err[best]) best = li;  // ascending order: ties pick larger lambda

    return ridge_solve(X, y, w, lambdas[best]);
}

}  // namespace hteselect
