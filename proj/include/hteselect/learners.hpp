#pragma once

#include "hteselect/data.hpp"
#include "hteselect/gbt.hpp"
#include "hteselect/grid.hpp"
#include "hteselect/logistic.hpp"
#include "hteselect/ridge.hpp"
#include "hteselect/tree.hpp"

#include <limits>
#include <string>
#include <variant>

namespace hteselect {

enum class MlMethod { LR, GB };

inline std::string to_string(MlMethod m) { return m == MlMethod::LR ? "LR" : "GB"; }

// A fitted regression subroutine: cross-validated ridge or grid-searched
// gradient boosting, behind one predict surface.
struct OutcomeModel {
    MlMethod method = MlMethod::LR;
    std::variant<RidgeModel, GbtModel> model;

    Vector predict(const Matrix& X) const {
        return std::visit([&](const auto& m) { return m.predict(X); }, model);
    }
};

inline OutcomeModel fit_outcome(MlMethod method, const Matrix& X, const Vector& y, const Vector& w,
                                const HyperGrid& grid, Seed seed) {
    OutcomeModel out;
    out.method = method;
    if (method == MlMethod::LR)
        out.model = fit_ridge(X, y, w, grid, seed);
    else
        out.model = fit_gbt(X, y, w, grid, seed);
    return out;
}

inline OutcomeModel fit_outcome(MlMethod method, const Matrix& X, const Vector& y, const HyperGrid& grid,
                                Seed seed) {
    return fit_outcome(method, X, y, Vector::Ones(X.rows()), grid, seed);
}

// Index of the pool row closest to the query in Euclidean distance; ties go
// to the lowest index.
inline int nearest_neighbor_index(const Vector& query, const Matrix& pool) {
    require(pool.rows() >= 1, "nearest neighbor: empty pool");
    require(pool.cols() == query.size(), "nearest neighbor: dimension mismatch");
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < pool.rows(); ++i) {
        double dist = (pool.row(i).transpose() - query).squaredNorm();
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(i);
        }
    }
    return best;
}

}  // namespace hteselect
