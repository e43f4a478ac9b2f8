#pragma once

#include "hteselect/data.hpp"
#include "hteselect/rng.hpp"

#include <algorithm>
#include <vector>

namespace hteselect {

// Hyperparameter sweeps used by every learner subroutine.
struct HyperGrid {
    std::vector<double> ridge_lambdas{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3, 1e4};
    std::vector<double> logistic_lambdas{1e-5, 1e-3, 1e-2, 1e-1, 1.0};
    std::vector<double> gbt_learning_rates{0.1, 0.3};
    std::vector<int> gbt_max_depths{1, 3, 6};
    std::vector<int> gbt_n_estimators{20, 100};
    int cv_folds = 5;
    int gbt_min_leaf = 5;

    void validate() const {
        require(!ridge_lambdas.empty() && !logistic_lambdas.empty() && !gbt_learning_rates.empty() &&
                    !gbt_max_depths.empty() && !gbt_n_estimators.empty(),
                "hyperparameter grids must be non-empty");
        require(cv_folds >= 2, "cv_folds must be at least 2");
    }
};

// Fold index per row: contiguous blocks after a seeded shuffle.
inline std::vector<int> assign_folds(int n, int k, Seed seed) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    RngStream stream = seed.stream();
    stream.shuffle(perm);
    std::vector<int> fold(static_cast<std::size_t>(n));
    int base = n / k, extra = n % k, pos = 0;
    for (int f = 0; f < k; ++f) {
        int size = base + (f < extra ? 1 : 0);
        for (int j = 0; j < size; ++j) fold[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos++)])] = f;
    }
    return fold;
}

inline std::vector<int> rows_in_fold(const std::vector<int>& fold, int f, bool complement) {
    std::vector<int> rows;
    for (int i = 0; i < static_cast<int>(fold.size()); ++i)
        if ((fold[static_cast<std::size_t>(i)] == f) != complement) rows.push_back(i);
    return rows;
}

}  // namespace hteselect
