#pragma once

#include "hteselect/data.hpp"
#include "hteselect/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hteselect {

inline double expit(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

enum class InputRepr { Raw, Binarized };

// Simulation knobs: effect sparsity rho, confounding strength xi, and the
// covariate representation handed to estimators and selectors.
struct DgpConfig {
    double rho = 0.0;
    double xi = 0.0;
    InputRepr input_repr = InputRepr::Raw;
    int n_trainval = 1000;
    int n_test = 500;
    std::uint64_t seed = 0;
    double noise_sd = 0.1;
    double base_coef_prob = 0.3;
    double interaction_coef_prob = 0.2;
    double intercept_c = 0.0;

    void validate() const {
        require(rho >= 0.0 && rho <= 1.0, "rho must lie in [0,1]");
        require(base_coef_prob >= 0.0 && base_coef_prob <= 1.0, "base_coef_prob must lie in [0,1]");
        require(interaction_coef_prob >= 0.0 && interaction_coef_prob <= 1.0,
                "interaction_coef_prob must lie in [0,1]");
        require(n_trainval >= 30 && n_test >= 30, "sample sizes must be at least 30");
        require(noise_sd >= 0.0, "noise_sd must be nonnegative");
    }
};

// Covariate source: a matrix plus the column indices treated as continuous
// (those get binarized and carry all outcome signal).
struct CovariatePool {
    Matrix X;
    std::vector<int> continuous_cols;
};

inline std::vector<int> detect_continuous_columns(const Matrix& X, int min_distinct = 11) {
    std::vector<int> cols;
    for (int j = 0; j < static_cast<int>(X.cols()); ++j) {
        std::set<double> distinct;
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            distinct.insert(X(i, j));
            if (static_cast<int>(distinct.size()) >= min_distinct) break;
        }
        if (static_cast<int>(distinct.size()) >= min_distinct) cols.push_back(j);
    }
    return cols;
}

// Reads a headered CSV of numeric columns; rows with any missing value are
// dropped. A column is flagged continuous when it has more than 10 distinct
// observed values.
inline CovariatePool load_covariates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open covariate file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("covariate file is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;

    auto is_missing = [](const std::string& cell) {
        return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan";
    };

    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(cols);
        std::stringstream ss(line);
        std::string cell;
        bool missing = false;
        std::size_t col_no = 0;
        while (std::getline(ss, cell, ',')) {
            ++col_no;
            if (is_missing(cell)) {
                missing = true;
                continue;
            }
            double value = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc{} || ptr != cell.data() + cell.size())
                throw std::runtime_error("non-numeric cell at line " + std::to_string(line_no) +
                                         ", column " + std::to_string(col_no) + ": '" + cell + "'");
            row.push_back(value);
        }
        if (missing) continue;
        if (row.size() != cols)
            throw std::runtime_error("line " + std::to_string(line_no) + " has " +
                                     std::to_string(row.size()) + " fields, expected " +
                                     std::to_string(cols));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("covariate file has no complete rows: " + path);

    CovariatePool pool;
    pool.X = Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j)
            pool.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    pool.continuous_cols = detect_continuous_columns(pool.X);
    require(!pool.continuous_cols.empty(), "covariate file has zero continuous columns");
    return pool;
}

// Synthetic fallback: equicorrelated Gaussians (correlation 0.2) followed by
// Bernoulli(0.5) columns.
inline Matrix synth_covariates(int n, int d_continuous, int d_binary, RngStream& stream) {
    require(n >= 1, "synth covariates: need at least one row");
    Matrix X(n, d_continuous + d_binary);
    const double shared = std::sqrt(0.2), own = std::sqrt(0.8);
    for (int i = 0; i < n; ++i) {
        double common = stream.normal();
        for (int j = 0; j < d_continuous; ++j) X(i, j) = shared * common + own * stream.normal();
        for (int j = 0; j < d_binary; ++j)
            X(i, d_continuous + j) = stream.bernoulli(0.5) ? 1.0 : 0.0;
    }
    return X;
}

inline CovariatePool synth_covariate_pool(int n, int d_continuous, int d_binary, Seed seed) {
    RngStream stream = seed.stream();
    CovariatePool pool;
    pool.X = synth_covariates(n, d_continuous, d_binary, stream);
    pool.continuous_cols = detect_continuous_columns(pool.X);
    return pool;
}

// Binarize each continuous column at a cutoff sampled uniformly from its
// observed values; strictly-greater entries map to one. Other columns pass
// through unchanged.
inline std::pair<Matrix, Vector> binarize_covariates(const Matrix& X_raw,
                                                     const std::vector<int>& continuous_cols,
                                                     RngStream& stream) {
    Matrix X_star = X_raw;
    Vector cutoffs(static_cast<Eigen::Index>(continuous_cols.size()));
    const Eigen::Index n = X_raw.rows();
    for (std::size_t c = 0; c < continuous_cols.size(); ++c) {
        int j = continuous_cols[c];
        double lo = X_raw.col(j).minCoeff(), hi = X_raw.col(j).maxCoeff();
        require(lo < hi, "constant continuous column " + std::to_string(j));
        double cutoff = X_raw(static_cast<Eigen::Index>(stream.below(static_cast<std::uint64_t>(n))), j);
        cutoffs(static_cast<Eigen::Index>(c)) = cutoff;
        for (Eigen::Index i = 0; i < n; ++i) X_star(i, j) = X_raw(i, j) > cutoff ? 1.0 : 0.0;
    }
    return {std::move(X_star), std::move(cutoffs)};
}

struct InteractionTerm {
    std::vector<int> members;  // 2, 3 or 4 distinct variable indices
    double coef = 0.0;         // binary
};

struct CoefficientSet {
    Vector beta;   // main effects, Bernoulli(base_coef_prob)
    Vector gamma;  // effect coefficients, Bernoulli(rho)
    std::vector<InteractionTerm> terms;
};

// Binary coefficient draws; every variable owns one pair, one triple and one
// quadruple interaction term whose partners are drawn uniformly without
// replacement.
inline CoefficientSet sample_dgp_coefficients(int d, const DgpConfig& cfg, RngStream& stream) {
    require(d >= 4, "coefficient sampling needs at least 4 variables");
    CoefficientSet out;
    out.beta = Vector(d);
    out.gamma = Vector(d);
    for (int j = 0; j < d; ++j) out.beta(j) = stream.bernoulli(cfg.base_coef_prob) ? 1.0 : 0.0;
    for (int j = 0; j < d; ++j) out.gamma(j) = stream.bernoulli(cfg.rho) ? 1.0 : 0.0;
    for (int arity : {2, 3, 4}) {
        for (int j = 0; j < d; ++j) {
            InteractionTerm term;
            term.members.push_back(j);
            // partners drawn uniformly without replacement from the others
            std::vector<int> others;
            others.reserve(static_cast<std::size_t>(d - 1));
            for (int k = 0; k < d; ++k)
                if (k != j) others.push_back(k);
            for (int m = 1; m < arity; ++m) {
                std::size_t pick = static_cast<std::size_t>(stream.below(others.size()));
                term.members.push_back(others[pick]);
                others.erase(others.begin() + static_cast<std::ptrdiff_t>(pick));
            }
            term.coef = stream.bernoulli(cfg.interaction_coef_prob) ? 1.0 : 0.0;
            out.terms.push_back(std::move(term));
        }
    }
    return out;
}

// Potential outcomes on the binarized signal columns:
//   mu0 = c + X* beta + interaction products,  tau = X* gamma,  mu1 = mu0 + tau.
// One noise draw per row is shared across arms, so y1 - y0 equals tau exactly.
inline GroundTruth simulate_potential_outcomes(const Matrix& X_star, const CoefficientSet& coeffs,
                                               const DgpConfig& cfg, RngStream& stream) {
    require(X_star.cols() == coeffs.beta.size(), "columns must match coefficient dimension");
    const Eigen::Index n = X_star.rows();
    GroundTruth truth;
    truth.mu0 = (X_star * coeffs.beta).array() + cfg.intercept_c;
    for (const InteractionTerm& term : coeffs.terms) {
        if (term.coef == 0.0) continue;
        Vector prod = Vector::Ones(n);
        for (int j : term.members) prod = prod.cwiseProduct(X_star.col(j));
        truth.mu0 += prod;
    }
    truth.tau = X_star * coeffs.gamma;
    truth.mu1 = truth.mu0 + truth.tau;
    truth.y0 = Vector(n);
    truth.y1 = Vector(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double eps = stream.normal(0.0, cfg.noise_sd);
        truth.y0(i) = truth.mu0(i) + eps;
        truth.y1(i) = truth.mu1(i) + eps;
    }
    return truth;
}

// Treatment assignment: pi = expit(xi * z) where z standardizes the raw
// confounding score X_raw * beta across the whole simulated sample. xi = 0
// gives pi = 1/2 exactly.
inline std::pair<Vector, Vector> simulate_treatment(const Matrix& X_raw, const Vector& beta, double xi,
                                                    RngStream& stream) {
    require(X_raw.cols() == beta.size(), "treatment score: dimension mismatch");
    const Eigen::Index n = X_raw.rows();
    Vector pi(n);
    if (xi == 0.0) {
        pi.setConstant(0.5);
    } else {
        Vector score = X_raw * beta;
        double mean = score.mean();
        double sd = std::sqrt((score.array() - mean).square().sum() / static_cast<double>(n));
        if (sd == 0.0) throw std::runtime_error("degenerate confounding score");
        for (Eigen::Index i = 0; i < n; ++i) pi(i) = expit(xi * (score(i) - mean) / sd);
    }
    Vector a(n);
    for (Eigen::Index i = 0; i < n; ++i) a(i) = stream.bernoulli(pi(i)) ? 1.0 : 0.0;
    return {std::move(a), std::move(pi)};
}

struct SimulatedDataset {
    Dataset train, val, test;
    GroundTruth truth_train, truth_val, truth_test;
    Vector cutoffs;
    CoefficientSet coefficients;
};

namespace detail {

inline GroundTruth slice_truth(const GroundTruth& full, int begin, int count) {
    GroundTruth out;
    out.tau = full.tau.segment(begin, count);
    out.mu0 = full.mu0.segment(begin, count);
    out.mu1 = full.mu1.segment(begin, count);
    out.pi = full.pi.segment(begin, count);
    out.y0 = full.y0.segment(begin, count);
    out.y1 = full.y1.segment(begin, count);
    return out;
}

}  // namespace detail

// Full draw: sample rows without replacement from the pool, binarize, draw
// coefficients, simulate outcomes and treatment, then split train/val/test.
// The truth draw (rows, cutoffs, coefficients, noise) depends only on the
// seed, never on xi or the input representation, so the effect distribution
// is identical across settings that share a seed.
inline SimulatedDataset generate_dataset(const DgpConfig& cfg, const CovariatePool& pool) {
    cfg.validate();
    const int need = cfg.n_trainval + cfg.n_test;
    require(static_cast<int>(pool.X.rows()) >= need, "insufficient covariate rows: need " +
                                                         std::to_string(need) + ", pool has " +
                                                         std::to_string(pool.X.rows()));
    require(static_cast<int>(pool.continuous_cols.size()) >= 4,
            "need at least 4 continuous columns for interaction terms");

    Seed seed(cfg.seed);
    RngStream rows_stream = seed.child("rows").stream();
    RngStream cutoff_stream = seed.child("cutoffs").stream();
    RngStream coef_stream = seed.child("coefficients").stream();
    RngStream noise_stream = seed.child("noise").stream();
    RngStream treat_stream = seed.child("treatment").stream();

    std::vector<int> picked =
        rows_stream.sample_without_replacement(static_cast<int>(pool.X.rows()), need);
    Matrix X_raw = take_rows(pool.X, picked);

    auto [X_star, cutoffs] = binarize_covariates(X_raw, pool.continuous_cols, cutoff_stream);

    const int d = static_cast<int>(pool.continuous_cols.size());
    Matrix signal_star(need, d), signal_raw(need, d);
    for (int c = 0; c < d; ++c) {
        signal_star.col(c) = X_star.col(pool.continuous_cols[static_cast<std::size_t>(c)]);
        signal_raw.col(c) = X_raw.col(pool.continuous_cols[static_cast<std::size_t>(c)]);
    }

    CoefficientSet coeffs = sample_dgp_coefficients(d, cfg, coef_stream);
    GroundTruth truth = simulate_potential_outcomes(signal_star, coeffs, cfg, noise_stream);
    auto [a, pi] = simulate_treatment(signal_raw, coeffs.beta, cfg.xi, treat_stream);
    truth.pi = pi;

    Vector y(need);
    for (int i = 0; i < need; ++i) y(i) = a(i) == 1.0 ? truth.y1(i) : truth.y0(i);

    const Matrix& X_est = cfg.input_repr == InputRepr::Raw ? X_raw : X_star;

    const int n_train = (2 * cfg.n_trainval) / 3;
    const int n_val = cfg.n_trainval - n_train;

    auto slice = [&](int begin, int count) {
        Dataset ds;
        ds.X = X_est.middleRows(begin, count);
        ds.A = a.segment(begin, count);
        ds.Y = y.segment(begin, count);
        return ds;
    };

    SimulatedDataset sim;
    sim.train = slice(0, n_train);
    sim.val = slice(n_train, n_val);
    sim.test = slice(cfg.n_trainval, cfg.n_test);
    sim.truth_train = detail::slice_truth(truth, 0, n_train);
    sim.truth_val = detail::slice_truth(truth, n_train, n_val);
    sim.truth_test = detail::slice_truth(truth, cfg.n_trainval, cfg.n_test);
    sim.cutoffs = cutoffs;
    sim.coefficients = std::move(coeffs);
    return sim;
}

}  // namespace hteselect
