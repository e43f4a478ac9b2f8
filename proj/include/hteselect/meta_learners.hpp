#pragma once

#include "hteselect/data.hpp"
#include "hteselect/grid.hpp"
#include "hteselect/learners.hpp"
#include "hteselect/logistic.hpp"
#include "hteselect/rng.hpp"

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace hteselect {

// Candidate estimation strategies. S, ES and T model the potential outcomes
// and take their difference (indirect); DR and R regress a constructed
// effect target directly and expose no outcome models.
enum class Strategy { S, ES, T, DR, R };

inline bool is_indirect(Strategy s) { return s == Strategy::S || s == Strategy::ES || s == Strategy::T; }

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::S: return "S";
        case Strategy::ES: return "ES";
        case Strategy::T: return "T";
        case Strategy::DR: return "DR";
        case Strategy::R: return "R";
    }
    return "?";
}

// Cross-fitted per-row nuisance estimates on a validation sample.
struct NuisanceSet {
    Vector mu0;
    Vector mu1;
    Vector mu;  // treatment-unconditional outcome mean
    Vector pi;  // clipped propensity
};

// ---------------------------------------------------------------------------
// pseudo-outcome transforms
// ---------------------------------------------------------------------------

inline double pseudo_dr(double y, double a, double mu0, double mu1, double pi) {
    require(pi > 0.0 && pi < 1.0, "pseudo_dr: propensity must lie strictly in (0,1)");
    double ipw = a / pi - (1.0 - a) / (1.0 - pi);
    return ipw * y + (1.0 - a / pi) * mu1 - (1.0 - (1.0 - a) / (1.0 - pi)) * mu0;
}

inline double pseudo_pw(double y, double a, double pi) {
    require(pi > 0.0 && pi < 1.0, "pseudo_pw: propensity must lie strictly in (0,1)");
    return (a / pi - (1.0 - a) / (1.0 - pi)) * y;
}

inline double pseudo_ra(double y, double a, double mu0, double mu1) {
    return (2.0 * a - 1.0) * (y - (a == 1.0 ? mu0 : mu1));
}

// returns {pseudo outcome, regression weight}
inline std::pair<double, double> pseudo_r(double y, double a, double mu, double pi) {
    double denom = a - pi;
    return {(y - mu) / denom, denom * denom};
}

// ---------------------------------------------------------------------------
// feature layouts
// ---------------------------------------------------------------------------

inline Matrix append_treatment(const Matrix& X, const Vector& a) {
    Matrix out(X.rows(), X.cols() + 1);
    out.leftCols(X.cols()) = X;
    out.col(X.cols()) = a;
    return out;
}

inline Matrix append_treatment_const(const Matrix& X, double a) {
    return append_treatment(X, Vector::Constant(X.rows(), a));
}

// column order (X, A*X, A)
inline Matrix es_features(const Matrix& X, const Vector& a) {
    Matrix out(X.rows(), 2 * X.cols() + 1);
    out.leftCols(X.cols()) = X;
    out.block(0, X.cols(), X.rows(), X.cols()) = X.array().colwise() * a.array();
    out.col(2 * X.cols()) = a;
    return out;
}

inline Matrix es_features_const(const Matrix& X, double a) {
    return es_features(X, Vector::Constant(X.rows(), a));
}

// ---------------------------------------------------------------------------
// fitted meta-learners
// ---------------------------------------------------------------------------

struct SLearnerFit {
    OutcomeModel model;  // on (X, A)
};

struct EsLearnerFit {
    OutcomeModel model;  // on (X, A*X, A)
};

struct TLearnerFit {
    OutcomeModel model0;
    OutcomeModel model1;
};

struct DrLearnerFit {
    OutcomeModel model0;
    OutcomeModel model1;
    LogisticModel propensity;
    OutcomeModel effect;
};

struct RLearnerFit {
    OutcomeModel mean_model;
    LogisticModel propensity;
    OutcomeModel effect;
};

struct CateEstimator {
    Strategy strategy = Strategy::S;
    MlMethod method = MlMethod::LR;
    std::variant<SLearnerFit, EsLearnerFit, TLearnerFit, DrLearnerFit, RLearnerFit> fit;
};

inline CateEstimator fit_cate_estimator(Strategy strategy, MlMethod method, const Dataset& train,
                                        const HyperGrid& grid, Seed seed) {
    train.validate();
    require(has_both_groups(train.A), "degenerate treatment assignment");

    CateEstimator est;
    est.strategy = strategy;
    est.method = method;

    switch (strategy) {
        case Strategy::S: {
            SLearnerFit f;
            f.model = fit_outcome(method, append_treatment(train.X, train.A), train.Y, grid, seed.child("s"));
            est.fit = std::move(f);
            break;
        }
        case Strategy::ES: {
            EsLearnerFit f;
            f.model = fit_outcome(method, es_features(train.X, train.A), train.Y, grid, seed.child("es"));
            est.fit = std::move(f);
            break;
        }
        case Strategy::T: {
            std::vector<int> g0 = group_rows(train.A, 0.0), g1 = group_rows(train.A, 1.0);
            TLearnerFit f;
            f.model0 = fit_outcome(method, take_rows(train.X, g0), take_rows(train.Y, g0), grid, seed.child("t0"));
            f.model1 = fit_outcome(method, take_rows(train.X, g1), take_rows(train.Y, g1), grid, seed.child("t1"));
            est.fit = std::move(f);
            break;
        }
        case Strategy::DR: {
            // nuisances on the full training split, no cross-fitting
            std::vector<int> g0 = group_rows(train.A, 0.0), g1 = group_rows(train.A, 1.0);
            DrLearnerFit f;
            f.model0 = fit_outcome(method, take_rows(train.X, g0), take_rows(train.Y, g0), grid, seed.child("mu0"));
            f.model1 = fit_outcome(method, take_rows(train.X, g1), take_rows(train.Y, g1), grid, seed.child("mu1"));
            f.propensity = fit_logistic(train.X, train.A, grid, seed.child("pi"));
            Vector mu0 = f.model0.predict(train.X);
            Vector mu1 = f.model1.predict(train.X);
            Vector pi = f.propensity.predict_proba(train.X);
            Vector target(train.n());
            for (int i = 0; i < train.n(); ++i)
                target(i) = pseudo_dr(train.Y(i), train.A(i), mu0(i), mu1(i), pi(i));
            f.effect = fit_outcome(method, train.X, target, grid, seed.child("effect"));
            est.fit = std::move(f);
            break;
        }
        case Strategy::R: {
            RLearnerFit f;
            f.mean_model = fit_outcome(method, train.X, train.Y, grid, seed.child("mu"));
            f.propensity = fit_logistic(train.X, train.A, grid, seed.child("pi"));
            Vector mu = f.mean_model.predict(train.X);
            Vector pi = f.propensity.predict_proba(train.X);
            Vector target(train.n()), weight(train.n());
            for (int i = 0; i < train.n(); ++i) {
                auto [t, w] = pseudo_r(train.Y(i), train.A(i), mu(i), pi(i));
                target(i) = t;
                weight(i) = w;
            }
            f.effect = fit_outcome(method, train.X, target, weight, grid, seed.child("effect"));
            est.fit = std::move(f);
            break;
        }
    }
    return est;
}

inline Vector cate_predict(const CateEstimator& est, const Matrix& X) {
    struct Visitor {
        const Matrix& X;
        Vector operator()(const SLearnerFit& f) const {
            return f.model.predict(append_treatment_const(X, 1.0)) -
                   f.model.predict(append_treatment_const(X, 0.0));
        }
        Vector operator()(const EsLearnerFit& f) const {
            return f.model.predict(es_features_const(X, 1.0)) - f.model.predict(es_features_const(X, 0.0));
        }
        Vector operator()(const TLearnerFit& f) const { return f.model1.predict(X) - f.model0.predict(X); }
        Vector operator()(const DrLearnerFit& f) const { return f.effect.predict(X); }
        Vector operator()(const RLearnerFit& f) const { return f.effect.predict(X); }
    };
    return std::visit(Visitor{X}, est.fit);
}

// Potential-outcome predictions; only defined for indirect strategies.
inline std::pair<Vector, Vector> po_predict(const CateEstimator& est, const Matrix& X) {
    if (!is_indirect(est.strategy)) throw std::runtime_error("not factually evaluable");
    struct Visitor {
        const Matrix& X;
        std::pair<Vector, Vector> operator()(const SLearnerFit& f) const {
            return {f.model.predict(append_treatment_const(X, 0.0)),
                    f.model.predict(append_treatment_const(X, 1.0))};
        }
        std::pair<Vector, Vector> operator()(const EsLearnerFit& f) const {
            return {f.model.predict(es_features_const(X, 0.0)), f.model.predict(es_features_const(X, 1.0))};
        }
        std::pair<Vector, Vector> operator()(const TLearnerFit& f) const {
            return {f.model0.predict(X), f.model1.predict(X)};
        }
        std::pair<Vector, Vector> operator()(const DrLearnerFit&) const {
            throw std::runtime_error("not factually evaluable");
        }
        std::pair<Vector, Vector> operator()(const RLearnerFit&) const {
            throw std::runtime_error("not factually evaluable");
        }
    };
    return std::visit(Visitor{X}, est.fit);
}

// ---------------------------------------------------------------------------
// cross-fitted nuisance estimation
// ---------------------------------------------------------------------------

// Per-row estimates of (mu0, mu1, mu, pi) where each row is predicted by
// models trained on the other folds only. The fold assignment and the
// propensity fits depend only on the seed, not on the outcome method, so
// nuisance sets for LR and GB share identical pi when given the same seed.
inline NuisanceSet cross_fit_nuisances(const Dataset& data, MlMethod method, const HyperGrid& grid,
                                       int folds, Seed seed) {
    data.validate();
    require(folds >= 2, "cross-fitting requires at least 2 folds");
    require(folds <= data.n(), "more folds than rows");

    std::vector<int> fold = assign_folds(data.n(), folds, seed.child("folds"));

    NuisanceSet out;
    out.mu0 = Vector::Zero(data.n());
    out.mu1 = Vector::Zero(data.n());
    out.mu = Vector::Zero(data.n());
    out.pi = Vector::Zero(data.n());

    for (int f = 0; f < folds; ++f) {
        std::vector<int> tr = rows_in_fold(fold, f, true);
        std::vector<int> held = rows_in_fold(fold, f, false);
        Matrix Xtr = take_rows(data.X, tr);
        Vector Atr = take_rows(data.A, tr);
        Vector Ytr = take_rows(data.Y, tr);

        std::vector<int> g0, g1;
        for (std::size_t i = 0; i < tr.size(); ++i) (Atr(static_cast<Eigen::Index>(i)) == 1.0 ? g1 : g0).push_back(static_cast<int>(i));
        if (g0.size() < 2 || g1.size() < 2)
            throw std::runtime_error("insufficient group support for cross-fitting");

        Seed fs = seed.child("fold", f);
        OutcomeModel m0 = fit_outcome(method, take_rows(Xtr, g0), take_rows(Ytr, g0), grid, fs.child("mu0"));
        OutcomeModel m1 = fit_outcome(method, take_rows(Xtr, g1), take_rows(Ytr, g1), grid, fs.child("mu1"));
        OutcomeModel mm = fit_outcome(method, Xtr, Ytr, grid, fs.child("mu"));
        LogisticModel pm = fit_logistic(Xtr, Atr, grid, fs.child("pi"));

        Matrix Xheld = take_rows(data.X, held);
        Vector p0 = m0.predict(Xheld), p1 = m1.predict(Xheld), pm_mu = mm.predict(Xheld);
        Vector ppi = pm.predict_proba(Xheld);
        for (std::size_t i = 0; i < held.size(); ++i) {
            int row = held[i];
            out.mu0(row) = p0(static_cast<Eigen::Index>(i));
            out.mu1(row) = p1(static_cast<Eigen::Index>(i));
            out.mu(row) = pm_mu(static_cast<Eigen::Index>(i));
            out.pi(row) = ppi(static_cast<Eigen::Index>(i));
        }
    }
    return out;
}

}  // namespace hteselect
