#include "hteselect/logistic.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace hteselect;

TEST_CASE("symmetric no-signal data gives probability one half") {
    Matrix X = Matrix::Zero(4, 1);
    Vector a(4);
    a << 0, 1, 0, 1;
    LogisticModel m = fit_logistic(X, a, HyperGrid{}, Seed(1));
    REQUIRE_THAT(m.intercept, Catch::Matchers::WithinAbs(0.0, 1e-6));
    Matrix probe(2, 1);
    probe << -3, 8;
    Vector p = m.predict_proba(probe);
    REQUIRE_THAT(p(0), Catch::Matchers::WithinAbs(0.5, 1e-6));
    REQUIRE_THAT(p(1), Catch::Matchers::WithinAbs(0.5, 1e-6));
}

TEST_CASE("separable data stays finite and matches a scalar Newton oracle") {
    // symmetric rows keep the intercept at zero, so the slope solves a
    // one-dimensional problem the oracle can handle
    Matrix X(4, 1);
    X << -2, -1, 1, 2;
    Vector a(4);
    a << 0, 0, 1, 1;
    LogisticModel m = logistic_irls(X, a, 1.0);
    double oracle = oracles::logistic_slope_newton({-2, -1, 1, 2}, {0, 0, 1, 1}, 1.0);
    REQUIRE(std::isfinite(m.coefficients(0)));
    REQUIRE_THAT(m.intercept, Catch::Matchers::WithinAbs(0.0, 1e-6));
    REQUIRE_THAT(m.coefficients(0), Catch::Matchers::WithinAbs(oracle, 1e-6));
}

TEST_CASE("scalar Newton oracle agrees on non-separable data too") {
    Matrix X(4, 1);
    X << -2, 1, -1, 2;
    Vector a(4);
    a << 0, 0, 1, 1;
    for (double lambda : {1e-5, 1e-2, 1.0}) {
        LogisticModel m = logistic_irls(X, a, lambda);
        double oracle = oracles::logistic_slope_newton({-2, 1, -1, 2}, {0, 0, 1, 1}, lambda);
        REQUIRE_THAT(m.intercept, Catch::Matchers::WithinAbs(0.0, 1e-6));
        REQUIRE_THAT(m.coefficients(0), Catch::Matchers::WithinAbs(oracle, 1e-6));
    }
}

TEST_CASE("treatment independent of covariates predicts near one half") {
    RngStream s(7);
    const int n = 500;
    Matrix X(n, 2);
    Vector a(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 2; ++j) X(i, j) = s.bernoulli(0.5) ? 1.0 : 0.0;
        a(i) = s.bernoulli(0.5) ? 1.0 : 0.0;
    }
    LogisticModel m = fit_logistic(X, a, HyperGrid{}, Seed(7));
    Vector p = m.predict_proba(X);
    REQUIRE(p.minCoeff() > 0.45);
    REQUIRE(p.maxCoeff() < 0.55);
}

TEST_CASE("single-class input is rejected") {
    Matrix X(3, 1);
    X << 1, 2, 3;
    Vector a = Vector::Ones(3);
    REQUIRE_THROWS_WITH(fit_logistic(X, a, HyperGrid{}, Seed(1)),
                        Catch::Matchers::ContainsSubstring("degenerate treatment assignment"));
}

TEST_CASE("penalized log-likelihood is non-decreasing across iterations") {
    RngStream s(31);
    const int n = 80;
    Matrix X(n, 2);
    Vector a(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = s.normal();
        X(i, 1) = s.normal();
        double p = sigmoid(0.8 * X(i, 0) - 0.5 * X(i, 1));
        a(i) = s.bernoulli(p) ? 1.0 : 0.0;
    }
    IrlsTrace trace;
    logistic_irls(X, a, 1e-2, &trace);
    REQUIRE(trace.converged);
    for (std::size_t i = 1; i < trace.penalized_loglik.size(); ++i)
        REQUIRE(trace.penalized_loglik[i] >= trace.penalized_loglik[i - 1] - 1e-12);
}

TEST_CASE("predicted probabilities are clipped") {
    LogisticModel m;
    m.intercept = 50.0;
    m.coefficients = Vector::Zero(1);
    Matrix X(1, 1);
    X << 0;
    REQUIRE(m.predict_proba(X)(0) == 1.0 - kProbClip);
    m.intercept = -50.0;
    REQUIRE(m.predict_proba(X)(0) == kProbClip);
}

TEST_CASE("zero model predicts exactly one half") {
    LogisticModel m;
    m.intercept = 0.0;
    m.coefficients = Vector::Zero(2);
    Matrix X(2, 2);
    X << 1, 2, -3, 4;
    Vector p = m.predict_proba(X);
    REQUIRE(p(0) == 0.5);
    REQUIRE(p(1) == 0.5);
}
