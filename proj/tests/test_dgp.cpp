#include "hteselect/dgp.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace hteselect;

namespace {

std::filesystem::path write_temp_csv(const std::string& name, const std::string& content) {
    std::filesystem::path p = std::filesystem::temp_directory_path() / name;
    std::ofstream out(p);
    out << content;
    return p;
}

CovariatePool small_pool(int n, int d_cont, int d_bin, std::uint64_t seed) {
    return synth_covariate_pool(n, d_cont, d_bin, Seed(seed));
}

}  // namespace

TEST_CASE("csv loading keeps complete numeric rows") {
    std::string body = "a,b\n";
    for (int i = 0; i < 12; ++i) body += std::to_string(i) + ".25," + std::to_string(2 * i) + "\n";
    auto p = write_temp_csv("hte_cov_ok.csv", body);
    CovariatePool pool = load_covariates(p.string());
    REQUIRE(pool.X.rows() == 12);
    REQUIRE(pool.X.cols() == 2);
    REQUIRE(pool.X(3, 0) == 3.25);
    REQUIRE(pool.X(3, 1) == 6.0);
}

TEST_CASE("csv loading names the offending cell") {
    auto p = write_temp_csv("hte_cov_bad.csv", "a,b\n1,2\n3,oops\n");
    REQUIRE_THROWS_WITH(load_covariates(p.string()),
                        Catch::Matchers::ContainsSubstring("line 3") &&
                            Catch::Matchers::ContainsSubstring("column 2"));
}

TEST_CASE("csv loading drops rows with missing cells") {
    std::string body = "a,b\n";
    for (int i = 0; i < 12; ++i) body += std::to_string(i) + "." + std::to_string(i) + ",1\n";
    body += ",1\n";  // missing first field
    auto p = write_temp_csv("hte_cov_missing.csv", body);
    CovariatePool pool = load_covariates(p.string());
    REQUIRE(pool.X.rows() == 12);
}

TEST_CASE("binary columns are flagged non-continuous") {
    std::string body = "a,b\n";
    for (int i = 0; i < 24; ++i) body += std::to_string(i) + ".5," + (i % 2 ? "1" : "0") + "\n";
    auto p = write_temp_csv("hte_cov_binary.csv", body);
    CovariatePool pool = load_covariates(p.string());
    REQUIRE(pool.continuous_cols == std::vector<int>{0});
}

TEST_CASE("file with no continuous columns is rejected") {
    std::string body = "a\n";
    for (int i = 0; i < 30; ++i) body += (i % 2 ? "1\n" : "0\n");
    auto p = write_temp_csv("hte_cov_nocont.csv", body);
    REQUIRE_THROWS_WITH(load_covariates(p.string()),
                        Catch::Matchers::ContainsSubstring("zero continuous columns"));
}

TEST_CASE("synthetic covariates have the requested shape and ranges") {
    RngStream s(Seed(1).value());
    Matrix X = synth_covariates(5, 2, 1, s);
    REQUIRE(X.rows() == 5);
    REQUIRE(X.cols() == 3);
    for (int i = 0; i < 5; ++i) REQUIRE((X(i, 2) == 0.0 || X(i, 2) == 1.0));
}

TEST_CASE("synthetic covariates are deterministic given the stream") {
    RngStream s1(Seed(2).value()), s2(Seed(2).value());
    Matrix a = synth_covariates(20, 3, 2, s1), b = synth_covariates(20, 3, 2, s2);
    REQUIRE((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("continuous columns carry the configured equicorrelation") {
    RngStream s(Seed(3).value());
    Matrix X = synth_covariates(50000, 2, 0, s);
    double m0 = X.col(0).mean(), m1 = X.col(1).mean();
    double cov = ((X.col(0).array() - m0) * (X.col(1).array() - m1)).mean();
    double sd0 = std::sqrt((X.col(0).array() - m0).square().mean());
    double sd1 = std::sqrt((X.col(1).array() - m1).square().mean());
    REQUIRE_THAT(cov / (sd0 * sd1), Catch::Matchers::WithinAbs(0.2, 0.02));
}

TEST_CASE("binarization is strictly greater than the cutoff") {
    Matrix X(3, 1);
    X << 1, 2, 3;
    // scan seeds until the sampled cutoff equals 2 to pin the expected column
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        RngStream s(seed);
        auto [Xb, cutoffs] = binarize_covariates(X, {0}, s);
        if (cutoffs(0) == 2.0) {
            REQUIRE(Xb(0, 0) == 0.0);
            REQUIRE(Xb(1, 0) == 0.0);
            REQUIRE(Xb(2, 0) == 1.0);
            return;
        }
    }
    FAIL("no seed produced cutoff 2");
}

TEST_CASE("an all-below-cutoff column is legal and all zero") {
    Matrix X(3, 1);
    X << 1, 2, 3;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        RngStream s(seed);
        auto [Xb, cutoffs] = binarize_covariates(X, {0}, s);
        if (cutoffs(0) == 3.0) {
            REQUIRE(Xb.col(0).cwiseAbs().maxCoeff() == 0.0);
            return;
        }
    }
    FAIL("no seed produced cutoff 3");
}

TEST_CASE("binarization cutoffs are deterministic and constant columns rejected") {
    Matrix X(12, 2);
    for (int i = 0; i < 12; ++i) {
        X(i, 0) = i * 0.5;
        X(i, 1) = 7.0;
    }
    RngStream s1(Seed(5).value()), s2(Seed(5).value());
    auto [xb1, c1] = binarize_covariates(X, {0}, s1);
    auto [xb2, c2] = binarize_covariates(X, {0}, s2);
    REQUIRE(c1(0) == c2(0));
    REQUIRE((xb1 - xb2).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(xb1.col(1) == X.col(1));  // passthrough
    RngStream s3(Seed(6).value());
    REQUIRE_THROWS_WITH(binarize_covariates(X, {0, 1}, s3),
                        Catch::Matchers::ContainsSubstring("constant continuous column"));
}

TEST_CASE("effect coefficients follow the rho knob") {
    DgpConfig cfg;
    cfg.rho = 0.0;
    RngStream s(Seed(7).value());
    CoefficientSet zero = sample_dgp_coefficients(10, cfg, s);
    REQUIRE(zero.gamma.cwiseAbs().maxCoeff() == 0.0);

    cfg.rho = 1.0;
    RngStream s2(Seed(8).value());
    CoefficientSet one = sample_dgp_coefficients(10, cfg, s2);
    REQUIRE(one.gamma.minCoeff() == 1.0);
}

TEST_CASE("coefficient draws match their Bernoulli rates in the aggregate") {
    DgpConfig cfg;
    cfg.rho = 0.3;
    RngStream s(Seed(9).value());
    const int d = 100, draws = 1000;
    double gamma_sum = 0.0;
    for (int r = 0; r < draws; ++r) {
        CoefficientSet c = sample_dgp_coefficients(d, cfg, s);
        gamma_sum += c.gamma.sum();
    }
    REQUIRE_THAT(gamma_sum / (d * draws), Catch::Matchers::WithinAbs(0.3, 0.015));
}

TEST_CASE("interaction terms have the stated arities and ownership") {
    DgpConfig cfg;
    RngStream s(Seed(10).value());
    const int d = 8;
    CoefficientSet c = sample_dgp_coefficients(d, cfg, s);
    REQUIRE(c.terms.size() == 3 * static_cast<std::size_t>(d));
    for (std::size_t t = 0; t < c.terms.size(); ++t) {
        int arity = t < static_cast<std::size_t>(d) ? 2 : (t < static_cast<std::size_t>(2 * d) ? 3 : 4);
        const auto& members = c.terms[t].members;
        REQUIRE(static_cast<int>(members.size()) == arity);
        REQUIRE(members[0] == static_cast<int>(t) % d);  // owner comes first
        std::set<int> unique(members.begin(), members.end());
        REQUIRE(unique.size() == members.size());
    }
}

TEST_CASE("potential outcomes follow the linear part exactly") {
    DgpConfig cfg;
    cfg.noise_sd = 0.0;
    cfg.intercept_c = 0.0;
    CoefficientSet coeffs;
    coeffs.beta = Vector(4);
    coeffs.beta << 1, 0, 0, 0;
    coeffs.gamma = Vector::Zero(4);
    Matrix X(2, 4);
    X << 1, 1, 0, 0, 0, 1, 1, 0;
    RngStream s(Seed(11).value());
    GroundTruth truth = simulate_potential_outcomes(X, coeffs, cfg, s);
    REQUIRE(truth.mu0(0) == 1.0);
    REQUIRE(truth.mu0(1) == 0.0);
    REQUIRE(truth.tau.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((truth.mu1 - truth.mu0 - truth.tau).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((truth.y1 - truth.y0 - truth.tau).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("interaction products enter the baseline outcome") {
    DgpConfig cfg;
    cfg.noise_sd = 0.0;
    CoefficientSet coeffs;
    coeffs.beta = Vector::Zero(4);
    coeffs.gamma = Vector::Zero(4);
    coeffs.terms.push_back({{0, 1}, 1.0});
    coeffs.terms.push_back({{2, 3}, 0.0});  // inactive
    Matrix X(3, 4);
    X << 1, 1, 1, 1, 1, 0, 1, 1, 0, 1, 1, 1;
    RngStream s(Seed(12).value());
    GroundTruth truth = simulate_potential_outcomes(X, coeffs, cfg, s);
    REQUIRE(truth.mu0(0) == 1.0);
    REQUIRE(truth.mu0(1) == 0.0);
    REQUIRE(truth.mu0(2) == 0.0);
}

TEST_CASE("unconfounded assignment has propensity one half exactly") {
    Matrix X(100, 4);
    RngStream xs(Seed(13).value());
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 4; ++j) X(i, j) = xs.normal();
    Vector beta = Vector::Ones(4);
    RngStream s(Seed(14).value());
    auto [a, pi] = simulate_treatment(X, beta, 0.0, s);
    REQUIRE(pi.minCoeff() == 0.5);
    REQUIRE(pi.maxCoeff() == 0.5);
    REQUIRE(has_both_groups(a));
}

TEST_CASE("standardized score passes through the logistic link") {
    // two distinct score values, symmetric around the mean: z = +/-1
    Matrix X(2, 1);
    X << 0, 2;
    Vector beta = Vector::Ones(1);
    RngStream s(Seed(15).value());
    auto [a, pi] = simulate_treatment(X, beta, 3.0, s);
    (void)a;
    REQUIRE_THAT(pi(1), Catch::Matchers::WithinAbs(0.9525741268224334, 1e-12));
    REQUIRE_THAT(pi(0), Catch::Matchers::WithinAbs(1.0 - 0.9525741268224334, 1e-12));
}

TEST_CASE("degenerate confounding score is an error") {
    Matrix X(10, 2);
    RngStream xs(Seed(16).value());
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 2; ++j) X(i, j) = xs.normal();
    Vector beta = Vector::Zero(2);
    RngStream s(Seed(17).value());
    REQUIRE_THROWS_WITH(simulate_treatment(X, beta, 3.0, s),
                        Catch::Matchers::ContainsSubstring("degenerate confounding score"));
    RngStream s2(Seed(18).value());
    auto [a, pi] = simulate_treatment(X, beta, 0.0, s2);  // fine when unconfounded
    (void)a;
    REQUIRE(pi.minCoeff() == 0.5);
}

TEST_CASE("treated fraction stays centered under confounding") {
    CovariatePool pool = small_pool(20000, 6, 0, 19);
    DgpConfig cfg;
    cfg.xi = 3.0;
    cfg.rho = 0.1;
    cfg.n_trainval = 19000;
    cfg.n_test = 1000;
    cfg.seed = 20;
    SimulatedDataset sim = generate_dataset(cfg, pool);
    double frac = (sim.train.A.sum() + sim.val.A.sum() + sim.test.A.sum()) / 20000.0;
    REQUIRE_THAT(frac, Catch::Matchers::WithinAbs(0.5, 0.02));
}

TEST_CASE("split sizes follow the two-thirds rule") {
    CovariatePool pool = small_pool(2000, 5, 3, 21);
    DgpConfig cfg;
    cfg.n_trainval = 1000;
    cfg.n_test = 500;
    cfg.seed = 1;
    SimulatedDataset sim = generate_dataset(cfg, pool);
    REQUIRE(sim.train.n() == 666);
    REQUIRE(sim.val.n() == 334);
    REQUIRE(sim.test.n() == 500);
}

TEST_CASE("binarized representation makes signal columns binary") {
    CovariatePool pool = small_pool(800, 5, 2, 22);
    DgpConfig cfg;
    cfg.n_trainval = 300;
    cfg.n_test = 100;
    cfg.input_repr = InputRepr::Binarized;
    cfg.seed = 2;
    SimulatedDataset sim = generate_dataset(cfg, pool);
    for (int j : pool.continuous_cols)
        for (int i = 0; i < sim.train.n(); ++i)
            REQUIRE((sim.train.X(i, j) == 0.0 || sim.train.X(i, j) == 1.0));
}

TEST_CASE("generation is deterministic and consistency holds on every split") {
    CovariatePool pool = small_pool(900, 6, 2, 23);
    DgpConfig cfg;
    cfg.n_trainval = 450;
    cfg.n_test = 150;
    cfg.xi = 3.0;
    cfg.rho = 0.3;
    cfg.seed = 77;
    SimulatedDataset a = generate_dataset(cfg, pool);
    SimulatedDataset b = generate_dataset(cfg, pool);
    REQUIRE((a.train.X - b.train.X).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((a.test.Y - b.test.Y).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((a.cutoffs - b.cutoffs).cwiseAbs().maxCoeff() == 0.0);

    auto check_split = [](const Dataset& ds, const GroundTruth& truth) {
        for (int i = 0; i < ds.n(); ++i) {
            double expected = ds.A(i) == 1.0 ? truth.y1(i) : truth.y0(i);
            REQUIRE(ds.Y(i) == expected);
        }
        REQUIRE((truth.mu1 - truth.mu0 - truth.tau).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(truth.pi.minCoeff() > 0.0);
        REQUIRE(truth.pi.maxCoeff() < 1.0);
    };
    check_split(a.train, a.truth_train);
    check_split(a.val, a.truth_val);
    check_split(a.test, a.truth_test);
}

TEST_CASE("treatment is uncorrelated with covariates when randomized") {
    CovariatePool pool = small_pool(21000, 5, 2, 24);
    DgpConfig cfg;
    cfg.n_trainval = 19500;
    cfg.n_test = 500;
    cfg.seed = 3;
    SimulatedDataset sim = generate_dataset(cfg, pool);
    REQUIRE(sim.truth_train.pi.minCoeff() == 0.5);
    const Matrix& X = sim.train.X;
    const Vector& A = sim.train.A;
    double am = A.mean();
    double asd = std::sqrt((A.array() - am).square().mean());
    for (int j = 0; j < X.cols(); ++j) {
        double xm = X.col(j).mean();
        double xsd = std::sqrt((X.col(j).array() - xm).square().mean());
        double corr = ((X.col(j).array() - xm) * (A.array() - am)).mean() / (xsd * asd);
        REQUIRE(std::abs(corr) < 0.02);
    }
}

TEST_CASE("the effect draw is identical across confounding settings") {
    CovariatePool pool = small_pool(700, 5, 1, 25);
    DgpConfig cfg;
    cfg.n_trainval = 400;
    cfg.n_test = 200;
    cfg.rho = 0.3;
    cfg.seed = 5;
    cfg.xi = 0.0;
    SimulatedDataset unconfounded = generate_dataset(cfg, pool);
    cfg.xi = 3.0;
    SimulatedDataset confounded = generate_dataset(cfg, pool);
    REQUIRE((unconfounded.truth_test.tau - confounded.truth_test.tau).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((unconfounded.truth_test.mu0 - confounded.truth_test.mu0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero-rho effect is identically zero") {
    CovariatePool pool = small_pool(600, 4, 1, 26);
    DgpConfig cfg;
    cfg.n_trainval = 300;
    cfg.n_test = 120;
    cfg.rho = 0.0;
    cfg.seed = 6;
    SimulatedDataset sim = generate_dataset(cfg, pool);
    REQUIRE(sim.truth_train.tau.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(sim.truth_test.tau.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("insufficient pool rows are rejected") {
    CovariatePool pool = small_pool(100, 4, 0, 27);
    DgpConfig cfg;
    cfg.n_trainval = 90;
    cfg.n_test = 30;
    REQUIRE_THROWS_WITH(generate_dataset(cfg, pool),
                        Catch::Matchers::ContainsSubstring("insufficient covariate rows"));
}

TEST_CASE("baseline outcome keeps higher-order structure a linear fit cannot remove") {
    // rho = 0 with active interaction terms: residual variance of the best
    // linear fit of mu0 on the binarized columns stays strictly positive
    CovariatePool pool = small_pool(3000, 8, 0, 28);
    DgpConfig cfg;
    cfg.rho = 0.0;
    cfg.n_trainval = 2500;
    cfg.n_test = 500;
    cfg.seed = 9;
    cfg.input_repr = InputRepr::Binarized;
    SimulatedDataset sim = generate_dataset(cfg, pool);

    bool any_active = false;
    for (const auto& term : sim.coefficients.terms) any_active = any_active || term.coef != 0.0;
    REQUIRE(any_active);

    const int n = sim.train.n();
    Matrix design(n, sim.train.X.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(sim.train.X.cols()) = sim.train.X;
    Vector target = sim.truth_train.mu0;
    Vector fit = design * design.colPivHouseholderQr().solve(target);
    double residual_var = (target - fit).squaredNorm() / n;
    REQUIRE(residual_var > 1e-3);
}
