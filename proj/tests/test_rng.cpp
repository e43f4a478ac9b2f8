#include "hteselect/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

using namespace hteselect;

TEST_CASE("streams with the same seed are identical") {
    RngStream a(123), b(123);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("seed derivation is pure and order independent") {
    Seed root(7);
    REQUIRE(root.child("x").value() == root.child("x").value());
    REQUIRE(root.child("x").value() != root.child("y").value());
    Seed a = root.child("a");
    Seed b = root.child("b");
    // deriving a does not perturb b
    REQUIRE(b.value() == root.child("b").value());
    REQUIRE(root.child("a", 1, 2.5).value() == root.child("a").child(1).child(2.5).value());
    (void)a;
}

TEST_CASE("uniform01 stays in [0,1) with plausible mean") {
    RngStream s(42);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        double u = s.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    REQUIRE_THAT(sum / 100000.0, Catch::Matchers::WithinAbs(0.5, 0.01));
}

TEST_CASE("normal draws have the requested moments") {
    RngStream s(42);
    const int n = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double z = s.normal(1.0, 2.0);
        sum += z;
        sum2 += z * z;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(1.0, 0.03));
    REQUIRE_THAT(var, Catch::Matchers::WithinAbs(4.0, 0.1));
}

TEST_CASE("shuffle is a permutation and sampling has no duplicates") {
    RngStream s(9);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    s.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) REQUIRE(sorted[static_cast<std::size_t>(i)] == i);

    std::vector<int> picked = s.sample_without_replacement(100, 40);
    REQUIRE(picked.size() == 40);
    std::sort(picked.begin(), picked.end());
    REQUIRE(std::adjacent_find(picked.begin(), picked.end()) == picked.end());
    REQUIRE(picked.front() >= 0);
    REQUIRE(picked.back() < 100);
}

TEST_CASE("bounded draws cover the range uniformly") {
    RngStream s(5);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) counts[static_cast<std::size_t>(s.below(7))]++;
    for (int c : counts) REQUIRE_THAT(static_cast<double>(c), Catch::Matchers::WithinAbs(10000.0, 400.0));
}
