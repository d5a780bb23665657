#include <doctest.h>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dynae/diagnostics.hpp"
#include "dynae/errors.hpp"
#include "dynae/loss.hpp"
#include "dynae/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dynae;


TEST_CASE("hungarian small cases") {
    auto a = hungarian(Matrix{{0, 9}, {9, 0}});
    CHECK(a.col_of_row == std::vector<std::size_t>{0, 1});
    CHECK(a.cost == 0.0);
    auto b = hungarian(Matrix{{1, 2}, {2, 1}});
    CHECK(b.col_of_row == std::vector<std::size_t>{0, 1});
    CHECK(b.cost == 2.0);
    // all permutations optimal: the lexicographically smallest wins
    auto c = hungarian(Matrix(3, 3, 1.0));
    CHECK(c.col_of_row == std::vector<std::size_t>{0, 1, 2});
    auto d = hungarian(Matrix{{5, 1, 1}, {1, 5, 5}, {1, 5, 5}});
    CHECK(d.col_of_row == std::vector<std::size_t>{1, 0, 2});
    CHECK_THROWS_AS(hungarian(Matrix(2, 3)), ArgumentError);
}

TEST_CASE("hungarian equals exhaustive search") {
    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + rng.below(6);
        Matrix c(n, n);
        for (double& v : c.values()) v = static_cast<double>(rng.below(10));  // integer costs force ties
        auto h = hungarian(c);
        CHECK(h.cost == oracle::min_assignment_cost(c));
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += c(i, h.col_of_row[i]);
        CHECK(s == h.cost);
    }
    for (int t = 0; t < 200; ++t) {
        auto c = testing::random_matrix(6, 6, rng, 0, 10);
        CHECK(std::abs(hungarian(c).cost - oracle::min_assignment_cost(c)) < 1e-9);
    }
}

TEST_CASE("accuracy") {
    std::vector<int> y{0, 1, 2, 2, 1, 0};
    CHECK(acc(y, y) == 1.0);
    std::vector<int> renamed{2, 0, 1, 1, 0, 2};
    CHECK(acc(y, renamed) == 1.0);
    CHECK(acc(std::vector<int>{0, 0, 1, 1}, std::vector<int>{1, 1, 0, 2}) == 0.75);

    std::vector<int> balanced, constant;
    for (int i = 0; i < 100; ++i) {
        balanced.push_back(i % 10);
        constant.push_back(0);
    }
    CHECK(acc(balanced, constant) == doctest::Approx(0.1));
    CHECK_THROWS_AS(acc(y, std::vector<int>{0, 1}), DimensionError);
}

TEST_CASE("accuracy and nmi against brute force") {
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng.below(39);
        const int k = 1 + static_cast<int>(rng.below(6));
        std::vector<int> y(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
            p[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        }
        CHECK(acc(y, p) == doctest::Approx(oracle::best_map_accuracy(y, p)).epsilon(1e-15));
        CHECK(std::abs(nmi(y, p) - oracle::contingency_nmi(y, p)) < 1e-12);
    }
}

TEST_CASE("nmi fixed cases") {
    std::vector<int> y{0, 0, 1, 1, 2};
    CHECK(nmi(y, y) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(nmi(y, std::vector<int>(5, 3)) == 0.0);
    CHECK(std::abs(nmi(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1})) < 1e-15);
}

TEST_CASE("gradient cosine") {
    std::vector<double> g{1, -2, 3};
    std::vector<double> g3{3, -6, 9}, neg{-1, 2, -3};
    CHECK(grad_cosine(g, g3) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(grad_cosine(g, neg) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(grad_cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
    CHECK_THROWS_AS(grad_cosine(g, std::vector<double>{0, 0, 0}), UnavailableError);
    CHECK_THROWS_AS(grad_cosine(g, std::vector<double>{0, 0}), DimensionError);
}

TEST_CASE("pca of a line and of a pair") {
    Matrix line(20, 2);
    for (std::size_t i = 0; i < 20; ++i) {
        line(i, 0) = static_cast<double>(i) - 3.0;
        line(i, 1) = 2.0 * line(i, 0);
    }
    auto p = pca2d(line);
    for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(p(i, 1)) < 1e-9);

    Matrix pair{{1, 2}, {4, 6}};
    auto q = pca2d(pair);
    CHECK(std::abs(std::hypot(q(0, 0) - q(1, 0), q(0, 1) - q(1, 1)) - 5.0) < 1e-12);
    CHECK_THROWS_AS(pca2d(Matrix(4, 3, 1.0)), UnavailableError);
}

TEST_CASE("pca variance equals the top covariance eigenvalues") {
    Rng rng(3);
    auto Z = testing::random_matrix(50, 10, rng);
    for (std::size_t i = 0; i < 50; ++i) Z(i, 3) += 3.0 * Z(i, 0);  // give the cloud some structure
    auto P = pca2d(Z);

    // covariance by hand, eigenvalues through LAPACK
    std::vector<double> mean(10, 0.0), cov(100, 0.0);
    for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t k = 0; k < 10; ++k) mean[k] += Z(i, k) / 50.0;
    for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t a = 0; a < 10; ++a)
            for (std::size_t b = 0; b < 10; ++b) cov[a * 10 + b] += (Z(i, a) - mean[a]) * (Z(i, b) - mean[b]) / 49.0;
    std::vector<double> w(10);
    REQUIRE(LAPACKE_dsyev(LAPACK_ROW_MAJOR, 'N', 'U', 10, cov.data(), 10, w.data()) == 0);

    for (std::size_t c = 0; c < 2; ++c) {
        double m = 0.0, v = 0.0;
        for (std::size_t i = 0; i < 50; ++i) m += P(i, c) / 50.0;
        for (std::size_t i = 0; i < 50; ++i) v += (P(i, c) - m) * (P(i, c) - m) / 49.0;
        CHECK(std::abs(m) < 1e-12);
        CHECK(std::abs(v - w[9 - c]) < 1e-9);
    }
}

TEST_CASE("cluster of class inverts the matching") {
    std::vector<int> y{0, 0, 1, 1, 2, 2};
    std::vector<int> p{2, 2, 0, 0, 1, 1};
    CHECK(cluster_of_class(y, p, 3) == std::vector<int>{2, 0, 1});
    // more classes than clusters: the unmatched class maps to -1
    auto partial = cluster_of_class(y, std::vector<int>{0, 0, 1, 1, 1, 1}, 2);
    CHECK(std::count(partial.begin(), partial.end(), -1) == 1);
}
