#include <doctest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "ttifair/error.hpp"
#include "ttifair/stats.hpp"

using namespace ttifair;
using namespace testsupport;

TEST_SUITE("stats") {

TEST_CASE("kl divergence matches direct summation") {
    std::mt19937_64 gen(11);
    const auto q = uniform_distribution(6);
    for (int i = 0; i < 200; ++i) {
        const auto p = random_distribution(gen, 6, 0.2);
        CHECK(kl_divergence(p, q) == doctest::Approx(reference_kl(p, q)).epsilon(1e-12));
        CHECK(tvd(p, q) == doctest::Approx(reference_tvd(p, q)).epsilon(1e-12));
    }
}

TEST_CASE("closed-form diversity anchors") {
    const auto q = uniform_distribution(6);
    const Distribution point{{1, 0, 0, 0, 0, 0}};
    const Distribution half{{0.5, 0.5, 0, 0, 0, 0}};
    CHECK(diversity_score_kl(point, q) == doctest::Approx(1.0 / 6).epsilon(1e-12));
    CHECK(diversity_score_tvd(point, q) == doctest::Approx(1.0 / 6).epsilon(1e-12));
    CHECK(diversity_score_kl(half, q) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(diversity_score_tvd(half, q) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(diversity_score_kl(q, q) == 1.0);
    CHECK(diversity_score_tvd(q, q) == 1.0);
    CHECK(kl_divergence(q, q) == 0.0);
}

TEST_CASE("literal kl scoring is the complement") {
    const auto q = uniform_distribution(6);
    const Distribution point{{1, 0, 0, 0, 0, 0}};
    CHECK(diversity_score_kl(point, q, KlScoring::Literal) == doctest::Approx(5.0 / 6));
    CHECK(diversity_score_kl(q, q, KlScoring::Literal) == 0.0);
}

TEST_CASE("kl and tvd reject mismatched or unsupported inputs") {
    CHECK_THROWS_AS(kl_divergence({{0.5, 0.5}}, uniform_distribution(3)), DataError);
    CHECK_THROWS_AS(tvd({{0.5, 0.5}}, uniform_distribution(3)), DataError);
    CHECK_THROWS_AS(kl_divergence({{0.5, 0.5}}, {{1.0, 0.0}}), DataError);
    CHECK(kl_divergence({{1.0, 0.0}}, {{0.5, 0.5}}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("tvd is bounded and symmetric") {
    std::mt19937_64 gen(5);
    for (int i = 0; i < 100; ++i) {
        const auto p = random_distribution(gen, 4, 0.3);
        const auto q = random_distribution(gen, 4, 0.3);
        const double d = tvd(p, q);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        CHECK(d == doctest::Approx(tvd(q, p)).epsilon(1e-15));
    }
}

TEST_CASE("mixing toward the fair distribution never lowers diversity") {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto q = uniform_distribution(6);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = random_distribution(gen, 6, 0.3);
        const double t = u(gen);
        Distribution mixed{std::vector<double>(6)};
        for (std::size_t i = 0; i < 6; ++i) mixed.weights[i] = (1 - t) * p[i] + t * q[i];
        CHECK(diversity_score_kl(mixed, q) >= diversity_score_kl(p, q) - 1e-12);
        CHECK(diversity_score_tvd(mixed, q) >= diversity_score_tvd(p, q) - 1e-12);
    }
}

TEST_CASE("parity fails exactly the outlier") {
    const std::vector<std::string> v{"a", "b", "c", "d", "e", "f"};
    const std::vector<double> s{0.6, 0.6, 0.6, 0.6, 0.6, 0.3};
    const auto r = parity_check(v, s, 0.15);
    CHECK(r.expectation == doctest::Approx(0.55));
    REQUIRE(r.failing_values.size() == 1);
    CHECK(r.failing_values[0] == "f");
    CHECK(r.deviations[5] == doctest::Approx(0.25));
    CHECK_FALSE(r.passed());
}

TEST_CASE("parity of equal scores passes for any epsilon") {
    const std::vector<std::string> v{"a", "b", "c"};
    const std::vector<double> s{0.42, 0.42, 0.42};
    for (double eps : {0.0, 0.01, 0.15, 1.0}) CHECK(parity_check(v, s, eps).passed());
}

TEST_CASE("parity with fair weights uses the weighted mean") {
    const std::vector<std::string> v{"a", "b"};
    const std::vector<double> s{1.0, 0.0};
    const std::vector<double> w{0.75, 0.25};
    CHECK(parity_check(v, s, 0.5, w).expectation == doctest::Approx(0.75));
    CHECK_THROWS_AS(parity_check(v, s, 0.1, std::vector<double>{1.0}), DataError);
    CHECK_THROWS_AS(parity_check({}, {}, 0.1), DataError);
}

TEST_CASE("parity is invariant under value permutation") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> v{"a", "b", "c", "d", "e", "f"};
        std::vector<double> s(6);
        for (auto& x : s) x = u(gen);
        const auto base = parity_check(v, s, 0.15);
        std::vector<std::size_t> perm{0, 1, 2, 3, 4, 5};
        std::shuffle(perm.begin(), perm.end(), gen);
        std::vector<std::string> pv;
        std::vector<double> ps;
        for (auto i : perm) {
            pv.push_back(v[i]);
            ps.push_back(s[i]);
        }
        const auto shuffled = parity_check(pv, ps, 0.15);
        CHECK(shuffled.expectation == base.expectation);
        auto a = base.failing_values, b = shuffled.failing_values;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
}

TEST_CASE("fractional ranks average ties") {
    const std::vector<double> x{2.0, 2.0, 3.10, 2.0, 2.76, 2.55};
    const auto r = fractional_ranks(x);
    CHECK(r == std::vector<double>{2.0, 2.0, 6.0, 2.0, 5.0, 4.0});
}

TEST_CASE("pearson and spearman edge cases") {
    const std::vector<double> a{1, 2, 3, 4};
    const std::vector<double> b{2, 4, 6, 8};
    const std::vector<double> c{4, 3, 2, 1};
    CHECK(pearson(a, b) == doctest::Approx(1.0));
    CHECK(pearson(a, c) == doctest::Approx(-1.0));
    CHECK(spearman(a, c) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(pearson(a, std::vector<double>{1, 1, 1, 1}), DataError);
    CHECK_THROWS_AS(pearson(a, std::vector<double>{1, 2}), DataError);
    CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), DataError);
    CHECK_THROWS_AS(spearman(a, std::vector<double>{1, 2}), DataError);
}

TEST_CASE("spearman is invariant under monotone transforms") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(8), y(8), tx(8);
        for (int i = 0; i < 8; ++i) {
            x[i] = u(gen);
            y[i] = u(gen);
            tx[i] = std::exp(3 * x[i]) + 2;
        }
        CHECK(spearman(tx, y) == doctest::Approx(spearman(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("reference column correlations") {
    auto near = [](double x, double target, double tol) { return std::fabs(x - target) <= tol; };
    const DiversityColumns t1;
    CHECK(near(spearman(t1.kl_model, t1.kl_human), 0.943, 0.002));
    CHECK(near(spearman(t1.tvd_model, t1.tvd_human), 0.943, 0.002));
    const InclusionColumns t2;
    const auto a2 = agreement(t2.crowd, t2.persona_human);
    CHECK(near(a2.pearson, 0.94, 0.01));
    CHECK(near(a2.spearman, 0.82, 0.01));
    CHECK(a2.n == 6);
    const QualityColumns t3;
    CHECK(near(spearman(t3.crowd, t3.single), 0.76, 0.01));
    CHECK(near(pearson(t3.crowd, t3.single), 0.80, 0.03));
}

}
