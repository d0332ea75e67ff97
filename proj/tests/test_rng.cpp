#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "ttifair/hash.hpp"
#include "ttifair/rng.hpp"

using namespace ttifair;

TEST_SUITE("rng") {

TEST_CASE("streams are reproducible and keyed by name") {
    RandomStream a(42, "personas"), b(42, "personas"), c(42, "rep_attr"), d(43, "personas");
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
}

TEST_CASE("substreams ignore the parent's consumed state") {
    RandomStream a(1, "s");
    const RandomStream fresh(1, "s");
    for (int i = 0; i < 10; ++i) a.next_u64();
    CHECK(a.substream(5).next_u64() == fresh.substream(5).next_u64());
    CHECK(a.substream("cell").next_u64() == fresh.substream("cell").next_u64());
    CHECK(fresh.substream(5).key() != fresh.substream(6).key());
    CHECK(fresh.substream("a").key() != fresh.substream("b").key());
}

TEST_CASE("below covers the range uniformly") {
    RandomStream r(9, "below");
    std::map<std::uint64_t, int> counts;
    const int n = 60000;
    for (int i = 0; i < n; ++i) counts[r.below(6)]++;
    CHECK(counts.size() == 6);
    for (const auto& [k, c] : counts) {
        CHECK(k < 6);
        CHECK(std::abs(c - n / 6) < 600);
    }
}

TEST_CASE("uniform_int is inclusive and uniform01 stays in [0, 1)") {
    RandomStream r(3, "ints");
    std::set<std::int64_t> seen;
    for (int i = 0; i < 5000; ++i) {
        const auto x = r.uniform_int(15, 65);
        CHECK(x >= 15);
        CHECK(x <= 65);
        seen.insert(x);
        const double u = r.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(seen.size() == 51);
}

TEST_CASE("normal draws have the requested moments") {
    RandomStream r(4, "normal");
    double sum = 0, sq = 0;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal(30.0, 5.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(mean == doctest::Approx(30.0).epsilon(0.005));
    CHECK(std::sqrt(var) == doctest::Approx(5.0).epsilon(0.02));
}

TEST_CASE("engine output is the standard mt19937_64 sequence") {
    std::mt19937_64 ref(splitmix64(7 ^ fnv1a64("x")));
    RandomStream r(7, "x");
    for (int i = 0; i < 5; ++i) CHECK(r.next_u64() == ref());
}

TEST_CASE("hash helpers") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

}
