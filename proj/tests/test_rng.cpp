#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "cdur/rng.hpp"

using cdur::SplitMix64;

TEST_CASE("identical keys give identical streams") {
    SplitMix64 a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("split streams do not depend on parent consumption") {
    SplitMix64 a(7);
    const SplitMix64 child_before = a.split(3);
    a.next_u64();
    a.next_u64();
    const SplitMix64 child_after = a.split(3);
    CHECK(child_before.key() == child_after.key());
}

TEST_CASE("distinct labels give distinct streams") {
    SplitMix64 base(1234);
    std::set<std::uint64_t> keys;
    for (std::uint64_t i = 0; i < 1000; ++i) keys.insert(base.split(i).key());
    CHECK(keys.size() == 1000);
}

TEST_CASE("uniform doubles have the right first two moments") {
    SplitMix64 rng(99);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sum2 += u * u;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - 0.5) < 0.005);       // ~7 sigma
    CHECK(std::abs(var - 1.0 / 12.0) < 0.005);
}

TEST_CASE("fnv1a64 matches known vectors") {
    CHECK(cdur::fnv1a64("") == 0xCBF29CE484222325ULL);
    CHECK(cdur::fnv1a64("a") == 0xAF63DC4C8601EC8CULL);
}
