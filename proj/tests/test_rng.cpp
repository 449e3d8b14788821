#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "multiverse/rng.hpp"

using namespace multiverse;

// Reference values computed with an independent integer-arithmetic
// implementation of splitmix64 and xoshiro256++ before this module was
// written.
TEST_CASE("splitmix64 reference stream") {
    SplitMix64 sm(42);
    REQUIRE(sm.next() == 0xbdd732262feb6e95ULL);
    REQUIRE(sm.next() == 0x28efe333b266f103ULL);
    REQUIRE(sm.next() == 0x47526757130f9f52ULL);
}

TEST_CASE("xoshiro256++ reference stream") {
    Rng rng(42);
    REQUIRE(rng.next_u64() == 0xd0764d4f4476689fULL);
    REQUIRE(rng.next_u64() == 0x519e4174576f3791ULL);
    REQUIRE(rng.next_u64() == 0xfbe07cfb0c24ed8cULL);

    Rng zero(0);
    REQUIRE(zero.next_u64() == 0x53175d61490b23dfULL);
    REQUIRE(zero.next_u64() == 0x61da6f3dc380d507ULL);
}

TEST_CASE("doubles come from the top 53 bits") {
    Rng rng(42);
    REQUIRE(rng.next_double() == 0.81430514512290986);
    REQUIRE(rng.next_double() == 0.31882104006166112);
    Rng again(42);
    for (int i = 0; i < 1000; ++i) {
        const double x = again.next_double();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
    }
}

TEST_CASE("identical seeds give identical streams") {
    Rng a(987654321);
    Rng b(987654321);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
    for (int i = 0; i < 100; ++i) REQUIRE(a.gaussian() == b.gaussian());
}

TEST_CASE("gaussian moments are sane") {
    Rng rng(5);
    const int n = 200000;
    double sum = 0.0;
    double sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.gaussian();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.01);
    REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("below is in range and roughly uniform") {
    Rng rng(9);
    int buckets[7] = {0};
    for (int i = 0; i < 70000; ++i) {
        const std::uint64_t x = rng.below(7);
        REQUIRE(x < 7);
        ++buckets[x];
    }
    for (int b : buckets) REQUIRE(std::abs(b - 10000) < 500);
}

TEST_CASE("derive_seed separates streams") {
    REQUIRE(derive_seed(1, 0) != derive_seed(1, 1));
    REQUIRE(derive_seed(1, 0) != derive_seed(2, 0));
    REQUIRE(derive_seed(1, 0) == derive_seed(1, 0));
}
