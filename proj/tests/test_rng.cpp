#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "conslearn/rng.hpp"

using conslearn::Rng;

TEST_CASE("same seed reproduces the stream") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng c(123), d(123);
    for (int i = 0; i < 100; ++i) {
        CHECK(c.uniform() == d.uniform());
        CHECK(c.normal() == d.normal());
    }
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    int equal = 0;
    for (int i = 0; i < 64; ++i) {
        if (a.next_u64() == b.next_u64()) ++equal;
    }
    CHECK(equal == 0);
}

TEST_CASE("uniform stays in [0, 1) and ranges are respected") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 1000; ++i) {
        double x = rng.uniform(-3.0, 5.0);
        CHECK(x >= -3.0);
        CHECK(x <= 5.0);
    }
    CHECK_THROWS_AS(rng.uniform(1.0, 0.0), conslearn::InputError);
}

TEST_CASE("uniform_index covers [0, n) without bias artifacts") {
    Rng rng(11);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) {
        auto k = rng.uniform_index(5);
        REQUIRE(k < 5);
        ++counts[static_cast<std::size_t>(k)];
    }
    for (int c : counts) {
        CHECK(c > 9000); // expectation 10000, generous band
        CHECK(c < 11000);
    }
    CHECK_THROWS_AS(rng.uniform_index(0), conslearn::InputError);
}

TEST_CASE("normal moments are plausible") {
    Rng rng(5);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        sum += z;
        sumsq += z * z;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("child streams are independent of sibling order") {
    Rng root(42);
    Rng c3_first = root.child(3);
    // Drawing from one child must not affect another.
    Rng c0 = root.child(0);
    for (int i = 0; i < 10; ++i) (void)c0.next_u64();
    Rng c3_second = root.child(3);
    for (int i = 0; i < 32; ++i) {
        CHECK(c3_first.next_u64() == c3_second.next_u64());
    }
}

TEST_CASE("child streams do not collide with each other or the parent") {
    Rng root(42);
    std::set<std::uint64_t> first_draws;
    first_draws.insert(Rng(42).next_u64());
    for (std::uint64_t i = 0; i < 256; ++i) {
        first_draws.insert(root.child(i).next_u64());
    }
    CHECK(first_draws.size() == 257);
}
