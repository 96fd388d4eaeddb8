#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mmcl/rng.hpp"

TEST_SUITE_BEGIN("rng");

TEST_CASE("same seed reproduces the stream") {
    mmcl::Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
        CHECK(a.uniform() == b.uniform());
        CHECK(a.normal() == b.normal());
    }
}

TEST_CASE("forked streams differ by tag and are stable") {
    mmcl::Rng root(7);
    mmcl::Rng f1 = root.fork(1);
    mmcl::Rng f2 = root.fork(2);
    mmcl::Rng f1_again = root.fork(1);
    CHECK(f1.next_u64() != f2.next_u64());
    mmcl::Rng f1b = root.fork(1);
    CHECK(f1_again.next_u64() == f1b.next_u64());
}

TEST_CASE("uniform stays in [0,1) and uniform_index in range") {
    mmcl::Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 10000; ++i) {
        const std::size_t j = rng.uniform_index(7);
        CHECK(j < 7);
    }
    for (int i = 0; i < 1000; ++i) {
        const int v = rng.uniform_int(-3, 3);
        CHECK(v >= -3);
        CHECK(v <= 3);
    }
}

TEST_CASE("normal samples have roughly standard moments") {
    mmcl::Rng rng(11);
    const int n = 20000;
    double mean = 0.0, var = 0.0;
    std::vector<double> xs(n);
    rng.fill_normal(xs.data(), n);
    for (double x : xs) mean += x;
    mean /= n;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= n;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("shuffle produces a permutation and is deterministic") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    mmcl::Rng rng(5);
    rng.shuffle(v);
    std::vector<int> w = v;
    std::sort(w.begin(), w.end());
    for (int i = 0; i < 50; ++i) CHECK(w[i] == i);

    std::vector<int> v2(50);
    std::iota(v2.begin(), v2.end(), 0);
    mmcl::Rng rng2(5);
    rng2.shuffle(v2);
    CHECK(v == v2);
}

TEST_CASE("state save/load resumes the exact stream") {
    mmcl::Rng rng(99);
    rng.normal();  // leaves a cached Box-Muller spare in the state
    const std::string state = rng.save_state();

    std::vector<double> expect;
    for (int i = 0; i < 10; ++i) expect.push_back(rng.normal());
    for (int i = 0; i < 10; ++i) expect.push_back(rng.uniform());

    mmcl::Rng other(1);
    other.load_state(state);
    for (int i = 0; i < 10; ++i) CHECK(other.normal() == expect[i]);
    for (int i = 0; i < 10; ++i) CHECK(other.uniform() == expect[10 + i]);
}

TEST_SUITE_END();
