#include <cmath>
#include <vector>

#include "doctest.h"
#include "flowcast/errors.hpp"
#include "flowcast/normal.hpp"
#include "flowcast/parallel.hpp"
#include "flowcast/random.hpp"
#include "oracles.hpp"

using namespace flowcast;

TEST_CASE("normal quantile agrees with a bisection inverse") {
    for (double p : {1e-10, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.9, 0.97575, 0.999, 1 - 1e-6}) {
        CHECK(normal_quantile(p) == doctest::Approx(oracle::Phi_inv(p)).epsilon(1e-9));
    }
    CHECK(normal_quantile(0.5) == 0.0);
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
}

TEST_CASE("normal quantile rejects levels outside (0,1)") {
    CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
    CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
    CHECK_THROWS_AS(normal_quantile(-0.2), DomainError);
    CHECK_THROWS_AS(normal_quantile(std::nan("")), DomainError);
}

TEST_CASE("normal cdf and pdf") {
    for (double x : {-8.0, -1.3, 0.0, 0.4, 3.0}) {
        CHECK(normal_cdf(x) == doctest::Approx(oracle::Phi(x)).epsilon(1e-14));
        CHECK(normal_pdf(x) == doctest::Approx(oracle::phi(x)).epsilon(1e-14));
        if (std::abs(x) <= 3.0) CHECK(normal_quantile(normal_cdf(x)) == doctest::Approx(x).epsilon(1e-9));
    }
}

TEST_CASE("generator is deterministic and moments are sane") {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
    Rng r(1);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform_open();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
        CHECK(r.below(7) < 7);
    }
}

TEST_CASE("below is uniform over a small range") {
    Rng r(9);
    std::vector<int> counts(5, 0);
    const int n = 50000;
    for (int i = 0; i < n; ++i) ++counts[r.below(5)];
    for (int c : counts) CHECK(std::abs(c - n / 5) < 500);
}

TEST_CASE("parallel_for covers the range once and rethrows") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) ++hits[i];
    });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t, std::size_t) { throw DataError("boom"); }), DataError);
    CHECK(worker_count() >= 1);
}
