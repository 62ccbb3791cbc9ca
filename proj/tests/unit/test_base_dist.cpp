#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "flowcast/base_dist.hpp"
#include "flowcast/errors.hpp"
#include "oracles.hpp"

using namespace flowcast;

TEST_CASE("raw outputs split into mean and floored softplus scale") {
    const auto raw = ad::Tensor::matrix(2, 4, {0.1, -0.2, 0.0, -50.0, 1.0, 2.0, 3.0, 1.5});
    const auto g = gaussian_from_raw(raw, 2);
    CHECK(g.mu.data()[0] == 0.1);
    CHECK(g.mu.data()[3] == 2.0);
    CHECK(g.sigma.data()[0] == doctest::Approx(std::log(2.0) + 1e-6).epsilon(1e-14));
    CHECK(g.sigma.data()[1] >= kSigmaFloor);
    CHECK(g.sigma.data()[1] == doctest::Approx(1e-6).epsilon(1e-6));
    CHECK(g.sigma.data()[2] == doctest::Approx(std::log1p(std::exp(3.0)) + 1e-6).epsilon(1e-14));
    CHECK_THROWS_AS(gaussian_from_raw(ad::Tensor::matrix(1, 3, {0, 0, 0}), 2), ShapeError);
}

TEST_CASE("log density of a diagonal Gaussian") {
    const GaussianParams p{{0.5, -1.0}, {2.0, 0.3}};
    const std::vector<double> z{1.1, -0.8};
    double expected = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double u = (z[i] - p.mu[i]) / p.sigma[i];
        expected += -0.5 * u * u - std::log(p.sigma[i]) - 0.5 * std::log(2 * std::numbers::pi);
    }
    CHECK(log_prob(p, z) == doctest::Approx(expected).epsilon(1e-14));
    GaussianTensors t{ad::Tensor::matrix(1, 2, p.mu), ad::Tensor::matrix(1, 2, p.sigma)};
    CHECK(log_prob(t, ad::Tensor::matrix(1, 2, z)).item() == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("quantile is mu + sigma times the standard normal quantile") {
    const GaussianParams p{{0.2}, {1.7}};
    for (double a : {0.01, 0.25, 0.5, 0.9}) {
        CHECK(quantile(p, a)[0] == doctest::Approx(0.2 + 1.7 * oracle::Phi_inv(a)).epsilon(1e-9));
    }
    CHECK_THROWS_AS(quantile(p, 0.0), DomainError);
    CHECK_THROWS_AS(quantile(p, 1.0), DomainError);
}

TEST_CASE("samples have the requested moments") {
    const GaussianParams p{{1.0, -2.0}, {0.5, 3.0}};
    Rng rng(4);
    const auto s = sample(p, 100000, rng);
    double m0 = 0, m1 = 0, v1 = 0;
    for (const auto& row : s) {
        m0 += row[0];
        m1 += row[1];
    }
    m0 /= s.size();
    m1 /= s.size();
    for (const auto& row : s) v1 += (row[1] - m1) * (row[1] - m1);
    v1 /= s.size();
    CHECK(m0 == doctest::Approx(1.0).epsilon(0.01));
    CHECK(m1 == doctest::Approx(-2.0).epsilon(0.02));
    CHECK(std::sqrt(v1) == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("standard and learned bases") {
    const GaussianBase std_base = GaussianBase::standard(3);
    CHECK_FALSE(std_base.learned());
    const std::vector<double> x{0.3, 0.4};
    const auto sp = std_base.params(x);
    CHECK(sp.mu == std::vector<double>{0, 0, 0});
    CHECK(sp.sigma == std::vector<double>{1, 1, 1});
    CHECK(std_base.named_parameters("base").empty());

    Rng rng(2);
    GaussianBase learned(Mlp(2, {4}, 6, rng), 3);
    CHECK(learned.learned());
    const auto lp = learned.params(x);
    const auto lt = learned.params(ad::Tensor::matrix(1, 2, x));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(lp.mu[i] == doctest::Approx(lt.mu.data()[i]).epsilon(1e-15));
        CHECK(lp.sigma[i] == doctest::Approx(lt.sigma.data()[i]).epsilon(1e-15));
    }
    CHECK_THROWS_AS(GaussianBase(Mlp(2, {4}, 5, rng), 3), ShapeError);
}
