#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "flow_helpers.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/training.hpp"

using namespace flowcast;
using testing_support::small_config;

namespace {

// y = 2x + 0.5 + 0.3 eps
void gaussian_data(std::size_t n, std::uint64_t seed, Matrix& x, Matrix& y) {
    Rng rng(seed);
    x = Matrix(n, 1);
    y = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform(-1, 1);
        y(i, 0) = 2 * x(i, 0) + 0.5 + 0.3 * rng.normal();
    }
}

TrainConfig quick_config() {
    TrainConfig c;
    c.lr0 = 1e-2;
    c.max_iters = 200;
    c.batch_size = 64;
    c.eval_every = 50;
    c.patience = 100;
    c.seed = 3;
    return c;
}

}  // namespace

TEST_CASE("step decay schedule") {
    TrainConfig c;
    c.lr0 = 0.09;
    CHECK(lr_at(c, 0) == 0.09);
    CHECK(lr_at(c, 299) == 0.09);
    CHECK(lr_at(c, 300) == doctest::Approx(0.03).epsilon(1e-15));
    CHECK(lr_at(c, 599) == doctest::Approx(0.03).epsilon(1e-15));
    CHECK(lr_at(c, 600) == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("first Adam step moves each weight by lr times g/(|g|+eps)") {
    auto w = ad::Tensor::from({3}, {1.0, -2.0, 0.5}, true);
    ad::backward(ad::sum(ad::square(w) * 0.5 + w * 3.0));  // grad = w + 3
    std::vector<ad::Tensor> params{w};
    AdamState state = make_adam_state(params);
    adam_step(params, state, 0.1);
    const double start[] = {1.0, -2.0, 0.5};
    for (int i = 0; i < 3; ++i) {
        const double g = start[i] + 3.0;
        // m_hat = g and v_hat = g^2 after bias correction.
        CHECK(w.data()[i] == doctest::Approx(start[i] - 0.1 * g / (std::abs(g) + 1e-8)).epsilon(1e-14));
    }
    CHECK(state.step == 1);
}

TEST_CASE("second Adam step uses the bias-corrected moments") {
    auto w = ad::Tensor::from({1}, {0.0}, true);
    std::vector<ad::Tensor> params{w};
    AdamState s = make_adam_state(params);
    w.node()->ensure_grad()[0] = 2.0;
    adam_step(params, s, 1.0);
    w.node()->grad[0] = -1.0;
    const double before = w.data()[0];
    adam_step(params, s, 1.0);
    const double m = 0.9 * 0.1 * 2.0 + 0.1 * -1.0;
    const double v = 0.999 * 0.001 * 4.0 + 0.001 * 1.0;
    const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
    CHECK(w.data()[0] == doctest::Approx(before - mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-13));
}

TEST_CASE("gradient clipping rescales to the global norm") {
    auto a = ad::Tensor::from({2}, {0.0, 0.0}, true);
    auto b = ad::Tensor::from({1}, {0.0}, true);
    a.node()->ensure_grad() = {3.0, 4.0};
    b.node()->ensure_grad() = {12.0};
    std::vector<ad::Tensor> params{a, b};
    CHECK(clip_grad_norm(params, 6.5) == doctest::Approx(13.0));
    CHECK(a.grad()[0] == doctest::Approx(1.5));
    CHECK(b.grad()[0] == doctest::Approx(6.0));
    CHECK(clip_grad_norm(params, 100.0) == doctest::Approx(6.5));
    CHECK(b.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("training lowers validation NLL and restores the best snapshot") {
    Matrix tx, ty, vx, vy;
    gaussian_data(2000, 1, tx, ty);
    gaussian_data(500, 2, vx, vy);
    auto flow = make_flow(small_config(ModelKind::NnG, 1, 1, 4));
    const double before = evaluate_nll(flow, vx, vy);
    const FitResult r = fit(flow, tx, ty, vx, vy, quick_config());
    CHECK(r.best_val_nll < before - 0.5);
    CHECK(evaluate_nll(flow, vx, vy) == doctest::Approx(r.best_val_nll).epsilon(1e-12));
    REQUIRE(r.history.size() == 4);
    CHECK(r.history[0].iter == 50);
    CHECK(r.history.back().iter == 200);
    // The optimum is the true noise level: 0.5 log(2 pi e 0.09) ~= 0.2148.
    CHECK(r.best_val_nll < 0.5);
}

TEST_CASE("training is deterministic for a fixed seed") {
    Matrix tx, ty, vx, vy;
    gaussian_data(500, 1, tx, ty);
    gaussian_data(200, 2, vx, vy);
    auto cfg = quick_config();
    cfg.max_iters = 60;
    auto f1 = make_flow(small_config(ModelKind::Cnf, 1, 1, 4));
    auto f2 = make_flow(small_config(ModelKind::Cnf, 1, 1, 4));
    fit(f1, tx, ty, vx, vy, cfg);
    fit(f2, tx, ty, vx, vy, cfg);
    const auto p1 = f1.parameters(), p2 = f2.parameters();
    for (std::size_t k = 0; k < p1.size(); ++k)
        for (std::size_t i = 0; i < p1[k].numel(); ++i) CHECK(p1[k][i] == p2[k][i]);
}

TEST_CASE("zero patience stops at the first evaluation") {
    Matrix tx, ty, vx, vy;
    gaussian_data(300, 1, tx, ty);
    gaussian_data(100, 2, vx, vy);
    auto cfg = quick_config();
    cfg.patience = 0;
    auto flow = make_flow(small_config(ModelKind::NnG, 1, 1, 4));
    const auto r = fit(flow, tx, ty, vx, vy, cfg);
    CHECK(r.iterations == 50);
    CHECK(r.history.size() == 1);
}

TEST_CASE("non-finite loss aborts with the iteration number") {
    Matrix tx, ty, vx, vy;
    gaussian_data(64, 1, tx, ty);
    gaussian_data(64, 2, vx, vy);
    ty(5, 0) = std::numeric_limits<double>::quiet_NaN();
    auto cfg = quick_config();
    cfg.batch_size = 64;
    auto flow = make_flow(small_config(ModelKind::NnG, 1, 1, 4));
    try {
        fit(flow, tx, ty, vx, vy, cfg);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("iteration 0") != std::string::npos);
    }
}

TEST_CASE("input validation and history format") {
    Matrix tx, ty, vx, vy;
    gaussian_data(10, 1, tx, ty);
    auto flow = make_flow(small_config(ModelKind::NnG, 1, 1, 4));
    CHECK_THROWS_AS(fit(flow, tx, ty, vx, vy, quick_config()), DataError);
    auto bad = quick_config();
    bad.lr0 = 0.0;
    CHECK_THROWS_AS(fit(flow, tx, ty, tx, ty, bad), ConfigError);
    std::ostringstream os;
    write_history_csv(os, {{50, 1.5, 1.25, 1e-4}});
    CHECK(os.str().rfind("iter,train_nll,val_nll,lr\n50,1.5,1.25,", 0) == 0);
}
