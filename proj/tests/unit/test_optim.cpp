#include "helpers.hpp"

#include "sfwc/optim/steps.hpp"
#include "sfwc/zoo/problems.hpp"

#include <doctest.h>

#include <cmath>

using namespace sfwc;
using sfwc::test::random_tensor;

TEST_CASE("momentum_update examples") {
    const Tensor m = Tensor::vector({1, 0}), g = Tensor::vector({0, 1});
    CHECK(max_abs_diff(momentum_update(m, g, 0.9, 3), Tensor::vector({0.9, 0.1})) < 1e-15);
    CHECK(momentum_update(m, g, 0.9, 0) == g);
    CHECK(momentum_update(m, g, 0.0, 5) == g);
    CHECK_THROWS_AS(momentum_update(m, Tensor::vector({1}), 0.9, 1), Error);
}

TEST_CASE("rescale_lr examples") {
    CHECK(rescale_lr(RescaleMode::Gradient, 0.1, 2.0, 4.0, 1.0) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(rescale_lr(RescaleMode::Diameter, 0.2, 0.0, 0.0, 4.0) == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(rescale_lr(RescaleMode::Gradient, 0.9, 10.0, 1.0, 1.0) == 1.0);
    CHECK(rescale_lr(RescaleMode::None, 1.5, 0.0, 0.0, 0.0) == 1.0);
    CHECK(rescale_lr(RescaleMode::GradientTheory, 0.1, 3.0, 0.0, 0.0) == doctest::Approx(0.3).epsilon(1e-15));
    try {
        rescale_lr(RescaleMode::Gradient, 0.1, 1.0, 0.0, 1.0);
        FAIL("expected DegenerateDirection");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::DegenerateDirection);
    }
}

TEST_CASE("lr_schedule examples") {
    CHECK(lr_schedule(Schedule::LinearDecay, 0, 10, 0.1) == 0.1);
    CHECK(lr_schedule(Schedule::LinearDecay, 5, 10, 0.1) == doctest::Approx(0.05).epsilon(1e-15));
    for (std::size_t t = 0; t < 10; ++t)
        CHECK(lr_schedule(Schedule::Constant, t, 10, 0.3) == 0.3);
    try {
        lr_schedule(Schedule::Constant, 10, 10, 0.3);
        FAIL("expected HorizonExceeded");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::HorizonExceeded);
    }
}

TEST_CASE("fw_update examples") {
    const Tensor theta = Tensor::vector({1, 1}), v = Tensor::vector({-2, 0});
    CHECK(fw_update(theta, v, 0.5) == Tensor::vector({-0.5, 0.5}));
    CHECK(fw_update(theta, v, 0.0) == theta);
    CHECK(fw_update(theta, v, 1.0) == v);
}

TEST_CASE("sfw_step logs components consistent with the applied rate") {
    OptimizerState state;
    state.settings.eta0 = 0.5;
    state.settings.schedule = Schedule::Constant;
    state.settings.momentum = 0.0;
    state.settings.horizon = 10;
    const auto ball = FeasibleRegion::l2_ball({2}, 1.0);
    const Tensor theta = Tensor::vector({0.0, 0.5}), g = Tensor::vector({0.0, 1.0});
    const auto r = sfw_step(state, 0, theta, ball, g);
    CHECK(r.grad_norm == 1.0);
    CHECK(r.dir_norm == 1.5);
    CHECK(r.eff_lr == doctest::Approx(0.5 / 1.5).epsilon(1e-15));
    CHECK(max_abs_diff(r.theta, fw_update(theta, Tensor::vector({0, -1}), r.eff_lr)) < 1e-15);

    // Already at the vertex: the step is skipped in gradient mode.
    const auto skip = sfw_step(state, 0, Tensor::vector({0, -1}), ball, g);
    CHECK(skip.skipped);
    CHECK(skip.theta == Tensor::vector({0, -1}));
}

TEST_CASE("sfw iterates approach a fixed vertex geometrically") {
    OptimizerState state;
    state.settings.rescale = RescaleMode::None;
    state.settings.schedule = Schedule::Constant;
    state.settings.eta0 = 0.2;
    state.settings.horizon = 100;
    const auto region = FeasibleRegion::k_support({5}, 2, 1.0);
    const Tensor g = Tensor::vector({1, -3, 0.5, 2, 0});
    const Tensor v = lmo(region, g);
    Tensor theta({5});
    double dist = norm2(theta - v);
    for (int t = 0; t < 20; ++t) {
        theta = sfw_step(state, 0, theta, region, g).theta;
        ++state.t;
        const double next = norm2(theta - v);
        CHECK(next == doctest::Approx(0.8 * dist).epsilon(1e-9));
        dist = next;
    }
}

TEST_CASE("sfw steps keep every region feasible") {
    RngStream rng(10, RngPurpose::Data);
    const GroupPartition groups = contiguous_groups(4, 3);
    const std::vector<FeasibleRegion> regions{
        FeasibleRegion::l2_ball({12}, 0.7), FeasibleRegion::k_sparse_polytope({12}, 3, 0.7),
        FeasibleRegion::k_support({12}, 3, 0.7), FeasibleRegion::group_k_support({12}, groups, 2, 0.7),
        FeasibleRegion::spectral_k_support({3, 4}, 2, 0.7)};
    for (const auto &region : regions) {
        for (auto mode : {RescaleMode::Gradient, RescaleMode::None, RescaleMode::Diameter}) {
            OptimizerState state;
            state.settings.rescale = mode;
            state.settings.eta0 = 0.9;
            state.settings.horizon = 500;
            Tensor theta = ensure_feasible(region, random_tensor(region.shape(), rng));
            std::size_t violations = 0;
            for (; state.t < 500; ++state.t) {
                theta = sfw_step(state, 0, theta, region, random_tensor(region.shape(), rng)).theta;
                violations += gauge(region, theta) > region.tau() * (1.0 + 1e-9);
            }
            CHECK(violations == 0);
        }
    }
}

TEST_CASE("sgd_step examples") {
    CHECK(sgd_step(Tensor::vector({1}), Tensor::vector({0}), 0.1, 0.5) == Tensor::vector({0.95}));
    CHECK(max_abs_diff(sgd_step(Tensor::vector({3}), Tensor::vector({2}), 0.1, 0.0), Tensor::vector({2.8})) < 1e-15);
    CHECK(sgd_step(Tensor::vector({3, 1}), Tensor::vector({2, 1}), 0.0, 0.3) == Tensor::vector({3, 1}));
    Tensor buf;
    Tensor theta = Tensor::vector({1});
    theta = sgd_step(theta, Tensor::vector({1}), 0.1, 0.0, buf, 0.9, 0);
    CHECK(buf == Tensor::vector({1}));
    theta = sgd_step(theta, Tensor::vector({1}), 0.1, 0.0, buf, 0.9, 1);
    CHECK(buf[0] == doctest::Approx(1.9).epsilon(1e-15));
    CHECK(theta[0] == doctest::Approx(1.0 - 0.1 - 0.19).epsilon(1e-15));
}

TEST_CASE("group_penalty_grad examples") {
    const Tensor g = group_penalty_grad(Tensor::vector({3, 4, 0, 0}), {{0, 1}, {2, 3}}, 0.1);
    CHECK(max_abs_diff(g, Tensor::vector({0.06, 0.08, 0, 0})) < 1e-15);
    CHECK(group_penalty_grad(Tensor::vector({3, 4}), {{0, 1}}, 0.0) == Tensor({2}));
    CHECK_THROWS_AS(group_penalty_grad(Tensor::vector({3, 4}), {{0}}, 0.1), Error);
}

TEST_CASE("nuclear_subgradient examples and dual pairing") {
    CHECK(max_abs_diff(nuclear_subgradient(Tensor::diag(std::vector<double>{3, 1}), 0.1), 0.1 * Tensor::identity(2)) <
          1e-12);
    CHECK(nuclear_subgradient(Tensor({2, 2}), 0.1) == Tensor({2, 2}));
    CHECK(max_abs_diff(nuclear_subgradient(2.0 * Tensor::identity(2), 0.5), 0.5 * Tensor::identity(2)) < 1e-12);
    RngStream rng(11, RngPurpose::Data);
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor a = random_tensor({5, 7}, rng);
        CHECK(dot(nuclear_subgradient(a, 0.3), a) == doctest::Approx(0.3 * nuclear_norm(a)).epsilon(1e-9));
    }
}

TEST_CASE("svt examples and prox optimality") {
    const Tensor d = Tensor::diag(std::vector<double>{3, 1});
    CHECK(max_abs_diff(svt(d, 1.5), Tensor::diag(std::vector<double>{1.5, 0})) < 1e-12);
    CHECK(max_abs_diff(svt(d, 0.0), d) < 1e-9);
    CHECK(max_abs_diff(svt(d, 5.0), Tensor({2, 2})) < 1e-15);

    RngStream rng(12, RngPurpose::Data);
    const Tensor a = random_tensor({4, 6}, rng);
    const double tau = 0.8;
    auto objective = [&](const Tensor &x) {
        const double r = frobenius(x - a);
        return 0.5 * r * r + tau * nuclear_norm(x);
    };
    const Tensor x = svt(a, tau);
    const double best = objective(x);
    for (int s = 0; s < 100; ++s)
        CHECK(objective(x + random_tensor({4, 6}, rng, 0.05)) >= best - 1e-9);
}

TEST_CASE("proxgd_step composes sgd and svt") {
    RngStream rng(13, RngPurpose::Data);
    for (int trial = 0; trial < 3; ++trial) {
        const Tensor theta = random_tensor({3, 4}, rng), g = random_tensor({3, 4}, rng);
        const Tensor expect = svt(sgd_step(theta, g, 0.1, 0.01), 0.1 * 0.5);
        CHECK(max_abs_diff(proxgd_step(theta, g, 0.1, 0.01, 0.5), expect) == 0.0);
    }
}

TEST_CASE("fw_gap examples") {
    const auto ball = FeasibleRegion::l2_ball({2}, 1.0);
    CHECK(fw_gap(Tensor::vector({0.3, 0.2}), Tensor({2}), ball) == 0.0);
    CHECK(fw_gap(Tensor::vector({1, 0}), Tensor::vector({1, 0}), ball) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(fw_gap(Tensor::vector({-1, 0}), Tensor::vector({1, 0}), ball) == 0.0);
    try {
        fw_gap(Tensor::vector({2, 0}), Tensor::vector({1, 0}), ball);
        FAIL("expected InfeasiblePoint");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::InfeasiblePoint);
    }
}

TEST_CASE("theorem schedule and bound") {
    ConvergenceExperimentSpec spec;
    spec.horizon = 100;
    auto s = theorem_schedule(spec);
    CHECK(s.eta == doctest::Approx(1.0 / std::sqrt(200.0)).epsilon(1e-15));
    CHECK(s.batch == 100);
    CHECK(s.eta * spec.lipschitz <= 1.0 / std::sqrt(2.0 * 100.0) + 1e-15);
    const double b100 = theorem_bound(spec);
    CHECK(b100 == doctest::Approx(0.27678).epsilon(1e-4));
    spec.horizon = 400;
    CHECK(theorem_schedule(spec).eta == doctest::Approx(0.035355).epsilon(1e-5));
    CHECK(theorem_bound(spec) == doctest::Approx(b100 / 2.0).epsilon(1e-15));
    spec.beta = 1.0;
    try {
        theorem_schedule(spec);
        FAIL("expected InvalidBeta");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::InvalidBeta);
    }
}
