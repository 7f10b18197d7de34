#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "hoekf/model.hpp"
#include "hoekf/observer.hpp"
#include "hoekf/oracle.hpp"
#include "support.hpp"

using namespace hoekf;
using testsupport::Rng;

namespace {

DisturbanceSpec duffing_disturbances() {
    DisturbanceSpec d;
    d.x0 = {0.0, 0.0};
    d.eta = {-1.216, 0.493};
    d.v = [](double t, std::span<double> out) { out[0] = 0.5 * std::cos(1.2 * t); };
    d.mu = [](double t, std::span<double> out) {
        out[0] = std::sin(2.0 * std::numbers::pi * t) / 20.0;
    };
    d.mu_dot = [](double t, std::span<double> out) {
        out[0] = std::cos(2.0 * std::numbers::pi * t) * std::numbers::pi / 10.0;
    };
    return d;
}

struct OracleFixture {
    DuffingModel model;
    Weights weights;
    TruthResult truth;
    MortensenOracle oracle;

    explicit OracleFixture(double q, double beta = 1.0)
        : model(duffing_model(-1.0, beta, 0.3)),
          weights(Tensor::identity(2), Tensor::identity(1), Tensor({1, 1}, {q})),
          truth(simulate_truth(model, duffing_disturbances(), 10.0, 10001)),
          oracle(model, weights, truth.measurement, {0.0, 0.0}) {}
};

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("value at t = 0 is the exact initial penalty") {
    const OracleFixture fx(2.0);
    Rng rng(55);
    for (int rep = 0; rep < 5; ++rep) {
        const auto xi = testsupport::random_point(rng, 2, -2.0, 2.0);
        const OpenLoopSolution sol = fx.oracle.solve_open_loop(0.0, xi);
        CHECK(sol.converged);
        CHECK(sol.iterations == 0);
        const double expect = 0.5 * (xi[0] * xi[0] + xi[1] * xi[1]);
        CHECK(sol.value == doctest::Approx(expect).epsilon(1e-14));
        const auto g = fx.oracle.value_grad(0.0, xi);
        CHECK(g[0] == doctest::Approx(xi[0]).epsilon(1e-14));
        CHECK(g[1] == doctest::Approx(xi[1]).epsilon(1e-14));
    }
}

TEST_CASE("open-loop solution satisfies its terminal constraint and cost definition") {
    const OracleFixture fx(2.0);
    const std::vector<double> xi = {-0.9, 0.4};
    const OpenLoopSolution sol = fx.oracle.solve_open_loop(0.7, xi);
    REQUIRE(sol.converged);
    const auto xT = sol.state_at(sol.grid_points - 1, 2);
    CHECK(xT[0] == xi[0]);
    CHECK(xT[1] == xi[1]);
    CHECK(sol.value > 0.0);
    CHECK(sol.grad_norm <= 1e-4);
}

TEST_CASE("value gradient agrees with finite differences of the value") {
    const OracleFixture fx(2.0);
    Rng rng(56);
    for (int rep = 0; rep < 4; ++rep) {
        const auto base = testsupport::random_point(rng, 2, -0.8, 0.8);
        const auto g = fx.oracle.value_grad(0.5, base);
        const double delta = 1e-4 * (1.0 + norm2(base));
        std::vector<double> fd(2);
        for (int i = 0; i < 2; ++i) {
            auto xp = base, xm = base;
            xp[static_cast<std::size_t>(i)] += delta;
            xm[static_cast<std::size_t>(i)] -= delta;
            const double vp = fx.oracle.solve_open_loop(0.5, xp).value;
            const double vm = fx.oracle.solve_open_loop(0.5, xm).value;
            fd[static_cast<std::size_t>(i)] = (vp - vm) / (2.0 * delta);
        }
        const double err = std::hypot(g[0] - fd[0], g[1] - fd[1]);
        CHECK(err <= 1e-3 * (1.0 + std::hypot(fd[0], fd[1])));
    }
}

TEST_CASE("linear case: Hessian and minimizer reproduce the Kalman filter") {
    const OracleFixture fx(2.0, /*beta=*/0.0);
    const std::vector<double> x0 = {0.0, 0.0};
    RunOptions opt;
    opt.ode = {1e-9, 1e-11};
    const ObserverTrajectory kf = run_kf(fx.model.A(), fx.model.C(), fx.model.G(), fx.weights,
                                         fx.truth.measurement, x0, 1.0, opt);
    REQUIRE(kf.status == OdeStatus::completed);

    const double t = 0.5;
    const auto xk = kf.eval_x(t);
    const Tensor sigma = kf.eval_state(t).Pj(2);
    const Tensor sigma_inv = spd_inverse(sigma);

    std::vector<double> probe = {xk[0] + 0.3, xk[1] - 0.2};
    HessianInfo info;
    const Tensor hess = fx.oracle.value_hessian(t, probe, nullptr, &info);
    CHECK(info.converged);
    CHECK(info.spd);
    CHECK(norm_max(hess - sigma_inv) <= 1e-3 * (1.0 + norm_max(sigma_inv)));

    bool conv = false;
    const auto xmin = fx.oracle.minimize_value(t, probe, &conv);
    CHECK(conv);
    CHECK(std::hypot(xmin[0] - xk[0], xmin[1] - xk[1]) <= 1e-4);

    // value Hessian at t = 0 is the initial weight exactly
    const Tensor h0 = fx.oracle.value_hessian(0.0, probe);
    CHECK(norm_max(h0 - Tensor::identity(2)) <= 1e-12);
}

TEST_CASE("linear case: observer-equation integration follows the Kalman estimate") {
    const OracleFixture fx(2.0, /*beta=*/0.0);
    const std::vector<double> x0 = {0.0, 0.0};
    const ObserverTrajectory kf = run_kf(fx.model.A(), fx.model.C(), fx.model.G(), fx.weights,
                                         fx.truth.measurement, x0, 1.0);
    const ObserverTrajectory mo = fx.oracle.integrate_mortensen(1.0, 101);
    REQUIRE(mo.status == OdeStatus::completed);
    const auto m0 = mo.eval_x(0.0);
    CHECK(m0[0] == 0.0);
    CHECK(m0[1] == 0.0);
    double dev = 0.0;
    for (int i = 0; i <= 20; ++i) {
        const double t = i / 20.0;
        const auto a = mo.eval_x(t);
        const auto b = kf.eval_x(t);
        dev = std::max(dev, std::hypot(a[0] - b[0], a[1] - b[1]));
    }
    CHECK(dev <= 1e-3);
}

TEST_CASE("hessian symmetry residual stays small on disturbed instances") {
    const OracleFixture fx(2.0);
    Rng rng(57);
    for (int rep = 0; rep < 3; ++rep) {
        const auto xi = testsupport::random_point(rng, 2, -0.6, 0.6);
        HessianInfo info;
        fx.oracle.value_hessian(0.4, xi, nullptr, &info);
        CHECK(info.converged);
        CHECK(info.asym_residual <= 1e-6);
    }
}

TEST_CASE("minimizer chain: gradient at the minimizer is small, both routes agree") {
    const OracleFixture fx(2.0);
    const std::vector<double> x0 = {0.0, 0.0};
    const ObserverTrajectory h2 =
        run_hoekf(2, fx.model, fx.weights, fx.truth.measurement, x0, 1.2);
    REQUIRE(h2.status == OdeStatus::completed);

    bool conv = false;
    const auto xmin = fx.oracle.minimize_value(1.0, h2.eval_x(1.0), &conv);
    CHECK(conv);
    const auto g = fx.oracle.value_grad(1.0, xmin);
    CHECK(norm2(g) <= 1e-5);

    const ObserverTrajectory mo = fx.oracle.integrate_mortensen(1.0, 101);
    REQUIRE(mo.status == OdeStatus::completed);
    const auto xeq = mo.eval_x(1.0);
    CHECK(std::hypot(xmin[0] - xeq[0], xmin[1] - xeq[1]) <= 1e-2);
}

TEST_CASE("warm starting cuts the iteration count") {
    // horizons long enough that cold solves are genuinely expensive
    const OracleFixture fx(2.0);
    const std::vector<double> x0 = {0.0, 0.0};
    const ObserverTrajectory h2 =
        run_hoekf(2, fx.model, fx.weights, fx.truth.measurement, x0, 3.0);
    REQUIRE(h2.status == OdeStatus::completed);

    std::vector<int> cold, warm;
    OpenLoopSolution prev;
    bool have_prev = false;
    for (int i = 0; i <= 20; ++i) {
        const double t = 2.5 + 0.02 * i;
        const auto xi = h2.eval_x(t);
        const OpenLoopSolution c = fx.oracle.solve_open_loop(t, xi);
        const OpenLoopSolution w = fx.oracle.solve_open_loop(t, xi, have_prev ? &prev : nullptr);
        cold.push_back(c.iterations);
        if (have_prev) warm.push_back(w.iterations);
        prev = w;
        have_prev = true;
    }
    auto median = [](std::vector<int> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    CHECK(median(warm) * 2 <= median(cold));
}

TEST_CASE("value function satisfies the Hamilton-Jacobi-Bellman balance") {
    const OracleFixture fx(2.0);
    const std::vector<double> x0 = {0.0, 0.0};
    const ObserverTrajectory h2 =
        run_hoekf(2, fx.model, fx.weights, fx.truth.measurement, x0, 1.0);
    Rng rng(58);
    for (double t : {0.4, 0.8}) {
        auto xi = h2.eval_x(t);
        xi[0] += testsupport::uniform(rng, -0.1, 0.1);
        xi[1] += testsupport::uniform(rng, -0.1, 0.1);

        const double dt = 1e-3;
        const OpenLoopSolution c0 = fx.oracle.solve_open_loop(t, xi);
        const OpenLoopSolution cp = fx.oracle.solve_open_loop(t + dt, xi, &c0);
        const OpenLoopSolution cm = fx.oracle.solve_open_loop(t - dt, xi, &c0);
        const double dvdt = (cp.value - cm.value) / (2.0 * dt);

        const auto grad = fx.oracle.value_grad(t, xi, &c0);
        const auto fxv = fx.model.f(xi);
        const double drift = grad[0] * fxv[0] + grad[1] * fxv[1];
        const double gp = grad[1];  // G^T grad for G = (0,1)^T
        const double control_term = 0.5 * gp * gp;  // R = 1
        const auto yv = fx.truth.measurement.eval(t);
        const auto hxv = fx.model.h(xi);
        const double fit = 0.5 * 2.0 * (yv[0] - hxv[0]) * (yv[0] - hxv[0]);  // Q = 2

        const double resid = dvdt + drift + control_term - fit;
        const double scale = std::max({std::abs(dvdt), std::abs(drift), std::abs(control_term),
                                       std::abs(fit), 1.0});
        CHECK(std::abs(resid) <= 1e-2 * scale);
    }
}
