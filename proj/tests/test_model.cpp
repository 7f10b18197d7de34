#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "hoekf/model.hpp"
#include "hoekf/wave.hpp"
#include "support.hpp"

using namespace hoekf;
using testsupport::Rng;

namespace {

// slice of the derivative tensor for one output component (trailing modes)
Tensor output_slice(const Tensor& d, int i) {
    const int first = d.dim(1);
    std::vector<int> dims(d.dims().begin() + 1, d.dims().end());
    Tensor s(dims);
    for (std::size_t lin = 0; lin < s.size(); ++lin) {
        s.values()[lin] = d.values()[static_cast<std::size_t>(i) +
                                     static_cast<std::size_t>(first) * lin];
    }
    return s;
}

// directional derivative of df(. , order-1) vs df(. , order), contracted on
// the trailing mode, at relative error 1e-5
void check_fd_consistency(const SystemModel& model, Rng& rng, int max_order) {
    const int n = model.state_dim();
    for (int rep = 0; rep < 5; ++rep) {
        const auto xi = testsupport::random_point(rng, n, -0.8, 0.8);
        double nx = 0.0;
        for (double v : xi) nx += v * v;
        const double h = 1e-5 * (1.0 + std::sqrt(nx));
        const auto dir = testsupport::random_point(rng, n, -1.0, 1.0);
        const Tensor dirt = Tensor::vector({dir.begin(), dir.end()});

        for (int j = 1; j <= max_order; ++j) {
            std::vector<double> xp(xi), xm(xi);
            for (int q = 0; q < n; ++q) {
                xp[static_cast<std::size_t>(q)] += h * dir[static_cast<std::size_t>(q)];
                xm[static_cast<std::size_t>(q)] -= h * dir[static_cast<std::size_t>(q)];
            }
            Tensor fd;
            if (j == 1) {
                const auto fp = model.f(xp);
                const auto fm = model.f(xm);
                std::vector<double> g(fp.size());
                for (std::size_t q = 0; q < g.size(); ++q) g[q] = (fp[q] - fm[q]) / (2.0 * h);
                fd = Tensor::vector(std::move(g));
            } else {
                Tensor dp = model.df(xp, j - 1);
                const Tensor dm = model.df(xm, j - 1);
                dp -= dm;
                dp *= 1.0 / (2.0 * h);
                fd = std::move(dp);
            }
            const Tensor dj = model.df(xi, j);
            const Tensor contracted = contract(dj, j + 1, dirt, 1);
            const Tensor diff = contracted - fd;
            CHECK(norm_max(diff) <= 1e-5 * (1.0 + norm_max(contracted)));
        }
    }
}

}  // namespace

TEST_CASE("linear model: trivial dynamics and zero higher derivatives") {
    const LinearModel m = linear_model(Tensor::matrix(2, 2), Tensor::identity(2),
                                       Tensor({2, 1}, {0.0, 1.0}));
    const std::vector<double> xi = {0.3, -0.7};
    const auto fx = m.f(xi);
    CHECK(fx[0] == 0.0);
    CHECK(fx[1] == 0.0);
    const auto hx = m.h(xi);
    CHECK(hx[0] == xi[0]);
    CHECK(hx[1] == xi[1]);

    const Tensor d2 = m.df(xi, 2);
    CHECK(d2.dims() == std::vector<int>{2, 2, 2});
    CHECK(norm_max(d2) == 0.0);
}

TEST_CASE("duffing model: linear part matches the stated matrix") {
    const DuffingModel m = duffing_model(-1.0, 1.0, 0.3);
    const Tensor a = m.A();
    CHECK(a(0, 0) == 0.0);
    CHECK(a(0, 1) == 1.0);
    CHECK(a(1, 0) == 1.0);
    CHECK(a(1, 1) == doctest::Approx(-0.3));
}

TEST_CASE("duffing model: derivative tensors of the cubic term") {
    const DuffingModel m = duffing_model(-1.0, 1.0, 0.3);
    const std::vector<double> xi = {1.0, 0.0};
    const Tensor d2 = m.df(xi, 2);
    CHECK(d2(1, 0, 0) == doctest::Approx(-6.0));
    CHECK(d2(0, 0, 0) == 0.0);
    CHECK(d2(1, 1, 0) == 0.0);
    const Tensor d3 = m.df(xi, 3);
    CHECK(d3(1, 0, 0, 0) == doctest::Approx(-6.0));
    CHECK(norm_max(m.df(xi, 4)) == 0.0);

    const std::vector<double> x2 = {2.0, 0.0};
    const auto fx = m.f(x2);
    CHECK(fx[0] == doctest::Approx(0.0));
    CHECK(fx[1] == doctest::Approx(-6.0));
}

TEST_CASE("duffing with beta = 0 coincides with the linear model") {
    const DuffingModel d = duffing_model(-1.0, 0.0, 0.3);
    const LinearModel l = linear_model(d.A(), d.C(), d.G());
    Rng rng(33);
    for (int rep = 0; rep < 100; ++rep) {
        const auto xi = testsupport::random_point(rng, 2, -2.0, 2.0);
        const auto fd = d.f(xi);
        const auto fl = l.f(xi);
        CHECK(fd == fl);
        CHECK(d.h(xi) == l.h(xi));
        for (int j = 1; j <= 3; ++j) {
            CHECK(norm_max(d.df(xi, j) - l.df(xi, j)) == 0.0);
            CHECK(norm_max(d.dh(xi, j) - l.dh(xi, j)) == 0.0);
        }
    }
}

TEST_CASE("packaged models: finite-difference consistency and trailing symmetry") {
    Rng rng(34);
    const DuffingModel duf = duffing_model(-1.0, 1.0, 0.3);
    check_fd_consistency(duf, rng, 4);
    const LinearModel lin = linear_model(duf.A(), duf.C(), duf.G());
    check_fd_consistency(lin, rng, 4);
    const WaveModel wave = wave_model(3, sensor_grid(2), 0.01);
    check_fd_consistency(wave, rng, 4);

    for (const SystemModel* m : {static_cast<const SystemModel*>(&duf),
                                 static_cast<const SystemModel*>(&wave)}) {
        const auto xi = testsupport::random_point(rng, m->state_dim(), -0.5, 0.5);
        for (int j = 2; j <= 3; ++j) {
            const Tensor dj = m->df(xi, j);
            for (int i = 0; i < m->state_dim(); ++i) {
                CHECK(is_symmetric(output_slice(dj, i), 1e-10));
            }
        }
    }
}

TEST_CASE("simulate_truth: constant state without disturbances") {
    const LinearModel m = linear_model(Tensor::matrix(2, 2), Tensor::identity(2),
                                       Tensor({2, 1}, {0.0, 1.0}));
    DisturbanceSpec d = DisturbanceSpec::none(2, 1, 2);
    d.x0 = {1.5, -0.5};
    const auto truth = simulate_truth(m, d, 2.0, 101);
    for (double t : {0.0, 0.37, 1.0, 2.0}) {
        const auto x = truth.state.eval(t);
        CHECK(x[0] == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(x[1] == doctest::Approx(-0.5).epsilon(1e-12));
        const auto y = truth.measurement.eval(t);
        CHECK(y[0] == doctest::Approx(1.5).epsilon(1e-12));
    }
}

TEST_CASE("simulate_truth: disturbed oscillator starts at x0 + eta") {
    const DuffingModel m = duffing_model(-1.0, 1.0, 0.3);
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
    const auto truth = simulate_truth(m, d, 10.0, 10001);
    const auto x0 = truth.state.eval(0.0);
    CHECK(x0[0] == doctest::Approx(-1.216));
    CHECK(x0[1] == doctest::Approx(0.493));

    // interpolation reproduces stored samples exactly
    for (int i : {0, 1, 777, 10000}) {
        const double t = truth.measurement.node_time(i);
        const auto y = truth.measurement.eval(t);
        CHECK(y[0] == truth.measurement.node_value(i)[0]);
    }
    CHECK_THROWS_AS(truth.measurement.eval(10.5), std::out_of_range);
}

TEST_CASE("weights validation") {
    CHECK_THROWS_AS(Weights(Tensor::matrix_rows({{1.0, 0.0}, {0.0, -1.0}}), Tensor::identity(1),
                            Tensor::identity(1)),
                    NotPositiveDefinite);
    CHECK_THROWS_AS(Weights(Tensor::matrix_rows({{1.0, 0.1}, {0.0, 1.0}}), Tensor::identity(1),
                            Tensor::identity(1)),
                    std::invalid_argument);
    const Weights w = Weights::identities(2, 1, 1);
    CHECK(w.Gamma(0, 0) == 1.0);
}

TEST_CASE("wave discretization: sizes, mass matrix, drift skew-symmetry") {
    const WaveModel m = wave_model(4, sensor_grid(4), 0.01);
    const auto& d = m.disc();
    CHECK(d.N == 6);
    CHECK(m.state_dim() == 12);
    CHECK(d.p == 16);
    CHECK(d.index_set.front() == std::pair<int, int>{1, 1});
    for (int a = 0; a < d.N; ++a) {
        CHECK(d.M(a, a) == doctest::Approx(0.25));
        for (int b = 0; b < d.N; ++b) {
            if (a != b) {
                CHECK(d.M(a, b) == 0.0);
                CHECK(d.S(a, b) == 0.0);
            }
        }
    }
    const Tensor skew = d.A + transpose(d.A);
    CHECK(norm_max(skew) == 0.0);

    CHECK_THROWS_AS(wave_model(4, {{0.005, 0.5}}, 0.01), std::invalid_argument);
}

namespace {

// 64-node Gauss-Legendre rule on [0, 1]
void gauss_legendre_01(std::vector<double>& nodes, std::vector<double>& weights) {
    const int n = 64;
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
}

double quad_sine_integral_gl(int a, int b, int c, int d) {
    static std::vector<double> nodes, weights;
    if (nodes.empty()) gauss_legendre_01(nodes, weights);
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double x = nodes[i];
        acc += weights[i] * std::sin(std::numbers::pi * a * x) * std::sin(std::numbers::pi * b * x) *
               std::sin(std::numbers::pi * c * x) * std::sin(std::numbers::pi * d * x);
    }
    return acc;
}

}  // namespace

TEST_CASE("wave discretization: quadruple products match quadrature") {
    CHECK(quad_sine_integral(1, 1, 1, 1) == doctest::Approx(3.0 / 8.0));

    const WaveModel m = wave_model(4, sensor_grid(4), 0.01);
    const auto& d = m.disc();
    // the entry with all indices on the lowest basis function is (3/8)^2
    CHECK(d.T4(0, 0, 0, 0) == doctest::Approx(9.0 / 64.0));
    CHECK(is_symmetric(d.T4, 1e-12));

    for (int a = 1; a <= 4; ++a)
        for (int b = 1; b <= 4; ++b)
            for (int c = 1; c <= 4; ++c)
                for (int e = 1; e <= 4; ++e) {
                    CHECK(quad_sine_integral(a, b, c, e) ==
                          doctest::Approx(quad_sine_integral_gl(a, b, c, e)).epsilon(1e-10));
                }

    double worst = 0.0;
    for (int a = 0; a < d.N; ++a)
        for (int b = 0; b < d.N; ++b)
            for (int c = 0; c < d.N; ++c)
                for (int e = 0; e < d.N; ++e) {
                    const auto [a1, a2] = d.index_set[static_cast<std::size_t>(a)];
                    const auto [b1, b2] = d.index_set[static_cast<std::size_t>(b)];
                    const auto [c1, c2] = d.index_set[static_cast<std::size_t>(c)];
                    const auto [e1, e2] = d.index_set[static_cast<std::size_t>(e)];
                    const double oracle = quad_sine_integral_gl(a1, b1, c1, e1) *
                                          quad_sine_integral_gl(a2, b2, c2, e2);
                    worst = std::max(worst, std::abs(d.T4(a, b, c, e) - oracle));
                }
    CHECK(worst <= 1e-10);
}

TEST_CASE("wave discretization: linear part preserves the state norm") {
    const WaveModel m = wave_model(4, sensor_grid(4), 0.01);
    const auto& d = m.disc();
    const LinearModel lin = linear_model(d.A, d.C, d.B);
    DisturbanceSpec dist = DisturbanceSpec::none(12, 6, 16);
    dist.x0 = {1.0, 0.5, 0.0, -0.3, 0.2, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.4};
    const auto truth = simulate_truth(lin, dist, 2.0, 401);
    double n0 = 0.0;
    for (double v : truth.state.eval(0.0)) n0 += v * v;
    for (double t : {0.5, 1.0, 1.5, 2.0}) {
        double nt = 0.0;
        for (double v : truth.state.eval(t)) nt += v * v;
        CHECK(std::abs(std::sqrt(nt) - std::sqrt(n0)) <= 1e-6);
    }
}
