#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "hoekf/model.hpp"
#include "hoekf/observer.hpp"
#include "support.hpp"

using namespace hoekf;
using testsupport::PolynomialMap;
using testsupport::Rng;

namespace {

/// Cubic polynomial dynamics and measurements with exact derivative tensors.
struct PolyModel final : SystemModel {
    PolynomialMap fm, hm;
    PolyModel(PolynomialMap f_map, PolynomialMap h_map, Tensor g)
        : SystemModel(f_map.n, g.dim(2), h_map.m, g, 3, 3),
          fm(std::move(f_map)),
          hm(std::move(h_map)) {}

    using SystemModel::f;
    using SystemModel::h;
    void f(std::span<const double> xi, std::span<double> out) const override {
        const auto v = fm.eval(xi);
        std::copy(v.begin(), v.end(), out.begin());
    }
    Tensor df(std::span<const double> xi, int order) const override { return fm.deriv(xi, order); }
    void h(std::span<const double> xi, std::span<double> out) const override {
        const auto v = hm.eval(xi);
        std::copy(v.begin(), v.end(), out.begin());
    }
    Tensor dh(std::span<const double> xi, int order) const override { return hm.deriv(xi, order); }
};

PolyModel random_poly_model(Rng& rng, int n, int p) {
    return PolyModel(PolynomialMap::random(rng, n, n), PolynomialMap::random(rng, n, p),
                     testsupport::random_tensor(rng, {n, 1}));
}

Signal constant_signal(std::vector<double> value, double T) {
    const int p = static_cast<int>(value.size());
    std::vector<double> grid = {0.0, T};
    std::vector<double> vals(value);
    vals.insert(vals.end(), value.begin(), value.end());
    std::vector<double> ders(2 * static_cast<std::size_t>(p), 0.0);
    return Signal(std::move(grid), std::move(vals), std::move(ders), p);
}

ObserverState random_observer_state(Rng& rng, int n, int k) {
    ObserverState s;
    s.x = testsupport::random_point(rng, n, -0.5, 0.5);
    s.P.push_back(testsupport::random_spd(rng, n, 0.5));
    for (int j = 3; j <= k; ++j) s.P.push_back(testsupport::random_symmetric_cube(rng, j, n));
    return s;
}

struct DuffingFixture {
    DuffingModel model = duffing_model(-1.0, 1.0, 0.3);
    Weights weights;
    TruthResult truth;

    explicit DuffingFixture(double q, double beta = 1.0, double T = 10.0)
        : model(duffing_model(-1.0, beta, 0.3)),
          weights(Tensor::identity(2), Tensor::identity(1), Tensor({1, 1}, {q})),
          truth(simulate_truth(model, disturbances(), T, 10001)) {}

    static DisturbanceSpec disturbances() {
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
};

}  // namespace

TEST_CASE("initial_state: quadratic penalty initialization") {
    const std::vector<double> x0 = {0.4, -0.2};
    const ObserverState s2 = initial_state(2, x0, Tensor::identity(2));
    CHECK(s2.x == x0);
    CHECK(norm_max(s2.Pj(2) - Tensor::identity(2)) == 0.0);

    const ObserverState s5 = initial_state(5, x0, Tensor::identity(2));
    for (int j = 3; j <= 5; ++j) {
        CHECK(s5.Pj(j).order() == j);
        CHECK(norm_max(s5.Pj(j)) == 0.0);
    }
    CHECK(flat_dim(2, 8) == 510);
    CHECK(flat_dim(12, 5) == 271452);

    CHECK_THROWS_AS(initial_state(2, x0, Tensor::matrix_rows({{1.0, 0.0}, {0.0, -1.0}})),
                    NotPositiveDefinite);
}

TEST_CASE("flatten и unflatten round trip exactly") {
    Rng rng(41);
    const ObserverState s = random_observer_state(rng, 3, 4);
    const auto v = flatten(s);
    CHECK(v.size() == flat_dim(3, 4));
    const ObserverState r = unflatten(v, 3, 4);
    CHECK(r.x == s.x);
    for (int j = 2; j <= 4; ++j) CHECK(norm_max(r.Pj(j) - s.Pj(j)) == 0.0);
    CHECK_THROWS_AS(unflatten(std::span(v).first(v.size() - 1), 3, 4), std::invalid_argument);
}

TEST_CASE("compute_R: linear model gives -C^T Q C at order 2 and zero above") {
    const DuffingModel duf = duffing_model(-1.0, 0.0, 0.3);
    const LinearModel lin = linear_model(duf.A(), duf.C(), duf.G());
    const Weights w(Tensor::identity(2), Tensor::identity(1), Tensor({1, 1}, {2.0}));
    Rng rng(42);
    const ObserverState s = random_observer_state(rng, 2, 4);
    const std::vector<double> y = {0.7};

    const Tensor r2 = compute_R(2, s, lin, y, w);
    const Tensor expected = -1.0 * matmul(transpose(duf.C()), matmul(w.Q, duf.C()));
    CHECK(norm_max(r2 - expected) < 1e-14);

    CHECK(norm_max(compute_R(3, s, lin, y, w)) == 0.0);
}

TEST_CASE("compute_R: cubic-term source matches a brute-force loop") {
    const DuffingModel model = duffing_model(-1.0, 1.0, 0.3);
    const Weights w = Weights::identities(2, 1, 1);
    ObserverState s;
    s.x = {1.0, 0.0};
    Rng rng(43);
    s.P.push_back(testsupport::random_spd(rng, 2, 0.3));
    s.P.push_back(Tensor::cube(3, 2));  // P3 = 0
    const std::vector<double> y = {0.9};

    const Tensor r3 = compute_R(3, s, model, y, w);

    // direct evaluation: R3 = Sym_{1,2}(P2 *_{1,1} d2f), everything else empty;
    // the (1,2)-shuffles are (1,2,3), (2,1,3), (3,1,2)
    const Tensor d2f = model.df(s.x, 2);
    Tensor brute = Tensor::cube(3, 2);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                double acc = 0.0;
                for (int q = 0; q < 2; ++q) {
                    acc += s.Pj(2)(q, a) * d2f(q, b, c) +  // identity
                           s.Pj(2)(q, b) * d2f(q, a, c) +  // (2,1,3)
                           s.Pj(2)(q, c) * d2f(q, a, b);   // (3,1,2)
                }
                brute(a, b, c) = acc;
            }
    CHECK(norm_max(r3 - brute) < 1e-13);
}

TEST_CASE("hoekf_rhs: zero innovation reduces the estimate drift to f") {
    const DuffingModel model = duffing_model(-1.0, 1.0, 0.3);
    const Weights w = Weights::identities(2, 1, 1);
    Rng rng(44);
    ObserverState s = random_observer_state(rng, 2, 3);
    const auto hx = model.h(s.x);
    const Signal y = constant_signal(hx, 1.0);

    ObserverState ds;
    REQUIRE(hoekf_rhs(0.5, s, model, w, y, ds));
    const auto fx = model.f(s.x);
    CHECK(ds.x[0] == doctest::Approx(fx[0]).epsilon(1e-14));
    CHECK(ds.x[1] == doctest::Approx(fx[1]).epsilon(1e-14));
}

TEST_CASE("hoekf_rhs: gain matches the matrix-algebra evaluation") {
    Rng rng(45);
    const PolyModel model = random_poly_model(rng, 3, 2);
    const Weights w(testsupport::random_spd(rng, 3, 1.0), testsupport::random_spd(rng, 1, 1.0),
                    testsupport::random_spd(rng, 2, 1.0));
    const ObserverState s = random_observer_state(rng, 3, 2);
    const std::vector<double> yv = {0.3, -0.8};
    const Signal y = constant_signal(yv, 1.0);

    ObserverState ds;
    REQUIRE(hoekf_rhs(0.0, s, model, w, y, ds));

    // matrix algebra: gain = P2^{-1} Jh^T Q (y - h)
    const auto hx = model.h(s.x);
    const Tensor jh = model.dh(s.x, 1);
    Tensor resid({2});
    for (int i = 0; i < 2; ++i) resid(i) = yv[static_cast<std::size_t>(i)] - hx[static_cast<std::size_t>(i)];
    const Tensor b = matvec(transpose(jh), matvec(w.Q, resid));
    const Tensor gain = spd_solve(s.Pj(2), b);
    const auto fx = model.f(s.x);
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(ds.x[static_cast<std::size_t>(i)] - fx[static_cast<std::size_t>(i)] -
                       gain(i)) < 1e-13);
    }
}

TEST_CASE("hoekf_rhs: order-2 equation matches the direct Riccati assembly") {
    Rng rng(46);
    const PolyModel model = random_poly_model(rng, 2, 2);
    const Weights w(testsupport::random_spd(rng, 2, 1.0), testsupport::random_spd(rng, 1, 1.0),
                    testsupport::random_spd(rng, 2, 1.0));
    const ObserverState s = random_observer_state(rng, 2, 2);
    const std::vector<double> yv = {0.2, 0.4};
    const Signal y = constant_signal(yv, 1.0);

    HoekfOptions opt;
    opt.project_symmetric = false;
    ObserverState ds;
    REQUIRE(hoekf_rhs(0.0, s, model, w, y, ds, opt));

    const Tensor jf = model.df(s.x, 1);
    const Tensor jh = model.dh(s.x, 1);
    const Tensor rinv = spd_inverse(w.Rw);
    const Tensor grg = matmul(model.G(), matmul(rinv, transpose(model.G())));
    const auto hx = model.h(s.x);
    Tensor resid({2});
    for (int i = 0; i < 2; ++i) resid(i) = yv[static_cast<std::size_t>(i)] - hx[static_cast<std::size_t>(i)];
    const Tensor iota = matvec(w.Q, resid);

    Tensor expected = -1.0 * matmul(transpose(jf), s.Pj(2));
    expected -= matmul(s.Pj(2), jf);
    expected -= matmul(s.Pj(2), matmul(grg, s.Pj(2)));
    expected += matmul(transpose(jh), matmul(w.Q, jh));
    expected -= contract(model.dh(s.x, 2), 1, iota, 1);
    CHECK(norm_max(ds.Pj(2) - expected) <= 1e-12 * (1.0 + norm_max(expected)));
}

TEST_CASE("hoekf_rhs: transport coupling sign agrees with the Hessian evolution") {
    Rng rng(47);
    for (int rep = 0; rep < 10; ++rep) {
        const PolyModel model = random_poly_model(rng, 2, 2);
        const Weights w(testsupport::random_spd(rng, 2, 1.0), testsupport::random_spd(rng, 1, 1.0),
                        testsupport::random_spd(rng, 2, 1.0));
        const ObserverState s = random_observer_state(rng, 2, 3);
        const std::vector<double> yv = testsupport::random_point(rng, 2, -1.0, 1.0);
        const Signal y = constant_signal(yv, 1.0);

        HoekfOptions opt;
        opt.project_symmetric = false;
        ObserverState ds;
        REQUIRE(hoekf_rhs(0.0, s, model, w, y, ds, opt));

        // independent route: Hessian evolution along the estimate with
        // Pi = P2 and the third derivative entering through the gain
        const Tensor jf = model.df(s.x, 1);
        const Tensor jh = model.dh(s.x, 1);
        const Tensor rinv = spd_inverse(w.Rw);
        const Tensor grg = matmul(model.G(), matmul(rinv, transpose(model.G())));
        const auto hx = model.h(s.x);
        Tensor resid({2});
        for (int i = 0; i < 2; ++i)
            resid(i) = yv[static_cast<std::size_t>(i)] - hx[static_cast<std::size_t>(i)];
        const Tensor iota = matvec(w.Q, resid);
        const Tensor gain = spd_solve(s.Pj(2), matvec(transpose(jh), iota));

        Tensor expected = -1.0 * matmul(transpose(jf), s.Pj(2));
        expected -= matmul(s.Pj(2), jf);
        expected -= matmul(s.Pj(2), matmul(grg, s.Pj(2)));
        expected += matmul(transpose(jh), matmul(w.Q, jh));
        expected += contract(s.Pj(3), 1, gain, 1);  // positive transport term
        expected -= contract(model.dh(s.x, 2), 1, iota, 1);
        CHECK(norm_max(ds.Pj(2) - expected) <= 1e-12 * (1.0 + norm_max(expected)));

        // the comparison toggle flips exactly that term
        HoekfOptions flipped = opt;
        flipped.negate_transport_coupling = true;
        ObserverState ds2;
        REQUIRE(hoekf_rhs(0.0, s, model, w, y, ds2, flipped));
        const Tensor delta = ds.Pj(2) - ds2.Pj(2);
        Tensor twice = contract(s.Pj(3), 1, gain, 1);
        twice *= 2.0;
        CHECK(norm_max(delta - twice) <= 1e-12 * (1.0 + norm_max(twice)));
    }
}

TEST_CASE("hoekf_rhs: the zero manifold of higher tensors is invariant for linear systems") {
    const DuffingModel duf = duffing_model(-1.0, 0.0, 0.3);
    const LinearModel lin = linear_model(duf.A(), duf.C(), duf.G());
    const Weights w = Weights::identities(2, 1, 1);
    Rng rng(48);
    ObserverState s = random_observer_state(rng, 2, 5);
    for (int j = 3; j <= 5; ++j) s.Pj(j) = Tensor::cube(j, 2);  // on the manifold
    const Signal y = constant_signal({0.6}, 1.0);

    ObserverState ds;
    REQUIRE(hoekf_rhs(0.3, s, lin, w, y, ds));
    for (int j = 3; j <= 5; ++j) CHECK(norm_max(ds.Pj(j)) == 0.0);
}

TEST_CASE("hoekf_rhs: components stay symmetric before projection") {
    Rng rng(49);
    for (int rep = 0; rep < 5; ++rep) {
        const PolyModel model = random_poly_model(rng, 2, 2);
        const Weights w(testsupport::random_spd(rng, 2, 1.0), testsupport::random_spd(rng, 1, 1.0),
                        testsupport::random_spd(rng, 2, 1.0));
        const ObserverState s = random_observer_state(rng, 2, 5);
        const Signal y = constant_signal(testsupport::random_point(rng, 2, -1.0, 1.0), 1.0);

        HoekfOptions opt;
        opt.project_symmetric = false;
        ObserverState ds;
        REQUIRE(hoekf_rhs(0.0, s, model, w, y, ds, opt));
        for (int j = 2; j <= 5; ++j) CHECK(is_symmetric(ds.Pj(j), 1e-9));
    }
}

TEST_CASE("linear system: every observer order collapses onto the Kalman filter") {
    const DuffingFixture fx(2.0, /*beta=*/0.0, /*T=*/5.0);
    const DuffingModel& m = fx.model;
    const std::vector<double> x0 = {0.0, 0.0};

    RunOptions opt;
    opt.ode = {1e-8, 1e-10};
    const ObserverTrajectory kf =
        run_kf(m.A(), m.C(), m.G(), fx.weights, fx.truth.measurement, x0, 5.0, opt);
    REQUIRE(kf.status == OdeStatus::completed);

    for (int k : {2, 3, 4}) {
        const ObserverTrajectory hk =
            run_hoekf(k, m, fx.weights, fx.truth.measurement, x0, 5.0, opt);
        REQUIRE(hk.status == OdeStatus::completed);
        double dev = 0.0, ref = 0.0;
        for (int i = 0; i <= 200; ++i) {
            const double t = 5.0 * i / 200.0;
            const auto a = hk.eval_x(t);
            const auto b = kf.eval_x(t);
            dev = std::max(dev, std::hypot(a[0] - b[0], a[1] - b[1]));
            ref = std::max(ref, std::hypot(b[0], b[1]));
        }
        CHECK(dev <= 1e-6 * (1.0 + ref));
        for (int j = 3; j <= k; ++j) {
            CHECK(hk.diag.max_p_norm[static_cast<std::size_t>(j - 2)] == 0.0);
        }
    }
}

TEST_CASE("nonlinear dynamics with linear output: order 2 is the EKF in information form") {
    const DuffingFixture fx(2.0, 1.0, 10.0);
    const std::vector<double> x0 = {0.0, 0.0};
    const double T = 6.0;

    const ObserverTrajectory h2 = run_hoekf(2, fx.model, fx.weights, fx.truth.measurement, x0, T);
    const ObserverTrajectory ek = run_ekf(fx.model, fx.weights, fx.truth.measurement, x0, T);
    REQUIRE(h2.status == OdeStatus::completed);
    REQUIRE(ek.status == OdeStatus::completed);
    REQUIRE(h2.has_full());
    REQUIRE(ek.has_full());

    double xdev = 0.0, prod_dev = 0.0;
    for (int i = 0; i <= 120; ++i) {
        const double t = T * i / 120.0;
        const auto a = h2.eval_x(t);
        const auto b = ek.eval_x(t);
        xdev = std::max(xdev, std::hypot(a[0] - b[0], a[1] - b[1]));
        const Tensor p2 = h2.eval_state(t).Pj(2);
        const Tensor sigma = ek.eval_state(t).Pj(2);
        prod_dev = std::max(prod_dev, norm_max(matmul(p2, sigma) - Tensor::identity(2)));
    }
    CHECK(xdev <= 1e-4);
    CHECK(prod_dev <= 1e-4);
}

TEST_CASE("run_hoekf: snapshots agree with dense full-state evaluation") {
    const DuffingFixture fx(2.0, 1.0, 4.0);
    const std::vector<double> x0 = {0.0, 0.0};
    RunOptions opt;
    opt.snapshot_times = {0.0, 1.0, 2.5, 4.0};
    const ObserverTrajectory tr = run_hoekf(3, fx.model, fx.weights, fx.truth.measurement, x0,
                                             4.0, opt);
    REQUIRE(tr.status == OdeStatus::completed);
    REQUIRE(tr.snapshots.size() == 4);
    REQUIRE(tr.has_full());
    for (const auto& [t, s] : tr.snapshots) {
        const ObserverState ref = tr.eval_state(t);
        CHECK(norm_max(Tensor::vector({s.x.begin(), s.x.end()}) -
                       Tensor::vector({ref.x.begin(), ref.x.end()})) < 1e-12);
        for (int j = 2; j <= 3; ++j) CHECK(norm_max(s.Pj(j) - ref.Pj(j)) < 1e-12);
    }
    // node interpolation is exact at nodes
    for (std::size_t i = 0; i < tr.times.size(); i += 7) {
        const auto x = tr.eval_x(tr.times[i]);
        CHECK(x[0] == tr.x_nodes[2 * i]);
        CHECK(x[1] == tr.x_nodes[2 * i + 1]);
    }
}

TEST_CASE("relative_distance: trivial ratios") {
    const DuffingFixture fx(2.0, 1.0, 3.0);
    const std::vector<double> x0 = {0.1, 0.1};
    const ObserverTrajectory tr = run_hoekf(2, fx.model, fx.weights, fx.truth.measurement, x0, 3.0);
    REQUIRE(tr.status == OdeStatus::completed);

    std::vector<double> grid;
    for (int i = 0; i <= 30; ++i) grid.push_back(0.1 * i);
    const DistanceSeries self = relative_distance(tr, tr, grid);
    REQUIRE(self.t.size() == grid.size());
    for (double d : self.d) CHECK(d == 0.0);

    ObserverTrajectory doubled = tr;
    for (double& v : doubled.x_nodes) v *= 2.0;
    for (double& v : doubled.xdot_nodes) v *= 2.0;
    const DistanceSeries ratio = relative_distance(doubled, tr, grid);
    for (double d : ratio.d) CHECK(d == doctest::Approx(1.0).epsilon(1e-9));
}
