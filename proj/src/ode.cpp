#include "hoekf/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hoekf {

namespace {

// Dormand-Prince 4(5) tableau, FSAL form.
constexpr double C2 = 1.0 / 5.0, C3 = 3.0 / 10.0, C4 = 4.0 / 5.0, C5 = 8.0 / 9.0;
constexpr double A21 = 1.0 / 5.0;
constexpr double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0;
constexpr double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0;
constexpr double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0, A53 = 64448.0 / 6561.0,
                 A54 = -212.0 / 729.0;
constexpr double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0,
                 A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0;
constexpr double A71 = 35.0 / 384.0, A73 = 500.0 / 1113.0, A74 = 125.0 / 192.0,
                 A75 = -2187.0 / 6784.0, A76 = 11.0 / 84.0;
// embedded error weights (difference of the 5th and 4th order solutions)
constexpr double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0,
                 E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0;
// dense-output weights
constexpr double D1 = -12715105075.0 / 11282082432.0, D3 = 87487479700.0 / 32700410799.0,
                 D4 = -10690763975.0 / 1880347072.0, D5 = 701980252875.0 / 199316789632.0,
                 D6 = -1453857185.0 / 822651844.0, D7 = 69997945.0 / 29380423.0;

constexpr double SAFE = 0.9, BETA = 0.04;
constexpr double EXPO1 = 0.2 - BETA * 0.75;
constexpr double FAC_MIN = 0.2, FAC_MAX = 10.0;

void dense_eval(double theta, std::span<const double> r1, std::span<const double> r2,
                std::span<const double> r3, std::span<const double> r4,
                std::span<const double> r5, std::span<double> out) {
    const double t1m = 1.0 - theta;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = r1[i] + theta * (r2[i] + t1m * (r3[i] + theta * (r4[i] + t1m * r5[i])));
    }
}

struct Workspace {
    std::vector<double> y, ynew, ytmp, err;
    std::vector<double> k1, k2, k3, k4, k5, k6, k7;
    std::array<std::vector<double>, 5> rcont;
    void resize(std::size_t n) {
        for (auto* v : {&y, &ynew, &ytmp, &err, &k1, &k2, &k3, &k4, &k5, &k6, &k7}) v->assign(n, 0.0);
        for (auto& r : rcont) r.assign(n, 0.0);
    }
};

double error_norm(const Workspace& w, double atol, double rtol) {
    double acc = 0.0;
    const std::size_t n = w.y.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double sk = atol + rtol * std::max(std::abs(w.y[i]), std::abs(w.ynew[i]));
        const double e = w.err[i] / sk;
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(n));
}

// Standard automatic initial step selection.
double initial_step_guess(const OdeRhs& rhs, double t0, double span, const Workspace& w0,
                          std::span<const double> f0, double atol, double rtol) {
    const std::size_t n = w0.y.size();
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sk = atol + rtol * std::abs(w0.y[i]);
        d0 += (w0.y[i] / sk) * (w0.y[i] / sk);
        d1 += (f0[i] / sk) * (f0[i] / sk);
    }
    d0 = std::sqrt(d0 / static_cast<double>(n));
    d1 = std::sqrt(d1 / static_cast<double>(n));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);

    std::vector<double> y1(n), f1(n);
    for (std::size_t i = 0; i < n; ++i) y1[i] = w0.y[i] + h0 * f0[i];
    if (!rhs(t0 + h0, y1, f1)) return std::min(1e-6 * span, h0);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sk = atol + rtol * std::abs(w0.y[i]);
        const double df = (f1[i] - f0[i]) / sk;
        d2 += df * df;
    }
    d2 = std::sqrt(d2 / static_cast<double>(n)) / h0;
    double h1;
    if (std::max(d1, d2) <= 1e-15) {
        h1 = std::max(1e-6, h0 * 1e-3);
    } else {
        h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
    }
    return std::min({100.0 * h0, h1, span});
}

struct DriveResult {
    OdeStatus status = OdeStatus::completed;
    std::optional<OdeBreakdown> breakdown;
};

template <class Sink>
DriveResult rk45_drive(const OdeRhs& rhs, std::span<const double> v0, double t0, double t1,
                       const IntegratorConfig& cfg, Sink&& sink) {
    if (!(t1 > t0)) throw std::invalid_argument("rk45: need t1 > t0");
    const std::size_t n = v0.size();
    const double span = t1 - t0;
    const double hmin = cfg.min_step > 0.0 ? cfg.min_step : 1e-12 * span;

    Workspace w;
    w.resize(n);
    std::copy(v0.begin(), v0.end(), w.y.begin());

    double t = t0;
    if (!rhs(t, w.y, w.k1)) {
        return {OdeStatus::breakdown, OdeBreakdown{t, "right-hand side undefined at initial state"}};
    }
    double h = cfg.initial_step > 0.0 ? cfg.initial_step
                                      : initial_step_guess(rhs, t0, span, w, w.k1, cfg.atol, cfg.rtol);
    h = std::min(h, span);

    double facold = 1e-4;
    std::string stage_fail_reason;
    long steps = 0;

    while (t < t1 - 1e-14 * span) {
        if (++steps > cfg.max_steps) {
            return {OdeStatus::breakdown, OdeBreakdown{t, "step budget exhausted"}};
        }
        h = std::min(h, t1 - t);
        if (h < hmin) {
            const std::string why = stage_fail_reason.empty()
                                        ? std::string("step size underflow")
                                        : "step size underflow (" + stage_fail_reason + ")";
            return {OdeStatus::breakdown, OdeBreakdown{t, why}};
        }

        bool stage_ok = true;
        auto stage = [&](double c, std::span<const double> coef,
                         std::initializer_list<const std::vector<double>*> ks,
                         std::vector<double>& kout) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                std::size_t q = 0;
                for (const auto* k : ks) acc += coef[q++] * (*k)[i];
                w.ytmp[i] = w.y[i] + h * acc;
            }
            if (!rhs(t + c * h, w.ytmp, kout)) {
                stage_ok = false;
                stage_fail_reason = "right-hand side breakdown";
            }
        };

        const double c2[] = {A21};
        stage(C2, c2, {&w.k1}, w.k2);
        if (stage_ok) {
            const double c3[] = {A31, A32};
            stage(C3, c3, {&w.k1, &w.k2}, w.k3);
        }
        if (stage_ok) {
            const double c4[] = {A41, A42, A43};
            stage(C4, c4, {&w.k1, &w.k2, &w.k3}, w.k4);
        }
        if (stage_ok) {
            const double c5[] = {A51, A52, A53, A54};
            stage(C5, c5, {&w.k1, &w.k2, &w.k3, &w.k4}, w.k5);
        }
        if (stage_ok) {
            const double c6[] = {A61, A62, A63, A64, A65};
            stage(1.0, c6, {&w.k1, &w.k2, &w.k3, &w.k4, &w.k5}, w.k6);
        }
        if (stage_ok) {
            for (std::size_t i = 0; i < n; ++i) {
                w.ynew[i] = w.y[i] + h * (A71 * w.k1[i] + A73 * w.k3[i] + A74 * w.k4[i] +
                                          A75 * w.k5[i] + A76 * w.k6[i]);
            }
            if (!rhs(t + h, w.ynew, w.k7)) {
                stage_ok = false;
                stage_fail_reason = "right-hand side breakdown";
            }
        }

        double err = std::numeric_limits<double>::infinity();
        if (stage_ok) {
            for (std::size_t i = 0; i < n; ++i) {
                w.err[i] = h * (E1 * w.k1[i] + E3 * w.k3[i] + E4 * w.k4[i] + E5 * w.k5[i] +
                                E6 * w.k6[i] + E7 * w.k7[i]);
            }
            err = error_norm(w, cfg.atol, cfg.rtol);
            if (!std::isfinite(err)) {
                stage_ok = false;
                stage_fail_reason = "non-finite state";
            }
        }

        if (!stage_ok) {
            h *= 0.2;
            continue;
        }

        const double fac11 = std::pow(err, EXPO1);
        if (err <= 1.0) {
            // accepted; assemble dense-output coefficients
            for (std::size_t i = 0; i < n; ++i) {
                const double ydiff = w.ynew[i] - w.y[i];
                const double bspl = h * w.k1[i] - ydiff;
                w.rcont[0][i] = w.y[i];
                w.rcont[1][i] = ydiff;
                w.rcont[2][i] = bspl;
                w.rcont[3][i] = ydiff - h * w.k7[i] - bspl;
                w.rcont[4][i] = h * (D1 * w.k1[i] + D3 * w.k3[i] + D4 * w.k4[i] + D5 * w.k5[i] +
                                     D6 * w.k6[i] + D7 * w.k7[i]);
            }
            OdeStepView view;
            view.t0 = t;
            view.t1 = t + h;
            view.y0 = w.y;
            view.y1 = w.ynew;
            view.f0 = w.k1;
            view.f1 = w.k7;
            for (int q = 0; q < 5; ++q) view.rcont[q] = w.rcont[q];
            if (!sink(view)) {
                return {OdeStatus::breakdown, OdeBreakdown{t + h, "halted by step observer"}};
            }

            facold = std::max(err, 1e-4);
            t += h;
            std::swap(w.y, w.ynew);
            std::swap(w.k1, w.k7);  // FSAL
            stage_fail_reason.clear();

            double fac = fac11 / std::pow(facold, BETA);
            fac = std::max(1.0 / FAC_MAX, std::min(1.0 / FAC_MIN, fac / SAFE));
            h = h / fac;
        } else {
            h = h / std::min(1.0 / FAC_MIN, fac11 / SAFE);
        }
    }
    return {OdeStatus::completed, std::nullopt};
}

}  // namespace

void OdeStepView::eval(double t, std::span<double> out) const {
    const double h = t1 - t0;
    const double theta = h > 0.0 ? (t - t0) / h : 0.0;
    dense_eval(theta, rcont[0], rcont[1], rcont[2], rcont[3], rcont[4], out);
}

DenseTrajectory rk45_adaptive(const OdeRhs& rhs, std::span<const double> v0, double t0,
                              double t1, const IntegratorConfig& cfg) {
    DenseTrajectory traj;
    traj.times.push_back(t0);
    traj.states.emplace_back(v0.begin(), v0.end());
    auto sink = [&traj](const OdeStepView& s) {
        traj.times.push_back(s.t1);
        traj.states.emplace_back(s.y1.begin(), s.y1.end());
        std::array<std::vector<double>, 5> rc;
        for (int q = 0; q < 5; ++q) rc[q].assign(s.rcont[q].begin(), s.rcont[q].end());
        traj.rcont.push_back(std::move(rc));
        return true;
    };
    const DriveResult r = rk45_drive(rhs, v0, t0, t1, cfg, sink);
    traj.status = r.status;
    traj.breakdown = r.breakdown;
    return traj;
}

OdeStatus rk45_observe(const OdeRhs& rhs, std::span<const double> v0, double t0, double t1,
                       const IntegratorConfig& cfg, const OdeStepObserver& observer,
                       std::optional<OdeBreakdown>* breakdown) {
    const DriveResult r = rk45_drive(rhs, v0, t0, t1, cfg, observer);
    if (breakdown) *breakdown = r.breakdown;
    return r.status;
}

void DenseTrajectory::eval(double t, std::span<double> out) const {
    if (times.size() < 2) {
        if (times.size() == 1 && std::abs(t - times[0]) <= 1e-12 * (1.0 + std::abs(times[0]))) {
            std::copy(states[0].begin(), states[0].end(), out.begin());
            return;
        }
        throw std::out_of_range("DenseTrajectory::eval: trajectory has no interval");
    }
    const double span = t_back() - t_front();
    const double slack = 1e-12 * (1.0 + std::abs(span));
    if (t < t_front() - slack || t > t_back() + slack) {
        throw std::out_of_range("DenseTrajectory::eval: time outside covered span");
    }
    const double tc = std::clamp(t, t_front(), t_back());
    auto it = std::upper_bound(times.begin(), times.end(), tc);
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    hi = std::clamp<std::size_t>(hi, 1, times.size() - 1);
    const std::size_t lo = hi - 1;
    const double h = times[hi] - times[lo];
    const double theta = h > 0.0 ? (tc - times[lo]) / h : 0.0;
    const auto& rc = rcont[lo];
    dense_eval(theta, rc[0], rc[1], rc[2], rc[3], rc[4], out);
}

std::vector<double> DenseTrajectory::eval(double t) const {
    std::vector<double> out(static_cast<std::size_t>(dim()));
    eval(t, out);
    return out;
}

FixedGridResult rk4_fixed(const OdeRhs& rhs, std::span<const double> v0,
                          std::span<const double> grid) {
    if (grid.size() < 2) throw std::invalid_argument("rk4_fixed: need at least 2 grid nodes");
    const std::size_t n = v0.size();
    FixedGridResult res;
    res.states.emplace_back(v0.begin(), v0.end());

    std::vector<double> y(v0.begin(), v0.end()), ytmp(n), k1(n), k2(n), k3(n), k4(n);
    for (std::size_t node = 0; node + 1 < grid.size(); ++node) {
        const double t = grid[node];
        const double h = grid[node + 1] - t;
        bool ok = rhs(t, y, k1);
        if (ok) {
            for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + 0.5 * h * k1[i];
            ok = rhs(t + 0.5 * h, ytmp, k2);
        }
        if (ok) {
            for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + 0.5 * h * k2[i];
            ok = rhs(t + 0.5 * h, ytmp, k3);
        }
        if (ok) {
            for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * k3[i];
            ok = rhs(t + h, ytmp, k4);
        }
        if (ok) {
            for (std::size_t i = 0; i < n; ++i) {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                if (!std::isfinite(y[i])) ok = false;
            }
        }
        if (!ok) {
            res.status = OdeStatus::breakdown;
            res.failed_node = static_cast<int>(node + 1);
            res.breakdown = OdeBreakdown{grid[node + 1], "non-finite state or rhs breakdown"};
            return res;
        }
        res.states.emplace_back(y.begin(), y.end());
    }
    return res;
}

}  // namespace hoekf
