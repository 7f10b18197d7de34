#include "hoekf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hoekf {

namespace {

double trapezoid_dot(std::span<const double> a, std::span<const double> b, int nodes, int dim,
                     double h) {
    double acc = 0.0;
    for (int j = 0; j < nodes; ++j) {
        double s = 0.0;
        for (int c = 0; c < dim; ++c) {
            const std::size_t q = static_cast<std::size_t>(j) * static_cast<std::size_t>(dim) +
                                  static_cast<std::size_t>(c);
            s += a[q] * b[q];
        }
        acc += (j == 0 || j == nodes - 1) ? 0.5 * s : s;
    }
    return acc * h;
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

MortensenOracle::MortensenOracle(const SystemModel& model, const Weights& w, const Signal& y,
                                 std::vector<double> x0, GDConfig cfg)
    : model_(model), w_(w), y_(y), x0_(std::move(x0)), cfg_(cfg) {
    if (static_cast<int>(x0_.size()) != model.state_dim()) {
        throw std::invalid_argument("MortensenOracle: x0 dimension mismatch");
    }
    if (cfg_.inner_grid_points < 2) {
        throw std::invalid_argument("MortensenOracle: inner_grid_points >= 2 required");
    }
}

MortensenOracle::Evaluation MortensenOracle::evaluate(double t, std::span<const double> xi,
                                                      std::span<const double> control) const {
    const int n = model_.state_dim();
    const int m = model_.disturbance_dim();
    const int p = model_.output_dim();
    const int N = cfg_.inner_grid_points;
    const double h = t / (N - 1);
    const Tensor& G = model_.G();

    Evaluation ev;
    ev.state.assign(static_cast<std::size_t>(N) * n, 0.0);
    ev.state_dot.assign(static_cast<std::size_t>(N) * n, 0.0);
    ev.adjoint.assign(static_cast<std::size_t>(N) * n, 0.0);
    ev.gradient.assign(static_cast<std::size_t>(N) * m, 0.0);

    auto ctrl = [&](int j) {
        return control.subspan(static_cast<std::size_t>(j) * m, static_cast<std::size_t>(m));
    };
    auto drift = [&](std::span<const double> x, std::span<const double> v, std::span<double> dx) {
        model_.f(x, dx);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int c = 0; c < m; ++c) acc += G(i, c) * v[static_cast<std::size_t>(c)];
            dx[static_cast<std::size_t>(i)] += acc;
        }
    };

    // state sweep, backwards from x(t) = xi
    std::vector<double> x(xi.begin(), xi.end());
    std::vector<double> vmid(static_cast<std::size_t>(m));
    std::vector<double> k1(n), k2(n), k3(n), k4(n), xt(n);
    std::copy(x.begin(), x.end(),
              ev.state.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(N - 1) * n));
    for (int j = N - 1; j > 0; --j) {
        const auto vj = ctrl(j);
        const auto vjm = ctrl(j - 1);
        for (int c = 0; c < m; ++c)
            vmid[static_cast<std::size_t>(c)] = 0.5 * (vj[static_cast<std::size_t>(c)] +
                                                       vjm[static_cast<std::size_t>(c)]);
        const double dt = -h;
        drift(x, vj, k1);
        for (int i = 0; i < n; ++i) xt[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + 0.5 * dt * k1[static_cast<std::size_t>(i)];
        drift(xt, vmid, k2);
        for (int i = 0; i < n; ++i) xt[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + 0.5 * dt * k2[static_cast<std::size_t>(i)];
        drift(xt, vmid, k3);
        for (int i = 0; i < n; ++i) xt[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + dt * k3[static_cast<std::size_t>(i)];
        drift(xt, vjm, k4);
        for (int i = 0; i < n; ++i) {
            x[static_cast<std::size_t>(i)] += dt / 6.0 *
                (k1[static_cast<std::size_t>(i)] + 2.0 * k2[static_cast<std::size_t>(i)] +
                 2.0 * k3[static_cast<std::size_t>(i)] + k4[static_cast<std::size_t>(i)]);
        }
        if (!all_finite(x)) return ev;  // finite = false
        std::copy(x.begin(), x.end(),
                  ev.state.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(j - 1) * n));
    }
    for (int j = 0; j < N; ++j) {
        const auto xj = std::span<const double>(ev.state).subspan(static_cast<std::size_t>(j) * n,
                                                                  static_cast<std::size_t>(n));
        drift(xj, ctrl(j), std::span<double>(ev.state_dot).subspan(static_cast<std::size_t>(j) * n,
                                                                   static_cast<std::size_t>(n)));
    }

    // adjoint sweep, forwards from the initial-penalty gradient
    std::vector<double> pvec(static_cast<std::size_t>(n));
    {
        const auto x0n = std::span<const double>(ev.state).first(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int q = 0; q < n; ++q)
                acc += w_.Gamma(i, q) * (x0n[static_cast<std::size_t>(q)] - x0_[static_cast<std::size_t>(q)]);
            pvec[static_cast<std::size_t>(i)] = acc;
        }
        std::copy(pvec.begin(), pvec.end(), ev.adjoint.begin());
    }
    std::vector<double> hx(static_cast<std::size_t>(p)), yv(static_cast<std::size_t>(p));
    std::vector<double> xmid(static_cast<std::size_t>(n));
    auto adjoint_rhs = [&](double s, std::span<const double> xs, std::span<const double> pv,
                           std::span<double> dp) {
        const Tensor jf = model_.df(xs, 1);
        const Tensor jh = model_.dh(xs, 1);
        model_.h(xs, hx);
        y_.eval(s, yv);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int q = 0; q < n; ++q) acc -= jf(q, i) * pv[static_cast<std::size_t>(q)];
            dp[static_cast<std::size_t>(i)] = acc;
        }
        for (int q = 0; q < p; ++q) {
            double wq = 0.0;
            for (int r = 0; r < p; ++r)
                wq += w_.Q(q, r) * (yv[static_cast<std::size_t>(r)] - hx[static_cast<std::size_t>(r)]);
            for (int i = 0; i < n; ++i) dp[static_cast<std::size_t>(i)] -= jh(q, i) * wq;
        }
    };
    std::vector<double> pk1(n), pk2(n), pk3(n), pk4(n), pt(n);
    for (int j = 0; j + 1 < N; ++j) {
        const double s0 = j * h;
        const auto xj = std::span<const double>(ev.state).subspan(static_cast<std::size_t>(j) * n,
                                                                  static_cast<std::size_t>(n));
        const auto xj1 = std::span<const double>(ev.state).subspan(static_cast<std::size_t>(j + 1) * n,
                                                                   static_cast<std::size_t>(n));
        const auto dj = std::span<const double>(ev.state_dot).subspan(static_cast<std::size_t>(j) * n,
                                                                      static_cast<std::size_t>(n));
        const auto dj1 = std::span<const double>(ev.state_dot).subspan(static_cast<std::size_t>(j + 1) * n,
                                                                       static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            xmid[static_cast<std::size_t>(i)] =
                0.5 * (xj[static_cast<std::size_t>(i)] + xj1[static_cast<std::size_t>(i)]) +
                0.125 * h * (dj[static_cast<std::size_t>(i)] - dj1[static_cast<std::size_t>(i)]);
        }
        adjoint_rhs(s0, xj, pvec, pk1);
        for (int i = 0; i < n; ++i) pt[static_cast<std::size_t>(i)] = pvec[static_cast<std::size_t>(i)] + 0.5 * h * pk1[static_cast<std::size_t>(i)];
        adjoint_rhs(s0 + 0.5 * h, xmid, pt, pk2);
        for (int i = 0; i < n; ++i) pt[static_cast<std::size_t>(i)] = pvec[static_cast<std::size_t>(i)] + 0.5 * h * pk2[static_cast<std::size_t>(i)];
        adjoint_rhs(s0 + 0.5 * h, xmid, pt, pk3);
        for (int i = 0; i < n; ++i) pt[static_cast<std::size_t>(i)] = pvec[static_cast<std::size_t>(i)] + h * pk3[static_cast<std::size_t>(i)];
        adjoint_rhs(s0 + h, xj1, pt, pk4);
        for (int i = 0; i < n; ++i) {
            pvec[static_cast<std::size_t>(i)] += h / 6.0 *
                (pk1[static_cast<std::size_t>(i)] + 2.0 * pk2[static_cast<std::size_t>(i)] +
                 2.0 * pk3[static_cast<std::size_t>(i)] + pk4[static_cast<std::size_t>(i)]);
        }
        if (!all_finite(pvec)) return ev;
        std::copy(pvec.begin(), pvec.end(),
                  ev.adjoint.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(j + 1) * n));
    }

    // reduced gradient R v - G^T p and the attained cost
    for (int j = 0; j < N; ++j) {
        const auto vj = ctrl(j);
        const auto pj = std::span<const double>(ev.adjoint).subspan(static_cast<std::size_t>(j) * n,
                                                                    static_cast<std::size_t>(n));
        for (int c = 0; c < m; ++c) {
            double acc = 0.0;
            for (int r = 0; r < m; ++r) acc += w_.Rw(c, r) * vj[static_cast<std::size_t>(r)];
            for (int i = 0; i < n; ++i) acc -= G(i, c) * pj[static_cast<std::size_t>(i)];
            ev.gradient[static_cast<std::size_t>(j) * m + static_cast<std::size_t>(c)] = acc;
        }
    }

    double cost = 0.0;
    {
        const auto x0n = std::span<const double>(ev.state).first(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            for (int q = 0; q < n; ++q)
                cost += 0.5 * (x0n[static_cast<std::size_t>(i)] - x0_[static_cast<std::size_t>(i)]) *
                        w_.Gamma(i, q) *
                        (x0n[static_cast<std::size_t>(q)] - x0_[static_cast<std::size_t>(q)]);
    }
    std::vector<double> run(static_cast<std::size_t>(N), 0.0);
    for (int j = 0; j < N; ++j) {
        const auto vj = ctrl(j);
        const auto xj = std::span<const double>(ev.state).subspan(static_cast<std::size_t>(j) * n,
                                                                  static_cast<std::size_t>(n));
        model_.h(xj, hx);
        y_.eval(j * h, yv);
        double s = 0.0;
        for (int c = 0; c < m; ++c)
            for (int r = 0; r < m; ++r)
                s += vj[static_cast<std::size_t>(c)] * w_.Rw(c, r) * vj[static_cast<std::size_t>(r)];
        for (int q = 0; q < p; ++q)
            for (int r = 0; r < p; ++r)
                s += (yv[static_cast<std::size_t>(q)] - hx[static_cast<std::size_t>(q)]) * w_.Q(q, r) *
                     (yv[static_cast<std::size_t>(r)] - hx[static_cast<std::size_t>(r)]);
        run[static_cast<std::size_t>(j)] = 0.5 * s;
    }
    cost += trapezoid_dot(run, std::vector<double>(static_cast<std::size_t>(N), 1.0), N, 1, h);

    ev.value = cost;
    ev.grad_norm = std::sqrt(std::max(0.0, trapezoid_dot(ev.gradient, ev.gradient, N, m, h)));
    ev.finite = std::isfinite(ev.value) && std::isfinite(ev.grad_norm);
    return ev;
}

OpenLoopSolution MortensenOracle::solve_with_tol(double t, std::span<const double> xi,
                                                 const OpenLoopSolution* warm_start,
                                                 double rel_tol) const {
    const int n = model_.state_dim();
    const int m = model_.disturbance_dim();
    if (static_cast<int>(xi.size()) != n) {
        throw std::invalid_argument("solve_open_loop: xi dimension mismatch");
    }
    if (t < 0.0 || t > y_.horizon() + 1e-12 * (1.0 + y_.horizon())) {
        throw std::invalid_argument("solve_open_loop: t outside [0, T]");
    }

    OpenLoopSolution sol;
    sol.t = t;
    sol.xi.assign(xi.begin(), xi.end());

    if (t <= 1e-14 * (1.0 + y_.horizon())) {
        // no control interval: the value is the exact initial penalty
        sol.grid_points = 1;
        sol.state.assign(xi.begin(), xi.end());
        sol.control.assign(static_cast<std::size_t>(m), 0.0);
        sol.adjoint.resize(static_cast<std::size_t>(n));
        double v = 0.0;
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int q = 0; q < n; ++q)
                acc += w_.Gamma(i, q) * (xi[static_cast<std::size_t>(q)] - x0_[static_cast<std::size_t>(q)]);
            sol.adjoint[static_cast<std::size_t>(i)] = acc;
            v += 0.5 * acc * (xi[static_cast<std::size_t>(i)] - x0_[static_cast<std::size_t>(i)]);
        }
        sol.value = v;
        sol.converged = true;
        return sol;
    }

    const int N = cfg_.inner_grid_points;
    const double h = t / (N - 1);
    sol.grid_points = N;

    std::vector<double> v(static_cast<std::size_t>(N) * m, 0.0);
    if (warm_start && warm_start->grid_points >= 2 && !warm_start->control.empty()) {
        const int Nw = warm_start->grid_points;
        const double hw = warm_start->t / (Nw - 1);
        for (int j = 0; j < N; ++j) {
            const double s = std::min(j * h, warm_start->t);
            const double pos = s / hw;
            const int lo = std::min(static_cast<int>(pos), Nw - 2);
            const double u = std::clamp(pos - lo, 0.0, 1.0);
            for (int c = 0; c < m; ++c) {
                const double a = warm_start->control[static_cast<std::size_t>(lo) * m + static_cast<std::size_t>(c)];
                const double b = warm_start->control[static_cast<std::size_t>(lo + 1) * m + static_cast<std::size_t>(c)];
                v[static_cast<std::size_t>(j) * m + static_cast<std::size_t>(c)] = (1.0 - u) * a + u * b;
            }
        }
    }

    Evaluation cur = evaluate(t, xi, v);
    if (!cur.finite && warm_start) {  // retry cold
        std::fill(v.begin(), v.end(), 0.0);
        cur = evaluate(t, xi, v);
    }
    if (!cur.finite) {
        sol.value = std::numeric_limits<double>::infinity();
        sol.converged = false;
        return sol;
    }

    const double tol = rel_tol * std::max(1.0, cur.grad_norm);
    std::vector<double> v_best = v;
    Evaluation best = cur;
    std::vector<double> v_prev, g_prev;
    double step = cfg_.first_step;
    int iter = 0;
    bool converged = cur.grad_norm <= tol;

    while (!converged && iter < cfg_.max_iters) {
        ++iter;
        if (!v_prev.empty()) {
            // secant step from the last pair of gradients
            double num = 0.0, den = 0.0;
            for (std::size_t q = 0; q < v.size(); ++q) {
                const double dv = v[q] - v_prev[q];
                const double dg = cur.gradient[q] - g_prev[q];
                num += dv * dv;
                den += dv * dg;
            }
            if (den > 1e-300 && std::isfinite(num / den)) {
                step = std::clamp(num / den, 1e-12, 1e4);
            }
        }
        std::vector<double> v_new(v.size());
        Evaluation nxt;
        double s = step;
        bool ok = false;
        for (int tries = 0; tries < 40; ++tries) {
            for (std::size_t q = 0; q < v.size(); ++q) v_new[q] = v[q] - s * cur.gradient[q];
            nxt = evaluate(t, xi, v_new);
            if (nxt.finite) {
                ok = true;
                break;
            }
            s *= 0.5;
        }
        if (!ok) break;
        v_prev = std::move(v);
        g_prev = std::move(cur.gradient);
        cur.gradient.clear();
        v = std::move(v_new);
        cur = std::move(nxt);
        if (cur.value < best.value) {
            best = cur;
            v_best = v;
        }
        converged = cur.grad_norm <= tol;
    }

    const Evaluation& out = converged ? cur : best;
    const std::vector<double>& vout = converged ? v : v_best;
    sol.value = out.value;
    sol.control = vout;
    sol.state = out.state;
    sol.adjoint = out.adjoint;
    sol.iterations = iter;
    sol.converged = converged;
    sol.grad_norm = out.grad_norm;
    return sol;
}

OpenLoopSolution MortensenOracle::solve_open_loop(double t, std::span<const double> xi,
                                                  const OpenLoopSolution* warm_start) const {
    return solve_with_tol(t, xi, warm_start, cfg_.rel_tol);
}

std::vector<double> MortensenOracle::value_grad(double t, std::span<const double> xi,
                                                const OpenLoopSolution* warm_start,
                                                OpenLoopSolution* solution_out) const {
    const int n = model_.state_dim();
    OpenLoopSolution sol = solve_open_loop(t, xi, warm_start);
    std::vector<double> g(sol.adjoint.end() - n, sol.adjoint.end());
    if (solution_out) *solution_out = std::move(sol);
    return g;
}

Tensor MortensenOracle::value_hessian(double t, std::span<const double> xi,
                                      const OpenLoopSolution* warm_start, HessianInfo* info,
                                      OpenLoopSolution* center_out) const {
    const int n = model_.state_dim();
    const double tight = std::min(cfg_.rel_tol, 1e-8);
    const OpenLoopSolution center = solve_with_tol(t, xi, warm_start, tight);

    double nx = 0.0;
    for (double v : xi) nx += v * v;
    const double delta = cfg_.fd_step * (1.0 + std::sqrt(nx));

    bool all_conv = center.converged;
    Tensor hess({n, n});
    std::vector<double> xp(xi.begin(), xi.end());
    for (int i = 0; i < n; ++i) {
        xp[static_cast<std::size_t>(i)] = xi[static_cast<std::size_t>(i)] + delta;
        const OpenLoopSolution sp = solve_with_tol(t, xp, &center, tight);
        xp[static_cast<std::size_t>(i)] = xi[static_cast<std::size_t>(i)] - delta;
        const OpenLoopSolution sm = solve_with_tol(t, xp, &center, tight);
        xp[static_cast<std::size_t>(i)] = xi[static_cast<std::size_t>(i)];
        all_conv = all_conv && sp.converged && sm.converged;
        for (int q = 0; q < n; ++q) {
            const double gp = sp.adjoint[sp.adjoint.size() - static_cast<std::size_t>(n - q)];
            const double gm = sm.adjoint[sm.adjoint.size() - static_cast<std::size_t>(n - q)];
            hess(q, i) = (gp - gm) / (2.0 * delta);
        }
    }

    const Tensor skew = hess - transpose(hess);
    Tensor sym = hess + transpose(hess);
    sym *= 0.5;
    if (info) {
        info->asym_residual = norm_max(skew);
        double pivot = 0.0;
        info->spd = try_spd_solve(sym, Tensor({n}), &pivot).has_value();
        info->min_pivot = pivot;
        info->converged = all_conv;
    }
    if (center_out) *center_out = center;
    return sym;
}

std::vector<double> MortensenOracle::minimize_value(double t, std::span<const double> x_init,
                                                    bool* converged_out) const {
    const int n = model_.state_dim();
    const double tight = std::min(cfg_.rel_tol, 1e-8);

    std::vector<double> xi(x_init.begin(), x_init.end());
    OpenLoopSolution warm;
    bool have_warm = false;

    auto grad_at = [&](std::span<const double> point, double& gnorm) {
        OpenLoopSolution sol = solve_with_tol(t, point, have_warm ? &warm : nullptr, tight);
        std::vector<double> g(sol.adjoint.end() - n, sol.adjoint.end());
        warm = std::move(sol);
        have_warm = true;
        double acc = 0.0;
        for (double v : g) acc += v * v;
        gnorm = std::sqrt(acc);
        return g;
    };

    double gnorm = 0.0;
    std::vector<double> g = grad_at(xi, gnorm);
    const double tol = cfg_.rel_tol * std::max(1.0, gnorm);
    std::vector<double> xi_prev, g_prev;
    double step = 1e-2;
    bool converged = gnorm <= tol;
    int iter = 0;
    while (!converged && iter < cfg_.max_iters) {
        ++iter;
        if (!xi_prev.empty()) {
            double num = 0.0, den = 0.0;
            for (int q = 0; q < n; ++q) {
                const double dx = xi[static_cast<std::size_t>(q)] - xi_prev[static_cast<std::size_t>(q)];
                const double dg = g[static_cast<std::size_t>(q)] - g_prev[static_cast<std::size_t>(q)];
                num += dx * dx;
                den += dx * dg;
            }
            if (den > 1e-300 && std::isfinite(num / den)) step = std::clamp(num / den, 1e-12, 1e4);
        }
        xi_prev = xi;
        g_prev = g;
        for (int q = 0; q < n; ++q) xi[static_cast<std::size_t>(q)] -= step * g[static_cast<std::size_t>(q)];
        g = grad_at(xi, gnorm);
        converged = gnorm <= tol;
    }
    if (converged_out) *converged_out = converged;
    return xi;
}

ObserverTrajectory MortensenOracle::integrate_mortensen(double T_obs, int grid_points) const {
    const int n = model_.state_dim();
    const int p = model_.output_dim();
    if (n > 4) {
        throw std::invalid_argument(
            "integrate_mortensen: dense Hessian sampling is limited to state dimension <= 4");
    }
    if (grid_points < 2) throw std::invalid_argument("integrate_mortensen: grid_points >= 2");

    ObserverTrajectory traj;
    traj.kind = ObserverKind::mortensen;
    traj.n = n;
    traj.k = 0;
    const double h = T_obs / (grid_points - 1);

    OpenLoopSolution warm;
    bool have_warm = false;
    std::vector<double> hx(static_cast<std::size_t>(p)), yv(static_cast<std::size_t>(p));

    auto observer_drift = [&](double tt, std::span<const double> xs,
                              std::span<double> dx) -> bool {
        HessianInfo info;
        OpenLoopSolution center;
        const Tensor hess = value_hessian(tt, xs, have_warm ? &warm : nullptr, &info, &center);
        if (!info.converged) return false;
        warm = std::move(center);
        have_warm = true;

        model_.h(xs, hx);
        y_.eval(tt, yv);
        const Tensor jh = model_.dh(xs, 1);
        Tensor b({n});
        for (int q = 0; q < p; ++q) {
            double wq = 0.0;
            for (int r = 0; r < p; ++r)
                wq += w_.Q(q, r) * (yv[static_cast<std::size_t>(r)] - hx[static_cast<std::size_t>(r)]);
            for (int i = 0; i < n; ++i) b(i) += jh(q, i) * wq;
        }
        const auto gain = try_spd_solve(hess, b);
        if (!gain) return false;
        model_.f(xs, dx);
        for (int i = 0; i < n; ++i) dx[static_cast<std::size_t>(i)] += (*gain)(i);
        return true;
    };

    std::vector<double> x(x0_);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), xt(n);
    bool failed = false;
    double fail_t = 0.0;
    for (int node = 0; node < grid_points; ++node) {
        const double tt = node * h;
        if (!observer_drift(tt, x, k1)) {
            failed = true;
            fail_t = tt;
            break;
        }
        traj.times.push_back(tt);
        traj.x_nodes.insert(traj.x_nodes.end(), x.begin(), x.end());
        traj.xdot_nodes.insert(traj.xdot_nodes.end(), k1.begin(), k1.end());
        if (node + 1 == grid_points) break;

        bool ok = true;
        for (int i = 0; i < n; ++i) xt[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + 0.5 * h * k1[static_cast<std::size_t>(i)];
        ok = ok && observer_drift(tt + 0.5 * h, xt, k2);
        if (ok) {
            for (int i = 0; i < n; ++i) xt[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + 0.5 * h * k2[static_cast<std::size_t>(i)];
            ok = ok && observer_drift(tt + 0.5 * h, xt, k3);
        }
        if (ok) {
            for (int i = 0; i < n; ++i) xt[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + h * k3[static_cast<std::size_t>(i)];
            ok = ok && observer_drift(tt + h, xt, k4);
        }
        if (!ok) {
            failed = true;
            fail_t = tt;
            break;
        }
        for (int i = 0; i < n; ++i) {
            x[static_cast<std::size_t>(i)] += h / 6.0 *
                (k1[static_cast<std::size_t>(i)] + 2.0 * k2[static_cast<std::size_t>(i)] +
                 2.0 * k3[static_cast<std::size_t>(i)] + k4[static_cast<std::size_t>(i)]);
        }
        if (!all_finite(x)) {
            failed = true;
            fail_t = tt + h;
            break;
        }
    }
    if (failed) {
        traj.status = OdeStatus::breakdown;
        traj.breakdown = OdeBreakdown{fail_t, "open-loop solves stopped converging"};
    }
    return traj;
}

}  // namespace hoekf
