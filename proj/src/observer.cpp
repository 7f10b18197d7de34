#include "hoekf/observer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hoekf {

namespace {

void check_order_k(int k) {
    if (k < 2) throw std::invalid_argument("observer order k must be at least 2");
}

Tensor weighted_residual(const Tensor& q, std::span<const double> y,
                         std::span<const double> hx) {
    const int p = q.dim(1);
    Tensor iota({p});
    for (int i = 0; i < p; ++i) {
        double acc = 0.0;
        for (int j = 0; j < p; ++j) acc += q(i, j) * (y[static_cast<std::size_t>(j)] -
                                                      hx[static_cast<std::size_t>(j)]);
        iota(i) = acc;
    }
    return iota;
}

// Four-term source of the generalized Lyapunov equation for P_ell.
Tensor assemble_source(int ell, const ObserverState& s, const SystemModel& model,
                       const Tensor& grg, const Tensor& q, const Tensor& iota) {
    const int n = model.state_dim();
    Tensor r = Tensor::cube(ell, n);

    for (int i = 1; i <= ell - 2; ++i) {
        const int ord = ell - i;
        if (ord > model.f_degree()) continue;
        const Tensor term = sym_shuffle(contract(s.Pj(i + 1), 1, model.df(s.x, ord), 1), i, ell - i);
        r += term;
    }
    for (int i = 2; i <= ell - 2; ++i) {
        const Tensor inner = contract(grg, 2, s.Pj(ell - i + 1), 1);
        const Tensor term = sym_shuffle(contract(s.Pj(i + 1), 1, inner, 1), i, ell - i);
        axpy(0.5, term, r);
    }
    if (ell <= model.h_degree()) {
        r += contract(model.dh(s.x, ell), 1, iota, 1);
    }
    for (int i = 1; i <= ell - 1; ++i) {
        if (i > model.h_degree() || ell - i > model.h_degree()) continue;
        const Tensor inner = contract(q, 2, model.dh(s.x, ell - i), 1);
        const Tensor term = sym_shuffle(contract(model.dh(s.x, i), 1, inner, 1), i, ell - i);
        axpy(-0.5, term, r);
    }
    return r;
}

}  // namespace

ObserverState initial_state(int k, std::span<const double> x0, const Tensor& gamma) {
    check_order_k(k);
    const int n = static_cast<int>(x0.size());
    if (gamma.order() != 2 || gamma.dim(1) != n || gamma.dim(2) != n) {
        throw std::invalid_argument("initial_state: Gamma must be n x n");
    }
    spd_solve(gamma, Tensor({n}));  // SPD check
    ObserverState s;
    s.x.assign(x0.begin(), x0.end());
    s.P.reserve(static_cast<std::size_t>(k - 1));
    s.P.push_back(gamma);
    for (int j = 3; j <= k; ++j) s.P.push_back(Tensor::cube(j, n));
    return s;
}

std::size_t flat_dim(int n, int k) {
    check_order_k(k);
    std::size_t d = static_cast<std::size_t>(n);
    std::size_t nj = static_cast<std::size_t>(n);
    for (int j = 2; j <= k; ++j) {
        nj *= static_cast<std::size_t>(n);
        d += nj;
    }
    return d;
}

std::vector<double> flatten(const ObserverState& s) {
    std::vector<double> v;
    v.reserve(flat_dim(s.dim(), s.order()));
    v.assign(s.x.begin(), s.x.end());
    for (const Tensor& p : s.P) v.insert(v.end(), p.values().begin(), p.values().end());
    return v;
}

ObserverState unflatten(std::span<const double> v, int n, int k) {
    check_order_k(k);
    if (v.size() != flat_dim(n, k)) {
        throw std::invalid_argument("unflatten: flat vector has length " +
                                    std::to_string(v.size()) + ", expected " +
                                    std::to_string(flat_dim(n, k)));
    }
    ObserverState s;
    s.x.assign(v.begin(), v.begin() + n);
    std::size_t off = static_cast<std::size_t>(n);
    for (int j = 2; j <= k; ++j) {
        Tensor p = Tensor::cube(j, n);
        std::copy(v.begin() + static_cast<std::ptrdiff_t>(off),
                  v.begin() + static_cast<std::ptrdiff_t>(off + p.size()),
                  p.values().begin());
        off += p.size();
        s.P.push_back(std::move(p));
    }
    return s;
}

Tensor compute_R(int ell, const ObserverState& s, const SystemModel& model,
                 std::span<const double> y_t, const Weights& w) {
    if (ell < 2 || ell > s.order()) {
        throw std::invalid_argument("compute_R: need 2 <= ell <= k");
    }
    if (ell > model.max_order()) {
        throw std::invalid_argument("compute_R: model does not supply derivative order " +
                                    std::to_string(ell));
    }
    const Tensor rinv = spd_inverse(w.Rw);
    const Tensor grg = matmul(model.G(), matmul(rinv, transpose(model.G())));
    const auto hx = model.h(s.x);
    const Tensor iota = weighted_residual(w.Q, y_t, hx);
    return assemble_source(ell, s, model, grg, w.Q, iota);
}

HoekfProblem::HoekfProblem(const SystemModel& model, const Weights& w, const Signal& y, int k,
                           HoekfOptions opt)
    : model_(model), w_(w), y_(y), k_(k), opt_(opt) {
    check_order_k(k);
    if (k > model.max_order()) {
        throw std::invalid_argument("HoekfProblem: model supplies derivatives only up to order " +
                                    std::to_string(model.max_order()));
    }
    if (y.dim() != model.output_dim()) {
        throw std::invalid_argument("HoekfProblem: signal dimension mismatch");
    }
    const Tensor rinv = spd_inverse(w.Rw);
    grg_ = matmul(model.G(), matmul(rinv, transpose(model.G())));
}

Tensor HoekfProblem::source_term(int ell, const ObserverState& s,
                                 std::span<const double> y_t) const {
    const auto hx = model_.h(s.x);
    const Tensor iota = weighted_residual(w_.Q, y_t, hx);
    return assemble_source(ell, s, model_, grg_, w_.Q, iota);
}

bool HoekfProblem::rhs(double t, const ObserverState& s, ObserverState& ds) const {
    const int n = model_.state_dim();
    const int k = k_;

    std::vector<double> yt(static_cast<std::size_t>(model_.output_dim()));
    y_.eval(t, yt);
    const auto hx = model_.h(s.x);
    const Tensor iota = weighted_residual(w_.Q, yt, hx);
    const Tensor jh = model_.dh(s.x, 1);
    const Tensor b = contract(jh, 1, iota, 1);
    const auto gain = try_spd_solve(s.Pj(2), b);
    if (!gain) return false;

    const auto fx = model_.f(s.x);
    ds.x.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        ds.x[static_cast<std::size_t>(i)] = fx[static_cast<std::size_t>(i)] + (*gain)(i);

    const Tensor jf = model_.df(s.x, 1);
    const double csign = opt_.negate_transport_coupling ? -1.0 : 1.0;

    ds.P.resize(static_cast<std::size_t>(k - 1));
    // Riccati-type equation for P_2
    {
        const Tensor r2 = assemble_source(2, s, model_, grg_, w_.Q, iota);
        const Tensor a = matmul(transpose(jf), s.Pj(2));        // Jf^T P2
        const Tensor pep = matmul(s.Pj(2), matmul(grg_, s.Pj(2)));
        Tensor pdot({n, n});
        pdot -= a;
        pdot -= transpose(a);  // P2 Jf, using symmetry of P2
        pdot -= pep;
        pdot -= r2;
        if (k >= 3) axpy(csign, contract(s.Pj(3), 1, *gain, 1), pdot);
        if (opt_.project_symmetric) pdot = symmetrize_full(pdot);
        ds.P[0] = std::move(pdot);
    }
    if (k >= 3) {
        const Tensor drift = jf + matmul(grg_, s.Pj(2));  // Jf + G R^{-1} G^T P2
        for (int j = 3; j <= k; ++j) {
            Tensor pdot = Tensor::cube(j, n);
            for (int mu = 1; mu <= j; ++mu) pdot -= mode_mul(s.Pj(j), mu, drift);
            pdot -= assemble_source(j, s, model_, grg_, w_.Q, iota);
            if (j < k) axpy(csign, contract(s.Pj(j + 1), 1, *gain, 1), pdot);
            if (opt_.project_symmetric) pdot = symmetrize_full(pdot);
            ds.P[static_cast<std::size_t>(j - 2)] = std::move(pdot);
        }
    }
    return true;
}

bool hoekf_rhs(double t, const ObserverState& s, const SystemModel& model, const Weights& w,
               const Signal& y, ObserverState& ds, const HoekfOptions& opt) {
    return HoekfProblem(model, w, y, s.order(), opt).rhs(t, s, ds);
}

namespace {

constexpr std::size_t kFullStorageLimit = 2048;

void hermite_eval(const std::vector<double>& times, const std::vector<double>& values,
                  const std::vector<double>& derivs, int dim, double t, std::span<double> out) {
    if (times.size() == 1) {
        if (std::abs(t - times[0]) > 1e-12 * (1.0 + std::abs(times[0]))) {
            throw std::out_of_range("ObserverTrajectory: time outside covered span");
        }
        std::copy(values.begin(), values.end(), out.begin());
        return;
    }
    const double t0 = times.front(), t1 = times.back();
    const double slack = 1e-12 * (1.0 + t1 - t0);
    if (t < t0 - slack || t > t1 + slack) {
        throw std::out_of_range("ObserverTrajectory: time outside covered span");
    }
    const double tc = std::clamp(t, t0, t1);
    auto it = std::upper_bound(times.begin(), times.end(), tc);
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    hi = std::clamp<std::size_t>(hi, 1, times.size() - 1);
    const std::size_t lo = hi - 1;
    const double h = times[hi] - times[lo];
    const double u = (tc - times[lo]) / h;
    const double u2 = u * u, u3 = u2 * u;
    const double b0 = 2.0 * u3 - 3.0 * u2 + 1.0;
    const double b1 = u3 - 2.0 * u2 + u;
    const double b2 = -2.0 * u3 + 3.0 * u2;
    const double b3 = u3 - u2;
    const std::size_t d = static_cast<std::size_t>(dim);
    const double* v0 = values.data() + lo * d;
    const double* v1 = values.data() + hi * d;
    const double* g0 = derivs.data() + lo * d;
    const double* g1 = derivs.data() + hi * d;
    for (std::size_t i = 0; i < d; ++i) out[i] = b0 * v0[i] + b2 * v1[i] + h * (b1 * g0[i] + b3 * g1[i]);
}

using StateRhs = std::function<bool(double, const ObserverState&, ObserverState&)>;

ObserverTrajectory run_observer(ObserverKind kind, int n, int k, const StateRhs& srhs,
                                const ObserverState& s0, double T, const RunOptions& opt) {
    ObserverTrajectory traj;
    traj.kind = kind;
    traj.n = n;
    traj.k = k;

    const std::vector<double> flat0 = flatten(s0);
    const std::size_t D = flat0.size();
    const bool store_full = opt.storage == RunOptions::Storage::full ||
                            (opt.storage == RunOptions::Storage::automatic &&
                             D <= kFullStorageLimit);

    // shared scratch; rk45 never re-enters the rhs concurrently
    ObserverState scur = s0, sdot = s0;
    const OdeRhs frhs = [&](double t, std::span<const double> v, std::span<double> dv) {
        scur = unflatten(v, n, k);
        if (!srhs(t, scur, sdot)) return false;
        const std::vector<double> fd = flatten(sdot);
        std::copy(fd.begin(), fd.end(), dv.begin());
        return true;
    };

    // initial node (also validates the initial state)
    std::vector<double> d0(D);
    if (!frhs(0.0, flat0, d0)) {
        traj.status = OdeStatus::breakdown;
        traj.breakdown = OdeBreakdown{0.0, "observer state invalid at t = 0"};
        traj.times.push_back(0.0);
        traj.x_nodes.insert(traj.x_nodes.end(), s0.x.begin(), s0.x.end());
        traj.xdot_nodes.assign(static_cast<std::size_t>(n), 0.0);
        return traj;
    }
    traj.times.push_back(0.0);
    traj.x_nodes.insert(traj.x_nodes.end(), flat0.begin(), flat0.begin() + n);
    traj.xdot_nodes.insert(traj.xdot_nodes.end(), d0.begin(), d0.begin() + n);
    traj.diag.max_p_norm.assign(static_cast<std::size_t>(std::max(0, k - 1)), 0.0);

    std::vector<double> snap_times(opt.snapshot_times);
    std::sort(snap_times.begin(), snap_times.end());
    std::size_t snap_idx = 0;
    const double snap_eps = 1e-9 * (1.0 + T);
    while (snap_idx < snap_times.size() && snap_times[snap_idx] <= snap_eps) {
        traj.snapshots.emplace_back(0.0, s0);
        ++snap_idx;
    }

    auto record_p_diag = [&](std::span<const double> flat, double& min_pivot) {
        std::size_t off = static_cast<std::size_t>(n);
        std::size_t nj = static_cast<std::size_t>(n);
        bool ok = true;
        for (int j = 2; j <= k; ++j) {
            nj *= static_cast<std::size_t>(n);
            double mx = 0.0;
            for (std::size_t q = 0; q < nj; ++q) mx = std::max(mx, std::abs(flat[off + q]));
            auto& slot = traj.diag.max_p_norm[static_cast<std::size_t>(j - 2)];
            slot = std::max(slot, mx);
            if (j == 2 && kind == ObserverKind::hoekf) {
                Tensor p2({n, n});
                std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                          flat.begin() + static_cast<std::ptrdiff_t>(off + nj),
                          p2.values().begin());
                ok = try_spd_solve(p2, Tensor({n}), &min_pivot).has_value();
            }
            off += nj;
        }
        return ok;
    };

    {
        double piv0 = std::numeric_limits<double>::quiet_NaN();
        record_p_diag(flat0, piv0);
        traj.diag.min_pivot.push_back(piv0);
    }

    if (store_full) {
        traj.full.emplace();
        traj.full->times.push_back(0.0);
        traj.full->states.emplace_back(flat0.begin(), flat0.end());
    }

    std::string halt_reason;
    std::vector<double> snap_buf(D);
    const OdeStepObserver sink = [&](const OdeStepView& step) {
        double piv = std::numeric_limits<double>::quiet_NaN();
        const bool spd_ok = record_p_diag(step.y1, piv);
        if (!spd_ok) {
            halt_reason = "P2 lost positive definiteness at an accepted state";
            return false;
        }
        traj.times.push_back(step.t1);
        traj.x_nodes.insert(traj.x_nodes.end(), step.y1.begin(), step.y1.begin() + n);
        traj.xdot_nodes.insert(traj.xdot_nodes.end(), step.f1.begin(), step.f1.begin() + n);
        traj.diag.min_pivot.push_back(piv);

        while (snap_idx < snap_times.size() && snap_times[snap_idx] <= step.t1 + snap_eps) {
            const double ts = std::min(snap_times[snap_idx], step.t1);
            step.eval(ts, snap_buf);
            traj.snapshots.emplace_back(snap_times[snap_idx], unflatten(snap_buf, n, k));
            ++snap_idx;
        }
        if (store_full) {
            traj.full->times.push_back(step.t1);
            traj.full->states.emplace_back(step.y1.begin(), step.y1.end());
            std::array<std::vector<double>, 5> rc;
            for (int q = 0; q < 5; ++q) rc[q].assign(step.rcont[q].begin(), step.rcont[q].end());
            traj.full->rcont.push_back(std::move(rc));
        }
        return true;
    };

    std::optional<OdeBreakdown> brk;
    traj.status = rk45_observe(frhs, flat0, 0.0, T, opt.ode, sink, &brk);
    traj.breakdown = brk;
    if (traj.breakdown && !halt_reason.empty()) traj.breakdown->reason = halt_reason;
    if (traj.full) {
        traj.full->status = traj.status;
        traj.full->breakdown = traj.breakdown;
    }
    return traj;
}

}  // namespace

void ObserverTrajectory::eval_x(double t, std::span<double> out) const {
    hermite_eval(times, x_nodes, xdot_nodes, n, t, out);
}

std::vector<double> ObserverTrajectory::eval_x(double t) const {
    std::vector<double> out(static_cast<std::size_t>(n));
    eval_x(t, out);
    return out;
}

ObserverState ObserverTrajectory::eval_state(double t) const {
    if (!full) throw std::logic_error("ObserverTrajectory: full state storage not enabled");
    const std::vector<double> flat = full->eval(t);
    return unflatten(flat, n, k);
}

ObserverTrajectory run_hoekf(int k, const SystemModel& model, const Weights& w, const Signal& y,
                             std::span<const double> x0, double T, const RunOptions& opt) {
    return run_hoekf(initial_state(k, x0, w.Gamma), model, w, y, T, opt);
}

ObserverTrajectory run_hoekf(ObserverState s0, const SystemModel& model, const Weights& w,
                             const Signal& y, double T, const RunOptions& opt) {
    const int k = s0.order();
    HoekfProblem prob(model, w, y, k, opt.hoekf);
    const StateRhs srhs = [&prob](double t, const ObserverState& s, ObserverState& ds) {
        return prob.rhs(t, s, ds);
    };
    return run_observer(ObserverKind::hoekf, model.state_dim(), k, srhs, s0, T, opt);
}

ObserverTrajectory run_ekf(const SystemModel& model, const Weights& w, const Signal& y,
                           std::span<const double> x0, double T, const RunOptions& opt) {
    const int n = model.state_dim();
    if (static_cast<int>(x0.size()) != n) {
        throw std::invalid_argument("run_ekf: x0 dimension mismatch");
    }
    const Tensor rinv = spd_inverse(w.Rw);
    const Tensor grg = matmul(model.G(), matmul(rinv, transpose(model.G())));

    ObserverState s0;
    s0.x.assign(x0.begin(), x0.end());
    s0.P.push_back(spd_inverse(w.Gamma));  // covariance slot

    const StateRhs srhs = [&model, &w, &y, grg, n](double t, const ObserverState& s,
                                                   ObserverState& ds) {
        std::vector<double> yt(static_cast<std::size_t>(model.output_dim()));
        y.eval(t, yt);
        const auto hx = model.h(s.x);
        const Tensor iota = weighted_residual(w.Q, yt, hx);
        const Tensor jh = model.dh(s.x, 1);
        const Tensor b = contract(jh, 1, iota, 1);
        const Tensor& sigma = s.P.front();
        const Tensor gain = matvec(sigma, b);

        const auto fx = model.f(s.x);
        ds.x.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            ds.x[static_cast<std::size_t>(i)] = fx[static_cast<std::size_t>(i)] + gain(i);

        const Tensor jf = model.df(s.x, 1);
        const Tensor js = matmul(jf, sigma);                            // Jf Sigma
        const Tensor sqs = matmul(sigma, matmul(matmul(transpose(jh), matmul(w.Q, jh)), sigma));
        Tensor sdot = js + transpose(js) + grg;
        sdot -= sqs;
        // keep the covariance symmetric
        Tensor sym = sdot + transpose(sdot);
        sym *= 0.5;
        ds.P.assign(1, std::move(sym));
        return true;
    };
    return run_observer(ObserverKind::covariance_filter, n, 2, srhs, s0, T, opt);
}

ObserverTrajectory run_kf(const Tensor& a, const Tensor& c, const Tensor& g, const Weights& w,
                          const Signal& y, std::span<const double> x0, double T,
                          const RunOptions& opt) {
    const LinearModel model = linear_model(a, c, g);
    return run_ekf(model, w, y, x0, T, opt);
}

DistanceSeries relative_distance(const ObserverTrajectory& traj, const ObserverTrajectory& ref,
                                 std::span<const double> grid) {
    DistanceSeries out;
    const double lo = std::max(traj.t_begin(), ref.t_begin());
    const double hi = std::min(traj.t_end(), ref.t_end());
    const double eps = 1e-12 * (1.0 + hi - lo);
    std::vector<double> a(static_cast<std::size_t>(traj.n)), b(static_cast<std::size_t>(ref.n));
    for (double t : grid) {
        if (t < lo - eps || t > hi + eps) continue;
        const double tc = std::clamp(t, lo, hi);
        traj.eval_x(tc, a);
        ref.eval_x(tc, b);
        double dn = 0.0, rn = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dn += (a[i] - b[i]) * (a[i] - b[i]);
            rn += b[i] * b[i];
        }
        out.t.push_back(t);
        out.d.push_back(rn > 0.0 ? std::sqrt(dn / rn)
                                 : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

}  // namespace hoekf
