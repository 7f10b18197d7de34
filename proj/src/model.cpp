#include "hoekf/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hoekf {

SystemModel::SystemModel(int n, int m, int p, Tensor g, int f_degree, int h_degree)
    : n_(n), m_(m), p_(p), g_(std::move(g)), f_degree_(f_degree), h_degree_(h_degree) {
    if (n <= 0 || m <= 0 || p <= 0) {
        throw std::invalid_argument("SystemModel: dimensions must be positive");
    }
    if (g_.order() != 2 || g_.dim(1) != n || g_.dim(2) != m) {
        throw std::invalid_argument("SystemModel: G must be n x m");
    }
}

std::vector<double> SystemModel::f(std::span<const double> xi) const {
    std::vector<double> out(static_cast<std::size_t>(n_));
    f(xi, out);
    return out;
}

std::vector<double> SystemModel::h(std::span<const double> xi) const {
    std::vector<double> out(static_cast<std::size_t>(p_));
    h(xi, out);
    return out;
}

Tensor SystemModel::zero_df(int order) const {
    std::vector<int> dims{n_};
    for (int l = 0; l < order; ++l) dims.push_back(n_);
    return Tensor(dims);
}

Tensor SystemModel::zero_dh(int order) const {
    std::vector<int> dims{p_};
    for (int l = 0; l < order; ++l) dims.push_back(n_);
    return Tensor(dims);
}

void SystemModel::check_state(std::span<const double> xi) const {
    if (static_cast<int>(xi.size()) != n_) {
        throw std::invalid_argument("SystemModel: state has size " + std::to_string(xi.size()) +
                                    ", expected " + std::to_string(n_));
    }
}

void SystemModel::check_order(int order) const {
    if (order < 1 || order > max_order()) {
        throw std::invalid_argument("SystemModel: derivative order " + std::to_string(order) +
                                    " not available");
    }
}

LinearModel::LinearModel(Tensor a, Tensor c, Tensor g)
    : SystemModel(a.dim(1), g.dim(2), c.dim(1), g, 1, 1),
      a_(std::move(a)),
      c_(std::move(c)) {
    if (a_.order() != 2 || a_.dim(1) != a_.dim(2)) {
        throw std::invalid_argument("LinearModel: A must be square");
    }
    if (c_.order() != 2 || c_.dim(2) != a_.dim(1)) {
        throw std::invalid_argument("LinearModel: C must have n columns");
    }
}

void LinearModel::f(std::span<const double> xi, std::span<double> out) const {
    check_state(xi);
    const int n = state_dim();
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += a_(i, j) * xi[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
}

Tensor LinearModel::df(std::span<const double> xi, int order) const {
    check_state(xi);
    check_order(order);
    return order == 1 ? a_ : zero_df(order);
}

void LinearModel::h(std::span<const double> xi, std::span<double> out) const {
    check_state(xi);
    const int n = state_dim();
    for (int i = 0; i < output_dim(); ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += c_(i, j) * xi[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
}

Tensor LinearModel::dh(std::span<const double> xi, int order) const {
    check_state(xi);
    check_order(order);
    return order == 1 ? c_ : zero_dh(order);
}

DuffingModel::DuffingModel(double lambda, double beta, double delta)
    : SystemModel(2, 1, 1, Tensor({2, 1}, {0.0, 1.0}), beta != 0.0 ? 3 : 1, 1),
      lambda_(lambda),
      beta_(beta),
      delta_(delta) {}

Tensor DuffingModel::A() const {
    return Tensor::matrix_rows({{0.0, 1.0}, {-lambda_, -delta_}});
}

Tensor DuffingModel::C() const { return Tensor({1, 2}, {1.0, 0.0}); }

void DuffingModel::f(std::span<const double> xi, std::span<double> out) const {
    check_state(xi);
    out[0] = xi[1];
    out[1] = -lambda_ * xi[0] - delta_ * xi[1] - beta_ * xi[0] * xi[0] * xi[0];
}

Tensor DuffingModel::df(std::span<const double> xi, int order) const {
    check_state(xi);
    check_order(order);
    if (order == 1) {
        Tensor j = A();
        j(1, 0) -= 3.0 * beta_ * xi[0] * xi[0];
        return j;
    }
    if (order == 2) {
        Tensor d = zero_df(2);
        d(1, 0, 0) = -6.0 * beta_ * xi[0];
        return d;
    }
    if (order == 3) {
        Tensor d = zero_df(3);
        d(1, 0, 0, 0) = -6.0 * beta_;
        return d;
    }
    return zero_df(order);
}

void DuffingModel::h(std::span<const double> xi, std::span<double> out) const {
    check_state(xi);
    out[0] = xi[0];
}

Tensor DuffingModel::dh(std::span<const double> xi, int order) const {
    check_state(xi);
    check_order(order);
    return order == 1 ? C() : zero_dh(order);
}

LinearModel linear_model(Tensor a, Tensor c, Tensor g) {
    return LinearModel(std::move(a), std::move(c), std::move(g));
}

DuffingModel duffing_model(double lambda, double beta, double delta) {
    return DuffingModel(lambda, beta, delta);
}

namespace {

void check_weight(const Tensor& w, int n, const char* name) {
    if (w.order() != 2 || w.dim(1) != n || w.dim(2) != n) {
        throw std::invalid_argument(std::string("Weights: ") + name + " must be " +
                                    std::to_string(n) + " x " + std::to_string(n));
    }
    double asym = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) asym = std::max(asym, std::abs(w(i, j) - w(j, i)));
    if (asym > 1e-12 * (1.0 + norm_max(w))) {
        throw std::invalid_argument(std::string("Weights: ") + name + " not symmetric");
    }
    // positive definiteness via the factorization
    Tensor e({n});
    e(0) = 1.0;
    spd_solve(w, e);
}

}  // namespace

Weights::Weights(Tensor gamma, Tensor rw, Tensor q)
    : Gamma(std::move(gamma)), Rw(std::move(rw)), Q(std::move(q)) {
    check_weight(Gamma, Gamma.dim(1), "Gamma");
    check_weight(Rw, Rw.dim(1), "R");
    check_weight(Q, Q.dim(1), "Q");
}

Weights Weights::identities(int n, int m, int p) {
    return Weights(Tensor::identity(n), Tensor::identity(m), Tensor::identity(p));
}

DisturbanceSpec DisturbanceSpec::none(int n, int m, int p) {
    DisturbanceSpec d;
    d.x0.assign(static_cast<std::size_t>(n), 0.0);
    d.eta.assign(static_cast<std::size_t>(n), 0.0);
    d.v = [](double, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
    d.mu = [](double, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
    (void)m;
    (void)p;
    return d;
}

Signal::Signal(std::vector<double> grid, std::vector<double> values,
               std::vector<double> derivatives, int dim)
    : grid_(std::move(grid)), values_(std::move(values)), derivs_(std::move(derivatives)), dim_(dim) {
    if (dim_ <= 0) throw std::invalid_argument("Signal: dim must be positive");
    if (grid_.size() < 2) throw std::invalid_argument("Signal: need at least 2 grid nodes");
    for (std::size_t i = 1; i < grid_.size(); ++i) {
        if (!(grid_[i] > grid_[i - 1])) {
            throw std::invalid_argument("Signal: grid must be strictly increasing");
        }
    }
    if (std::abs(grid_.front()) > 1e-14 * (1.0 + std::abs(grid_.back()))) {
        throw std::invalid_argument("Signal: grid must start at 0");
    }
    const std::size_t expected = grid_.size() * static_cast<std::size_t>(dim_);
    if (values_.size() != expected || derivs_.size() != expected) {
        throw std::invalid_argument("Signal: value/derivative array size mismatch");
    }
    const double h0 = grid_[1] - grid_[0];
    uniform_ = true;
    for (std::size_t i = 1; i + 1 < grid_.size(); ++i) {
        if (std::abs(grid_[i + 1] - grid_[i] - h0) > 1e-9 * h0) {
            uniform_ = false;
            break;
        }
    }
}

std::span<const double> Signal::node_value(int i) const {
    return {values_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
}

std::span<const double> Signal::node_derivative(int i) const {
    return {derivs_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
}

void Signal::eval(double t, std::span<double> out) const {
    const double T = horizon();
    const double slack = 1e-12 * (1.0 + T);
    if (t < -slack || t > T + slack) {
        throw std::out_of_range("Signal: evaluation at t = " + std::to_string(t) +
                                " outside [0, " + std::to_string(T) + "]");
    }
    const double tc = std::clamp(t, 0.0, T);
    std::size_t hi;
    if (uniform_) {
        const double h = grid_[1] - grid_[0];
        hi = static_cast<std::size_t>(tc / h) + 1;
    } else {
        hi = static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), tc) -
                                      grid_.begin());
    }
    hi = std::clamp<std::size_t>(hi, 1, grid_.size() - 1);
    const std::size_t lo = hi - 1;
    const double h = grid_[hi] - grid_[lo];
    const double s = (tc - grid_[lo]) / h;
    // cubic Hermite basis
    const double s2 = s * s, s3 = s2 * s;
    const double b0 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double b1 = s3 - 2.0 * s2 + s;
    const double b2 = -2.0 * s3 + 3.0 * s2;
    const double b3 = s3 - s2;
    const double* v0 = values_.data() + lo * static_cast<std::size_t>(dim_);
    const double* v1 = values_.data() + hi * static_cast<std::size_t>(dim_);
    const double* d0 = derivs_.data() + lo * static_cast<std::size_t>(dim_);
    const double* d1 = derivs_.data() + hi * static_cast<std::size_t>(dim_);
    for (int i = 0; i < dim_; ++i) {
        out[static_cast<std::size_t>(i)] = b0 * v0[i] + b2 * v1[i] + h * (b1 * d0[i] + b3 * d1[i]);
    }
}

std::vector<double> Signal::eval(double t) const {
    std::vector<double> out(static_cast<std::size_t>(dim_));
    eval(t, out);
    return out;
}

TruthResult simulate_truth(const SystemModel& model, const DisturbanceSpec& dist, double T,
                           int grid_points, const IntegratorConfig& cfg) {
    if (grid_points < 2) throw std::invalid_argument("simulate_truth: grid_points >= 2 required");
    const int n = model.state_dim();
    const int m = model.disturbance_dim();
    const int p = model.output_dim();
    if (static_cast<int>(dist.x0.size()) != n || static_cast<int>(dist.eta.size()) != n) {
        throw std::invalid_argument("simulate_truth: x0/eta dimension mismatch");
    }

    std::vector<double> x0(dist.x0);
    for (int i = 0; i < n; ++i) x0[static_cast<std::size_t>(i)] += dist.eta[static_cast<std::size_t>(i)];

    const Tensor& G = model.G();
    std::vector<double> vbuf(static_cast<std::size_t>(m));
    const OdeRhs rhs = [&](double t, std::span<const double> x, std::span<double> dx) {
        model.f(x, dx);
        dist.v(t, vbuf);
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < m; ++j) acc += G(i, j) * vbuf[static_cast<std::size_t>(j)];
            dx[static_cast<std::size_t>(i)] += acc;
        }
        return true;
    };

    const DenseTrajectory traj = rk45_adaptive(rhs, x0, 0.0, T, cfg);
    if (traj.status != OdeStatus::completed) {
        throw std::runtime_error("simulate_truth: integration failed at t = " +
                                 std::to_string(traj.breakdown ? traj.breakdown->t : T));
    }

    std::vector<double> grid(static_cast<std::size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i) grid[static_cast<std::size_t>(i)] = T * i / (grid_points - 1);

    std::vector<double> xs(grid.size() * static_cast<std::size_t>(n));
    std::vector<double> xds(grid.size() * static_cast<std::size_t>(n));
    std::vector<double> ys(grid.size() * static_cast<std::size_t>(p));
    std::vector<double> yds(grid.size() * static_cast<std::size_t>(p));

    std::vector<double> x(static_cast<std::size_t>(n)), dx(static_cast<std::size_t>(n));
    std::vector<double> hx(static_cast<std::size_t>(p)), mu(static_cast<std::size_t>(p)),
        mud(static_cast<std::size_t>(p));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = grid[i];
        traj.eval(t, x);
        rhs(t, x, dx);
        std::copy(x.begin(), x.end(), xs.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(n)));
        std::copy(dx.begin(), dx.end(), xds.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(n)));

        model.h(x, hx);
        dist.mu(t, mu);
        if (dist.mu_dot) {
            dist.mu_dot(t, mud);
        } else {
            // centered difference of mu, one-sided at the ends
            std::vector<double> lo(static_cast<std::size_t>(p)), hi(static_cast<std::size_t>(p));
            const double e = 1e-6 * (1.0 + T);
            const double tl = std::max(0.0, t - e), th = std::min(T, t + e);
            dist.mu(tl, lo);
            dist.mu(th, hi);
            for (int q = 0; q < p; ++q)
                mud[static_cast<std::size_t>(q)] =
                    (hi[static_cast<std::size_t>(q)] - lo[static_cast<std::size_t>(q)]) / (th - tl);
        }
        // dy = Jh(x) dx + mu_dot
        const Tensor jh = model.dh(x, 1);
        for (int q = 0; q < p; ++q) {
            double acc = mud[static_cast<std::size_t>(q)];
            for (int j = 0; j < n; ++j) acc += jh(q, j) * dx[static_cast<std::size_t>(j)];
            ys[i * static_cast<std::size_t>(p) + static_cast<std::size_t>(q)] =
                hx[static_cast<std::size_t>(q)] + mu[static_cast<std::size_t>(q)];
            yds[i * static_cast<std::size_t>(p) + static_cast<std::size_t>(q)] = acc;
        }
    }

    Signal state(grid, std::move(xs), std::move(xds), n);
    Signal meas(std::move(grid), std::move(ys), std::move(yds), p);
    return {std::move(state), std::move(meas)};
}

}  // namespace hoekf
