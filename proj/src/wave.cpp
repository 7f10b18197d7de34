#include "hoekf/wave.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hoekf {

namespace {

constexpr double kPi = std::numbers::pi;

// 1D sensor-average factor: integral of sin(pi a x) over [c - l, c + l].
double sine_segment_integral(int a, double c, double l) {
    return (std::cos(kPi * a * (c - l)) - std::cos(kPi * a * (c + l))) / (kPi * a);
}

}  // namespace

double quad_sine_integral(int a, int b, int c, int d) {
    // product-to-exponential expansion: the integral collapses onto the sign
    // patterns whose frequencies cancel
    const int freq[4] = {a, b, c, d};
    double acc = 0.0;
    for (int mask = 0; mask < 16; ++mask) {
        int sigma = 0, prod = 1;
        for (int l = 0; l < 4; ++l) {
            const int s = (mask >> l) & 1 ? 1 : -1;
            sigma += s * freq[l];
            prod *= s;
        }
        if (sigma == 0) acc += prod;
    }
    return acc / 16.0;
}

std::vector<std::array<double, 2>> sensor_grid(int per_side) {
    if (per_side < 1) throw std::invalid_argument("sensor_grid: per_side >= 1 required");
    std::vector<std::array<double, 2>> centers;
    centers.reserve(static_cast<std::size_t>(per_side) * static_cast<std::size_t>(per_side));
    for (int iy = 1; iy <= per_side; ++iy)
        for (int ix = 1; ix <= per_side; ++ix)
            centers.push_back({static_cast<double>(ix) / (per_side + 1),
                               static_cast<double>(iy) / (per_side + 1)});
    return centers;
}

std::vector<double> WaveDiscretization::to_state(std::span<const double> displacement,
                                                 std::span<const double> velocity) const {
    if (static_cast<int>(displacement.size()) != N || static_cast<int>(velocity.size()) != N) {
        throw std::invalid_argument("WaveDiscretization: coefficient size mismatch");
    }
    std::vector<double> z(static_cast<std::size_t>(2 * N));
    for (int i = 0; i < N; ++i) {
        z[static_cast<std::size_t>(i)] = std::sqrt(S(i, i)) * displacement[static_cast<std::size_t>(i)];
        z[static_cast<std::size_t>(N + i)] = std::sqrt(M(i, i)) * velocity[static_cast<std::size_t>(i)];
    }
    return z;
}

namespace {

WaveDiscretization assemble(int K, std::vector<std::array<double, 2>> sensors, double ell) {
    if (K < 2) throw std::invalid_argument("wave_model: K >= 2 required");
    if (!(ell > 0.0)) throw std::invalid_argument("wave_model: ell > 0 required");
    for (const auto& s : sensors) {
        if (s[0] - ell <= 0.0 || s[0] + ell >= 1.0 || s[1] - ell <= 0.0 || s[1] + ell >= 1.0) {
            throw std::invalid_argument("wave_model: sensor square leaves the domain");
        }
    }

    WaveDiscretization d;
    d.K = K;
    d.ell = ell;
    d.sensors = std::move(sensors);
    d.p = static_cast<int>(d.sensors.size());
    for (int i = 1; i < K; ++i)
        for (int j = 1; i + j <= K; ++j) d.index_set.emplace_back(i, j);
    d.N = static_cast<int>(d.index_set.size());
    const int N = d.N;

    d.M = Tensor({N, N});
    d.S = Tensor({N, N});
    for (int a = 0; a < N; ++a) {
        const auto [i, j] = d.index_set[static_cast<std::size_t>(a)];
        d.M(a, a) = 0.25;
        d.S(a, a) = 0.25 * kPi * kPi * (i * i + j * j);
    }

    d.Ttrafo = Tensor({2 * N, 2 * N});
    for (int a = 0; a < N; ++a) {
        d.Ttrafo(a, a) = std::sqrt(d.S(a, a));
        d.Ttrafo(N + a, N + a) = std::sqrt(d.M(a, a));
    }

    d.A = Tensor({2 * N, 2 * N});
    for (int a = 0; a < N; ++a) {
        const double da = std::sqrt(d.S(a, a) / d.M(a, a));
        d.A(a, N + a) = da;
        d.A(N + a, a) = -da;
    }

    d.B = Tensor({2 * N, N});
    for (int a = 0; a < N; ++a) d.B(N + a, a) = 1.0;

    d.C = Tensor({d.p, 2 * N});
    for (int s = 0; s < d.p; ++s) {
        const auto& c = d.sensors[static_cast<std::size_t>(s)];
        for (int a = 0; a < N; ++a) {
            const auto [i, j] = d.index_set[static_cast<std::size_t>(a)];
            const double avg = sine_segment_integral(i, c[0], ell) *
                               sine_segment_integral(j, c[1], ell) / (4.0 * ell * ell);
            d.C(s, a) = avg / std::sqrt(d.S(a, a));
        }
    }

    d.T4 = Tensor({N, N, N, N});
    for (int a = 0; a < N; ++a)
        for (int b = 0; b <= a; ++b)
            for (int c = 0; c <= b; ++c)
                for (int e = 0; e <= c; ++e) {
                    const auto [a1, a2] = d.index_set[static_cast<std::size_t>(a)];
                    const auto [b1, b2] = d.index_set[static_cast<std::size_t>(b)];
                    const auto [c1, c2] = d.index_set[static_cast<std::size_t>(c)];
                    const auto [e1, e2] = d.index_set[static_cast<std::size_t>(e)];
                    const double v = quad_sine_integral(a1, b1, c1, e1) *
                                     quad_sine_integral(a2, b2, c2, e2);
                    int idx[4] = {a, b, c, e};
                    // fill all distinct permutations of (a, b, c, e)
                    std::sort(idx, idx + 4);
                    do {
                        d.T4(idx[0], idx[1], idx[2], idx[3]) = v;
                    } while (std::next_permutation(idx, idx + 4));
                }
    return d;
}

}  // namespace

WaveModel::WaveModel(int K, std::vector<std::array<double, 2>> sensors, double ell,
                     WaveCubicForm form)
    : WaveModel(assemble(K, std::move(sensors), ell), form) {}

WaveModel::WaveModel(WaveDiscretization disc, WaveCubicForm form)
    : SystemModel(2 * disc.N, disc.N, disc.p, disc.B, 3, 1),
      disc_(std::move(disc)),
      form_(form) {
    const int N = disc_.N;
    sign_ = form_ == WaveCubicForm::stiffness_scaled ? -1.0 : 1.0;
    wdiag_.resize(static_cast<std::size_t>(N));
    mdiag_.resize(static_cast<std::size_t>(N));
    ddiag_.resize(static_cast<std::size_t>(N));
    for (int a = 0; a < N; ++a) {
        mdiag_[static_cast<std::size_t>(a)] = 1.0 / std::sqrt(disc_.M(a, a));
        wdiag_[static_cast<std::size_t>(a)] =
            form_ == WaveCubicForm::stiffness_scaled ? 1.0 / std::sqrt(disc_.S(a, a))
                                                     : mdiag_[static_cast<std::size_t>(a)];
        ddiag_[static_cast<std::size_t>(a)] = std::sqrt(disc_.S(a, a) / disc_.M(a, a));
    }
}

std::vector<double> WaveModel::scaled_displacement(std::span<const double> xi) const {
    const int N = disc_.N;
    std::vector<double> u(static_cast<std::size_t>(N));
    for (int a = 0; a < N; ++a)
        u[static_cast<std::size_t>(a)] = wdiag_[static_cast<std::size_t>(a)] * xi[static_cast<std::size_t>(a)];
    return u;
}

void WaveModel::f(std::span<const double> xi, std::span<double> out) const {
    check_state(xi);
    const int N = disc_.N;
    const auto u = scaled_displacement(xi);
    const Tensor& T4 = disc_.T4;
    for (int a = 0; a < N; ++a) {
        out[static_cast<std::size_t>(a)] =
            ddiag_[static_cast<std::size_t>(a)] * xi[static_cast<std::size_t>(N + a)];
        double g = 0.0;
        for (int b = 0; b < N; ++b)
            for (int c = 0; c < N; ++c)
                for (int e = 0; e < N; ++e) g += T4(a, b, c, e) * u[b] * u[c] * u[e];
        out[static_cast<std::size_t>(N + a)] =
            -ddiag_[static_cast<std::size_t>(a)] * xi[static_cast<std::size_t>(a)] +
            sign_ * mdiag_[static_cast<std::size_t>(a)] * g;
    }
}

Tensor WaveModel::df(std::span<const double> xi, int order) const {
    check_state(xi);
    check_order(order);
    const int N = disc_.N;
    const int n = 2 * N;
    const Tensor& T4 = disc_.T4;
    const auto u = scaled_displacement(xi);
    if (order == 1) {
        Tensor j = disc_.A;
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b) {
                double acc = 0.0;
                for (int c = 0; c < N; ++c)
                    for (int e = 0; e < N; ++e) acc += T4(a, b, c, e) * u[c] * u[e];
                j(N + a, b) += sign_ * mdiag_[static_cast<std::size_t>(a)] * 3.0 * acc *
                               wdiag_[static_cast<std::size_t>(b)];
            }
        return j;
    }
    if (order == 2) {
        Tensor d({n, n, n});
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b)
                for (int c = 0; c < N; ++c) {
                    double acc = 0.0;
                    for (int e = 0; e < N; ++e) acc += T4(a, b, c, e) * u[e];
                    d(N + a, b, c) = sign_ * mdiag_[static_cast<std::size_t>(a)] * 6.0 * acc *
                                     wdiag_[static_cast<std::size_t>(b)] *
                                     wdiag_[static_cast<std::size_t>(c)];
                }
        return d;
    }
    if (order == 3) {
        Tensor d({n, n, n, n});
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b)
                for (int c = 0; c < N; ++c)
                    for (int e = 0; e < N; ++e) {
                        d(N + a, b, c, e) = sign_ * mdiag_[static_cast<std::size_t>(a)] * 6.0 *
                                            T4(a, b, c, e) * wdiag_[static_cast<std::size_t>(b)] *
                                            wdiag_[static_cast<std::size_t>(c)] *
                                            wdiag_[static_cast<std::size_t>(e)];
                    }
        return d;
    }
    return zero_df(order);
}

void WaveModel::h(std::span<const double> xi, std::span<double> out) const {
    check_state(xi);
    const int n = 2 * disc_.N;
    for (int s = 0; s < disc_.p; ++s) {
        double acc = 0.0;
        for (int a = 0; a < n; ++a) acc += disc_.C(s, a) * xi[static_cast<std::size_t>(a)];
        out[static_cast<std::size_t>(s)] = acc;
    }
}

Tensor WaveModel::dh(std::span<const double> xi, int order) const {
    check_state(xi);
    check_order(order);
    return order == 1 ? disc_.C : zero_dh(order);
}

WaveModel wave_model(int K, std::vector<std::array<double, 2>> sensors, double ell,
                     WaveCubicForm form) {
    return WaveModel(K, std::move(sensors), ell, form);
}

}  // namespace hoekf
