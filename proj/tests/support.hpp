#pragma once

// Shared helpers for the test suites: deterministic RNG, random tensors,
// and a polynomial vector map with analytically known derivative tensors.

#include <cmath>
#include <random>
#include <vector>

#include "hoekf/tensor.hpp"

namespace testsupport {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline hoekf::Tensor random_tensor(Rng& rng, std::vector<int> dims, double lo = -1.0,
                                   double hi = 1.0) {
    hoekf::Tensor t(std::move(dims));
    for (double& v : t.values()) v = uniform(rng, lo, hi);
    return t;
}

inline hoekf::Tensor random_symmetric_cube(Rng& rng, int order, int n) {
    return hoekf::symmetrize_full(random_tensor(rng, std::vector<int>(order, n)));
}

inline hoekf::Tensor random_spd(Rng& rng, int n, double ridge = 0.1) {
    hoekf::Tensor l({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) l(i, j) = uniform(rng, -1.0, 1.0);
    hoekf::Tensor m = hoekf::matmul(l, hoekf::transpose(l));
    for (int i = 0; i < n; ++i) m(i, i) += ridge;
    return m;
}

inline std::vector<double> random_point(Rng& rng, int n, double lo = -0.5, double hi = 0.5) {
    std::vector<double> x(n);
    for (double& v : x) v = uniform(rng, lo, hi);
    return x;
}

/// Cubic polynomial map u: R^n -> R^m,
///   u_i(x) = t0[i] + t1[i,a] x_a + t2[i,a,b] x_a x_b + t3[i,a,b,c] x_a x_b x_c
/// with t2, t3 symmetric in their trailing modes, so that
///   d^1 u = t1 + 2 t2:x + 3 t3:xx, d^2 u = 2 t2 + 6 t3:x, d^3 u = 6 t3.
struct PolynomialMap {
    int n = 0, m = 0;
    hoekf::Tensor t0, t1, t2, t3;

    static PolynomialMap random(Rng& rng, int n, int m) {
        PolynomialMap p;
        p.n = n;
        p.m = m;
        p.t0 = random_tensor(rng, {m});
        p.t1 = random_tensor(rng, {m, n});
        p.t2 = random_tensor(rng, {m, n, n});
        p.t3 = random_tensor(rng, {m, n, n, n});
        // symmetrize trailing modes
        for (int i = 0; i < m; ++i) {
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < a; ++b) {
                    const double v = 0.5 * (p.t2(i, a, b) + p.t2(i, b, a));
                    p.t2(i, a, b) = p.t2(i, b, a) = v;
                }
            hoekf::Tensor slice({n, n, n});
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    for (int c = 0; c < n; ++c) slice(a, b, c) = p.t3(i, a, b, c);
            slice = hoekf::symmetrize_full(slice);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    for (int c = 0; c < n; ++c) p.t3(i, a, b, c) = slice(a, b, c);
        }
        return p;
    }

    std::vector<double> eval(std::span<const double> x) const {
        std::vector<double> u(m, 0.0);
        for (int i = 0; i < m; ++i) {
            double acc = t0(i);
            for (int a = 0; a < n; ++a) acc += t1(i, a) * x[a];
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) acc += t2(i, a, b) * x[a] * x[b];
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    for (int c = 0; c < n; ++c) acc += t3(i, a, b, c) * x[a] * x[b] * x[c];
            u[i] = acc;
        }
        return u;
    }

    /// Derivative tensor of order k (modes: output, then k state modes).
    hoekf::Tensor deriv(std::span<const double> x, int k) const {
        const hoekf::Tensor xv = hoekf::Tensor::vector({x.begin(), x.end()});
        if (k == 1) {
            hoekf::Tensor d = t1;
            hoekf::Tensor q = hoekf::contract(t2, 3, xv, 1);  // (m, n)
            hoekf::axpy(2.0, q, d);
            hoekf::Tensor cub = hoekf::contract(hoekf::contract(t3, 4, xv, 1), 3, xv, 1);
            hoekf::axpy(3.0, cub, d);
            return d;
        }
        if (k == 2) {
            hoekf::Tensor d = t2;
            d *= 2.0;
            hoekf::Tensor cub = hoekf::contract(t3, 4, xv, 1);
            hoekf::axpy(6.0, cub, d);
            return d;
        }
        if (k == 3) {
            hoekf::Tensor d = t3;
            d *= 6.0;
            return d;
        }
        std::vector<int> dims{m};
        for (int l = 0; l < k; ++l) dims.push_back(n);
        return hoekf::Tensor(dims);
    }
};

}  // namespace testsupport
