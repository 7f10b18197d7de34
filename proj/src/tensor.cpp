#include "hoekf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

namespace hoekf {

namespace {

std::string dims_to_string(const std::vector<int>& dims) {
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    s += ")";
    return s;
}

std::vector<std::size_t> strides_of(const std::vector<int>& dims) {
    std::vector<std::size_t> s(dims.size());
    std::size_t acc = 1;
    for (std::size_t l = 0; l < dims.size(); ++l) {
        s[l] = acc;
        acc *= static_cast<std::size_t>(dims[l]);
    }
    return s;
}

std::size_t product_of(const std::vector<int>& dims) {
    std::size_t acc = 1;
    for (int d : dims) acc *= static_cast<std::size_t>(d);
    return acc;
}

// Base offsets of all multi-indices over the given dims/strides, enumerated
// first-index-fastest. Used by the generic contraction path.
std::vector<std::size_t> offset_table(const std::vector<int>& dims,
                                      const std::vector<std::size_t>& strides) {
    std::vector<std::size_t> off(product_of(dims));
    std::vector<int> idx(dims.size(), 0);
    std::size_t cur = 0;
    for (std::size_t lin = 0; lin < off.size(); ++lin) {
        off[lin] = cur;
        for (std::size_t l = 0; l < dims.size(); ++l) {
            cur += strides[l];
            if (++idx[l] < dims[l]) break;
            cur -= static_cast<std::size_t>(dims[l]) * strides[l];
            idx[l] = 0;
        }
    }
    return off;
}

void check_mode(const Tensor& t, int mu, const char* who, const char* arg) {
    if (mu < 1 || mu > t.order()) {
        throw std::invalid_argument(std::string(who) + ": mode " + std::to_string(mu) +
                                    " of " + arg + " out of range 1.." +
                                    std::to_string(t.order()));
    }
}

}  // namespace

NotPositiveDefinite::NotPositiveDefinite(double pivot, double threshold)
    : std::runtime_error("matrix not positive definite: pivot " + std::to_string(pivot) +
                         " below threshold " + std::to_string(threshold)),
      pivot_(pivot),
      threshold_(threshold) {}

Tensor::Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw std::invalid_argument("Tensor: order must be >= 1");
    for (int d : dims_) {
        if (d <= 0) throw std::invalid_argument("Tensor: dimensions must be positive, got " +
                                                dims_to_string(dims_));
    }
    values_.assign(product_of(dims_), 0.0);
}

Tensor::Tensor(std::vector<int> dims, std::vector<double> values) : Tensor(std::move(dims)) {
    if (values.size() != values_.size()) {
        throw std::invalid_argument("Tensor: value count " + std::to_string(values.size()) +
                                    " does not match dims " + dims_to_string(dims_));
    }
    values_ = std::move(values);
}

Tensor Tensor::vector(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(int rows, int cols) { return Tensor({rows, cols}); }

Tensor Tensor::matrix_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r ? static_cast<int>(rows.begin()->size()) : 0;
    Tensor m({r, c});
    int i = 0;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != c) {
            throw std::invalid_argument("matrix_rows: ragged rows");
        }
        int j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

Tensor Tensor::identity(int n) {
    Tensor m({n, n});
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Tensor Tensor::diag(std::span<const double> d) {
    const int n = static_cast<int>(d.size());
    Tensor m({n, n});
    for (int i = 0; i < n; ++i) m(i, i) = d[i];
    return m;
}

Tensor Tensor::cube(int order, int n) {
    return Tensor(std::vector<int>(static_cast<std::size_t>(order), n));
}

int Tensor::dim(int mu) const {
    if (mu < 1 || mu > order()) {
        throw std::invalid_argument("Tensor::dim: mode " + std::to_string(mu) +
                                    " out of range 1.." + std::to_string(order()));
    }
    return dims_[static_cast<std::size_t>(mu - 1)];
}

std::size_t Tensor::linear_index(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != order()) {
        throw std::invalid_argument("Tensor: expected " + std::to_string(order()) +
                                    " indices, got " + std::to_string(idx.size()));
    }
    std::size_t lin = 0;
    std::size_t stride = 1;
    std::size_t l = 0;
    for (int i : idx) {
        if (i < 0 || i >= dims_[l]) {
            throw std::out_of_range("Tensor: index " + std::to_string(i) +
                                    " out of range for mode " + std::to_string(l + 1) +
                                    " of size " + std::to_string(dims_[l]));
        }
        lin += stride * static_cast<std::size_t>(i);
        stride *= static_cast<std::size_t>(dims_[l]);
        ++l;
    }
    return lin;
}

bool Tensor::all_dims_equal() const noexcept {
    for (int d : dims_) {
        if (d != dims_[0]) return false;
    }
    return true;
}

Tensor& Tensor::operator+=(const Tensor& rhs) {
    if (!same_dims(rhs)) {
        throw std::invalid_argument("Tensor +=: dims " + dims_to_string(dims_) +
                                    " vs " + dims_to_string(rhs.dims_));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += rhs.values_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& rhs) {
    if (!same_dims(rhs)) {
        throw std::invalid_argument("Tensor -=: dims " + dims_to_string(dims_) +
                                    " vs " + dims_to_string(rhs.dims_));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= rhs.values_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double s, Tensor a) { return a *= s; }

void axpy(double alpha, const Tensor& x, Tensor& y) {
    if (!x.same_dims(y)) {
        throw std::invalid_argument("axpy: dims " + dims_to_string(x.dims()) + " vs " +
                                    dims_to_string(y.dims()));
    }
    auto xv = x.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < xv.size(); ++i) yv[i] += alpha * xv[i];
}

double norm_max(const Tensor& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

double norm_frobenius(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s);
}

Permutation Permutation::identity(int d) {
    Permutation p;
    p.image.resize(static_cast<std::size_t>(d));
    std::iota(p.image.begin(), p.image.end(), 1);
    return p;
}

bool Permutation::valid() const {
    const int d = size();
    std::vector<char> seen(static_cast<std::size_t>(d), 0);
    for (int v : image) {
        if (v < 1 || v > d || seen[static_cast<std::size_t>(v - 1)]) return false;
        seen[static_cast<std::size_t>(v - 1)] = 1;
    }
    return true;
}

Permutation Permutation::inverse() const {
    Permutation inv;
    inv.image.resize(image.size());
    for (int l = 0; l < size(); ++l) inv.image[static_cast<std::size_t>(image[l] - 1)] = l + 1;
    return inv;
}

Tensor contract(const Tensor& a, int mu, const Tensor& b, int nu) {
    check_mode(a, mu, "contract", "A");
    check_mode(b, nu, "contract", "B");
    if (a.order() + b.order() < 3) {
        throw std::invalid_argument("contract: combined order must be at least 3");
    }
    if (a.dim(mu) != b.dim(nu)) {
        throw std::invalid_argument("contract: mode " + std::to_string(mu) + " of A has size " +
                                    std::to_string(a.dim(mu)) + " but mode " + std::to_string(nu) +
                                    " of B has size " + std::to_string(b.dim(nu)));
    }

    std::vector<int> rem_a, rem_b;
    for (int l = 1; l <= a.order(); ++l)
        if (l != mu) rem_a.push_back(a.dim(l));
    for (int l = 1; l <= b.order(); ++l)
        if (l != nu) rem_b.push_back(b.dim(l));
    std::vector<int> rdims = rem_a;
    rdims.insert(rdims.end(), rem_b.begin(), rem_b.end());
    Tensor r(rdims);

    const int K = a.dim(mu);
    const double* A = a.values().data();
    const double* B = b.values().data();
    double* R = r.values().data();
    const std::size_t RA = product_of(rem_a);
    const std::size_t RB = product_of(rem_b);

    if (mu == 1 && nu == 1) {
        // both contracted modes are unit-stride
        for (std::size_t jb = 0; jb < RB; ++jb) {
            const double* bc = B + jb * static_cast<std::size_t>(K);
            for (std::size_t ja = 0; ja < RA; ++ja) {
                const double* ac = A + ja * static_cast<std::size_t>(K);
                double acc = 0.0;
                for (int k = 0; k < K; ++k) acc += ac[k] * bc[k];
                R[ja + RA * jb] = acc;
            }
        }
        return r;
    }
    if (a.order() == 2 && mu == 2 && nu == 1) {
        // plain matrix times (K x RB) block
        const std::size_t n1 = static_cast<std::size_t>(a.dim(1));
        for (std::size_t jb = 0; jb < RB; ++jb) {
            double* rc = R + n1 * jb;
            const double* bc = B + jb * static_cast<std::size_t>(K);
            for (int k = 0; k < K; ++k) {
                const double bk = bc[k];
                if (bk == 0.0) continue;
                const double* ac = A + n1 * static_cast<std::size_t>(k);
                for (std::size_t i = 0; i < n1; ++i) rc[i] += ac[i] * bk;
            }
        }
        return r;
    }

    const auto sa = strides_of(a.dims());
    const auto sb = strides_of(b.dims());
    const std::size_t sak = sa[static_cast<std::size_t>(mu - 1)];
    const std::size_t sbk = sb[static_cast<std::size_t>(nu - 1)];
    std::vector<std::size_t> sa_rem, sb_rem;
    for (int l = 1; l <= a.order(); ++l)
        if (l != mu) sa_rem.push_back(sa[static_cast<std::size_t>(l - 1)]);
    for (int l = 1; l <= b.order(); ++l)
        if (l != nu) sb_rem.push_back(sb[static_cast<std::size_t>(l - 1)]);
    const auto offa = offset_table(rem_a, sa_rem);
    const auto offb = offset_table(rem_b, sb_rem);

    for (std::size_t jb = 0; jb < RB; ++jb) {
        const double* bb = B + offb[jb];
        for (std::size_t ja = 0; ja < RA; ++ja) {
            const double* aa = A + offa[ja];
            double acc = 0.0;
            for (int k = 0; k < K; ++k) {
                acc += aa[static_cast<std::size_t>(k) * sak] *
                       bb[static_cast<std::size_t>(k) * sbk];
            }
            R[ja + RA * jb] = acc;
        }
    }
    return r;
}

Tensor outer(const Tensor& a, const Tensor& b) {
    std::vector<int> rdims = a.dims();
    rdims.insert(rdims.end(), b.dims().begin(), b.dims().end());
    Tensor r(rdims);
    const double* A = a.values().data();
    const double* B = b.values().data();
    double* R = r.values().data();
    const std::size_t SA = a.size();
    for (std::size_t jb = 0; jb < b.size(); ++jb) {
        const double bv = B[jb];
        double* rc = R + SA * jb;
        for (std::size_t ja = 0; ja < SA; ++ja) rc[ja] = A[ja] * bv;
    }
    return r;
}

Tensor reshape_perm(const Tensor& a, const Permutation& sigma) {
    if (sigma.size() != a.order() || !sigma.valid()) {
        throw std::invalid_argument("reshape_perm: permutation is not a bijection of 1.." +
                                    std::to_string(a.order()));
    }
    const int d = a.order();
    const Permutation inv = sigma.inverse();
    // mode q of the result receives index i_q, which appears at position
    // sigma^{-1}(q) of the input, so it inherits that mode's size
    std::vector<int> rdims(static_cast<std::size_t>(d));
    for (int q = 0; q < d; ++q) rdims[static_cast<std::size_t>(q)] = a.dim(inv.image[static_cast<std::size_t>(q)]);
    Tensor r(rdims);

    const auto sa = strides_of(a.dims());
    // effective input stride for output mode q+1 is stride of mode inv(q+1) of a
    std::vector<std::size_t> eff(static_cast<std::size_t>(d));
    for (int q = 0; q < d; ++q)
        eff[static_cast<std::size_t>(q)] = sa[static_cast<std::size_t>(inv.image[static_cast<std::size_t>(q)] - 1)];

    const double* A = a.values().data();
    double* R = r.values().data();
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::size_t in_off = 0;
    for (std::size_t lin = 0; lin < r.size(); ++lin) {
        R[lin] = A[in_off];
        for (int l = 0; l < d; ++l) {
            in_off += eff[static_cast<std::size_t>(l)];
            if (++idx[static_cast<std::size_t>(l)] < rdims[static_cast<std::size_t>(l)]) break;
            in_off -= static_cast<std::size_t>(rdims[static_cast<std::size_t>(l)]) * eff[static_cast<std::size_t>(l)];
            idx[static_cast<std::size_t>(l)] = 0;
        }
    }
    return r;
}

Tensor mode_mul(const Tensor& a, int mu, const Tensor& c) {
    check_mode(a, mu, "mode_mul", "A");
    if (c.order() != 2) throw std::invalid_argument("mode_mul: C must have order 2");
    if (a.dim(mu) != c.dim(1)) {
        throw std::invalid_argument("mode_mul: mode " + std::to_string(mu) + " of A has size " +
                                    std::to_string(a.dim(mu)) + " but C has " +
                                    std::to_string(c.dim(1)) + " rows");
    }
    const int K = c.dim(1);
    const int Mc = c.dim(2);
    std::vector<int> rdims = a.dims();
    rdims[static_cast<std::size_t>(mu - 1)] = Mc;
    Tensor r(rdims);

    std::size_t pre = 1, post = 1;
    for (int l = 1; l < mu; ++l) pre *= static_cast<std::size_t>(a.dim(l));
    for (int l = mu + 1; l <= a.order(); ++l) post *= static_cast<std::size_t>(a.dim(l));

    const double* A = a.values().data();
    const double* C = c.values().data();
    double* R = r.values().data();
    for (std::size_t q = 0; q < post; ++q) {
        for (int j = 0; j < Mc; ++j) {
            double* rc = R + pre * (static_cast<std::size_t>(j) + static_cast<std::size_t>(Mc) * q);
            for (int k = 0; k < K; ++k) {
                const double ckj = C[static_cast<std::size_t>(k) + static_cast<std::size_t>(K) * static_cast<std::size_t>(j)];
                if (ckj == 0.0) continue;
                const double* ac = A + pre * (static_cast<std::size_t>(k) + static_cast<std::size_t>(K) * q);
                for (std::size_t p = 0; p < pre; ++p) rc[p] += ac[p] * ckj;
            }
        }
    }
    return r;
}

std::vector<Permutation> shuffle_set(int i, int j) {
    if (i < 0 || j < 0 || i + j < 1) {
        throw std::invalid_argument("shuffle_set: need i, j >= 0 and i + j >= 1");
    }
    const int m = i + j;
    std::vector<Permutation> out;
    std::vector<int> comb(static_cast<std::size_t>(i));
    std::iota(comb.begin(), comb.end(), 1);
    while (true) {
        Permutation sigma;
        sigma.image.reserve(static_cast<std::size_t>(m));
        sigma.image = comb;
        std::vector<char> in_first(static_cast<std::size_t>(m + 1), 0);
        for (int v : comb) in_first[static_cast<std::size_t>(v)] = 1;
        for (int v = 1; v <= m; ++v)
            if (!in_first[static_cast<std::size_t>(v)]) sigma.image.push_back(v);
        out.push_back(std::move(sigma));

        if (i == 0) break;
        // next i-combination of 1..m in lexicographic order
        int l = i - 1;
        while (l >= 0 && comb[static_cast<std::size_t>(l)] == m - (i - 1 - l)) --l;
        if (l < 0) break;
        ++comb[static_cast<std::size_t>(l)];
        for (int q = l + 1; q < i; ++q)
            comb[static_cast<std::size_t>(q)] = comb[static_cast<std::size_t>(q - 1)] + 1;
    }
    return out;
}

namespace {

// acc += reshape_perm(a, sigma), without materializing the reshape
void add_reshaped(const Tensor& a, const Permutation& sigma, Tensor& acc) {
    const int d = a.order();
    const auto sa = strides_of(a.dims());
    const Permutation inv = sigma.inverse();
    std::vector<std::size_t> eff(static_cast<std::size_t>(d));
    for (int q = 0; q < d; ++q)
        eff[static_cast<std::size_t>(q)] = sa[static_cast<std::size_t>(inv.image[static_cast<std::size_t>(q)] - 1)];

    const double* A = a.values().data();
    double* R = acc.values().data();
    const auto& rdims = acc.dims();
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::size_t in_off = 0;
    for (std::size_t lin = 0; lin < acc.size(); ++lin) {
        R[lin] += A[in_off];
        for (int l = 0; l < d; ++l) {
            in_off += eff[static_cast<std::size_t>(l)];
            if (++idx[static_cast<std::size_t>(l)] < rdims[static_cast<std::size_t>(l)]) break;
            in_off -= static_cast<std::size_t>(rdims[static_cast<std::size_t>(l)]) * eff[static_cast<std::size_t>(l)];
            idx[static_cast<std::size_t>(l)] = 0;
        }
    }
}

}  // namespace

Tensor sym_shuffle(const Tensor& t, int i, int j) {
    if (t.order() != i + j) {
        throw std::invalid_argument("sym_shuffle: order " + std::to_string(t.order()) +
                                    " does not equal i + j = " + std::to_string(i + j));
    }
    if (!t.all_dims_equal()) {
        throw std::invalid_argument("sym_shuffle: all mode dimensions must be equal");
    }
    Tensor acc(t.dims());
    for (const Permutation& sigma : shuffle_set(i, j)) add_reshaped(t, sigma, acc);
    return acc;
}

Tensor symmetrize_full(const Tensor& t) {
    if (!t.all_dims_equal()) {
        throw std::invalid_argument("symmetrize_full: all mode dimensions must be equal");
    }
    const int d = t.order();
    if (d == 1) return t;
    const int n = t.dim(1);

    // Averaging over all d! index permutations equals averaging each entry
    // over its sorted-multi-index class; two passes instead of d! reshapes.
    const std::size_t sz = t.size();
    std::vector<double> sums(sz, 0.0);
    std::vector<std::uint32_t> counts(sz, 0);
    std::vector<std::uint32_t> keys(sz);

    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    std::vector<int> sorted(static_cast<std::size_t>(d));
    const double* V = t.values().data();
    for (std::size_t lin = 0; lin < sz; ++lin) {
        sorted.assign(idx.begin(), idx.end());
        std::sort(sorted.begin(), sorted.end());
        std::size_t key = 0;
        for (int l = d - 1; l >= 0; --l)
            key = key * static_cast<std::size_t>(n) + static_cast<std::size_t>(sorted[static_cast<std::size_t>(l)]);
        keys[lin] = static_cast<std::uint32_t>(key);
        sums[key] += V[lin];
        ++counts[key];

        for (int l = 0; l < d; ++l) {
            if (++idx[static_cast<std::size_t>(l)] < n) break;
            idx[static_cast<std::size_t>(l)] = 0;
        }
    }
    Tensor r(t.dims());
    double* R = r.values().data();
    for (std::size_t lin = 0; lin < sz; ++lin) {
        const std::uint32_t key = keys[lin];
        R[lin] = sums[key] / static_cast<double>(counts[key]);
    }
    return r;
}

bool is_symmetric(const Tensor& t, double tol) {
    if (!t.all_dims_equal()) {
        throw std::invalid_argument("is_symmetric: all mode dimensions must be equal");
    }
    const Tensor s = symmetrize_full(t);
    double dev = 0.0;
    auto tv = t.values();
    auto sv = s.values();
    for (std::size_t i = 0; i < tv.size(); ++i) dev = std::max(dev, std::abs(tv[i] - sv[i]));
    return dev <= tol * (1.0 + norm_max(t));
}

namespace {

struct LdltFactor {
    int n = 0;
    std::vector<double> w;    // packed factor; L below diagonal, D on it
    std::vector<int> perm;    // pivot order
    double min_pivot = std::numeric_limits<double>::infinity();
    bool positive_definite = false;
    double threshold = 0.0;
};

LdltFactor ldlt_pivoted(const Tensor& m) {
    const int n = m.dim(1);
    LdltFactor f;
    f.n = n;
    f.w.assign(m.values().begin(), m.values().end());
    f.perm.resize(static_cast<std::size_t>(n));
    std::iota(f.perm.begin(), f.perm.end(), 0);
    auto W = [&](int i, int j) -> double& {
        return f.w[static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * static_cast<std::size_t>(j)];
    };
    double trace = 0.0;
    for (int i = 0; i < n; ++i) trace += W(i, i);
    f.threshold = trace > 0.0 ? 1e-12 * trace / n : 0.0;

    for (int k = 0; k < n; ++k) {
        int r = k;
        for (int i = k + 1; i < n; ++i)
            if (W(i, i) > W(r, r)) r = i;
        if (r != k) {
            for (int j = 0; j < n; ++j) std::swap(W(k, j), W(r, j));
            for (int i = 0; i < n; ++i) std::swap(W(i, k), W(i, r));
            std::swap(f.perm[static_cast<std::size_t>(k)], f.perm[static_cast<std::size_t>(r)]);
        }
        const double piv = W(k, k);
        f.min_pivot = std::min(f.min_pivot, piv);
        if (!(piv > f.threshold) || !(piv > 0.0) || !std::isfinite(piv)) {
            f.positive_definite = false;
            return f;
        }
        for (int i = k + 1; i < n; ++i) {
            const double lik = W(i, k) / piv;
            for (int j = k + 1; j <= i; ++j) W(i, j) -= lik * W(k, j);
            W(i, k) = lik;
        }
        for (int i = k + 1; i < n; ++i)
            for (int j = i + 1; j < n; ++j) W(i, j) = W(j, i);
    }
    f.positive_definite = true;
    return f;
}

std::vector<double> ldlt_solve(const LdltFactor& f, std::span<const double> b) {
    const int n = f.n;
    auto W = [&](int i, int j) {
        return f.w[static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * static_cast<std::size_t>(j)];
    };
    std::vector<double> z(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(f.perm[static_cast<std::size_t>(i)])];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) z[static_cast<std::size_t>(i)] -= W(i, j) * z[static_cast<std::size_t>(j)];
    for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] /= W(i, i);
    for (int i = n - 1; i >= 0; --i)
        for (int j = i + 1; j < n; ++j) z[static_cast<std::size_t>(i)] -= W(j, i) * z[static_cast<std::size_t>(j)];
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(f.perm[static_cast<std::size_t>(i)])] = z[static_cast<std::size_t>(i)];
    return x;
}

void check_spd_inputs(const Tensor& m, const Tensor* b) {
    if (m.order() != 2 || m.dim(1) != m.dim(2)) {
        throw std::invalid_argument("spd_solve: M must be a square order-2 tensor");
    }
    const int n = m.dim(1);
    double asym = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) asym = std::max(asym, std::abs(m(i, j) - m(j, i)));
    if (asym > 1e-8 * (1.0 + norm_max(m))) {
        throw std::invalid_argument("spd_solve: M not symmetric within 1e-8 relative tolerance");
    }
    if (b && (b->order() != 1 || b->dim(1) != n)) {
        throw std::invalid_argument("spd_solve: b must be an order-1 tensor of size " +
                                    std::to_string(n));
    }
}

}  // namespace

Tensor spd_solve(const Tensor& m, const Tensor& b, double* min_pivot) {
    check_spd_inputs(m, &b);
    const LdltFactor f = ldlt_pivoted(m);
    if (min_pivot) *min_pivot = f.min_pivot;
    if (!f.positive_definite) throw NotPositiveDefinite(f.min_pivot, f.threshold);
    return Tensor::vector(ldlt_solve(f, b.values()));
}

std::optional<Tensor> try_spd_solve(const Tensor& m, const Tensor& b, double* min_pivot) {
    check_spd_inputs(m, &b);
    const LdltFactor f = ldlt_pivoted(m);
    if (min_pivot) *min_pivot = f.min_pivot;
    if (!f.positive_definite) return std::nullopt;
    return Tensor::vector(ldlt_solve(f, b.values()));
}

Tensor spd_inverse(const Tensor& m) {
    check_spd_inputs(m, nullptr);
    const int n = m.dim(1);
    const LdltFactor f = ldlt_pivoted(m);
    if (!f.positive_definite) throw NotPositiveDefinite(f.min_pivot, f.threshold);
    Tensor inv({n, n});
    std::vector<double> e(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
        e[static_cast<std::size_t>(j)] = 1.0;
        const auto col = ldlt_solve(f, e);
        e[static_cast<std::size_t>(j)] = 0.0;
        for (int i = 0; i < n; ++i) inv(i, j) = col[static_cast<std::size_t>(i)];
    }
    return inv;
}

Tensor transpose(const Tensor& a) {
    if (a.order() != 2) throw std::invalid_argument("transpose: order-2 tensor required");
    return reshape_perm(a, Permutation{{2, 1}});
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.order() != 2 || b.order() != 2) {
        throw std::invalid_argument("matmul: order-2 tensors required");
    }
    return mode_mul(a, 2, b);
}

Tensor matvec(const Tensor& a, const Tensor& x) {
    if (a.order() != 2 || x.order() != 1) {
        throw std::invalid_argument("matvec: order-2 and order-1 tensors required");
    }
    return contract(a, 2, x, 1);
}

}  // namespace hoekf
