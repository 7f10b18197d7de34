#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hoekf {

/// Thrown by spd_solve when the pivoted factorization detects loss of
/// positive definiteness. Carries the offending pivot and the threshold.
class NotPositiveDefinite : public std::runtime_error {
public:
    NotPositiveDefinite(double pivot, double threshold);
    double pivot() const noexcept { return pivot_; }
    double threshold() const noexcept { return threshold_; }

private:
    double pivot_;
    double threshold_;
};

/// Dense real tensor of order d >= 1 with dimensions (n_1, ..., n_d).
///
/// Values are stored with the first index varying fastest:
///   linear(i_1, ..., i_d) = i_1 + n_1*(i_2 + n_2*(i_3 + ...)).
/// Element indices are zero-based. Mode arguments of the free operations
/// (mu, nu) are one-based, as in the documentation and error messages.
class Tensor {
public:
    Tensor() = default;  // empty placeholder, order 0
    explicit Tensor(std::vector<int> dims);
    Tensor(std::vector<int> dims, std::vector<double> values);

    static Tensor vector(std::vector<double> v);
    static Tensor matrix(int rows, int cols);
    static Tensor matrix_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor identity(int n);
    static Tensor diag(std::span<const double> d);
    /// Zero tensor in (x)^order R^n (all modes of size n).
    static Tensor cube(int order, int n);

    int order() const noexcept { return static_cast<int>(dims_.size()); }
    const std::vector<int>& dims() const noexcept { return dims_; }
    int dim(int mu) const;  // one-based mode
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    template <class... I>
    double operator()(I... idx) const {
        return values_[linear_index({static_cast<int>(idx)...})];
    }
    template <class... I>
    double& operator()(I... idx) {
        return values_[linear_index({static_cast<int>(idx)...})];
    }

    std::size_t linear_index(std::initializer_list<int> idx) const;
    bool same_dims(const Tensor& other) const noexcept { return dims_ == other.dims_; }
    bool all_dims_equal() const noexcept;

    Tensor& operator+=(const Tensor& rhs);
    Tensor& operator-=(const Tensor& rhs);
    Tensor& operator*=(double s);

private:
    std::vector<int> dims_;
    std::vector<double> values_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double s, Tensor a);

/// y += alpha * x; dims must match.
void axpy(double alpha, const Tensor& x, Tensor& y);

double norm_max(const Tensor& a);
double norm_frobenius(const Tensor& a);

/// Permutation of {1, ..., d}, stored as its images (sigma(1), ..., sigma(d)).
struct Permutation {
    std::vector<int> image;

    static Permutation identity(int d);
    int size() const noexcept { return static_cast<int>(image.size()); }
    bool valid() const;
    Permutation inverse() const;
    bool operator==(const Permutation&) const = default;
};

/// Contraction pairing mode mu of a with mode nu of b. The result carries
/// a's remaining modes followed by b's remaining modes (order d+l-2 >= 1,
/// so the combined input order must be at least 3).
Tensor contract(const Tensor& a, int mu, const Tensor& b, int nu);

/// Tensor product; result dims are dims(a) ++ dims(b).
Tensor outer(const Tensor& a, const Tensor& b);

/// Reshape isomorphism: result[i_1,...,i_d] = a[i_sigma(1),...,i_sigma(d)].
/// Mode q of the result therefore has the size of mode sigma^{-1}(q) of the
/// input. Applying sigma and then its inverse restores the input exactly.
Tensor reshape_perm(const Tensor& a, const Permutation& sigma);

/// Mode product a x_mu c for an order-2 tensor c: contracts mode mu of a
/// with the first mode of c and restores mode order, i.e.
///   result[..., i_mu, ...] = sum_k a[..., k, ...] * c[k, i_mu].
Tensor mode_mul(const Tensor& a, int mu, const Tensor& c);

/// All sigma in S_{i+j} increasing on {1..i} and on {i+1..i+j}, enumerated in
/// lexicographic order of the first block. Cardinality is binomial(i+j, i).
std::vector<Permutation> shuffle_set(int i, int j);

/// Shuffle symmetrization: sum (not average) of reshape_perm(t, sigma) over
/// shuffle_set(i, j). Requires order(t) == i+j and equal mode dimensions.
Tensor sym_shuffle(const Tensor& t, int i, int j);

/// Projection onto fully symmetric tensors: average of all d! reshapes.
/// Idempotent; fixes symmetric inputs.
Tensor symmetrize_full(const Tensor& t);

/// True iff max-norm of t - symmetrize_full(t) <= tol * (1 + max-norm of t).
bool is_symmetric(const Tensor& t, double tol);

/// Solve m*x = b for a symmetric positive definite order-2 tensor m using a
/// diagonally pivoted LDL^T factorization; never forms the inverse. The
/// smallest pivot is reported through min_pivot when non-null. Throws
/// NotPositiveDefinite when the smallest pivot drops to 1e-12 * trace(m)/n
/// or below. m must be symmetric within 1e-8 relative tolerance.
Tensor spd_solve(const Tensor& m, const Tensor& b, double* min_pivot = nullptr);

/// Non-throwing spd_solve; nullopt on loss of positive definiteness.
std::optional<Tensor> try_spd_solve(const Tensor& m, const Tensor& b,
                                    double* min_pivot = nullptr);

/// Inverse of a symmetric positive definite matrix (column-wise spd_solve).
Tensor spd_inverse(const Tensor& m);

// Order-1/2 conveniences used throughout the observer assembly.
Tensor transpose(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matvec(const Tensor& a, const Tensor& x);

}  // namespace hoekf
