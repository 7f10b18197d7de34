#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hoekf/ode.hpp"
#include "hoekf/tensor.hpp"

namespace hoekf {

/// Description of a disturbed system dx/dt = f(x) + G v(t), y = h(x) + mu(t).
///
/// Derivative tensors use the convention
///   df(xi, k)[i, j_1, ..., j_k] = d_{j_k} ... d_{j_1} f_i(xi),
/// so df(xi, 1) is the Jacobian (rows = output components) and every
/// derivative tensor is symmetric in its trailing k modes. Orders above
/// f_degree() / h_degree() are identically zero but still supplied.
class SystemModel {
public:
    SystemModel(int n, int m, int p, Tensor g, int f_degree, int h_degree);
    virtual ~SystemModel() = default;

    int state_dim() const noexcept { return n_; }
    int disturbance_dim() const noexcept { return m_; }
    int output_dim() const noexcept { return p_; }
    const Tensor& G() const noexcept { return g_; }

    /// Largest derivative order this model can supply.
    virtual int max_order() const noexcept { return 1 << 20; }
    int f_degree() const noexcept { return f_degree_; }
    int h_degree() const noexcept { return h_degree_; }

    virtual void f(std::span<const double> xi, std::span<double> out) const = 0;
    virtual Tensor df(std::span<const double> xi, int order) const = 0;
    virtual void h(std::span<const double> xi, std::span<double> out) const = 0;
    virtual Tensor dh(std::span<const double> xi, int order) const = 0;

    std::vector<double> f(std::span<const double> xi) const;
    std::vector<double> h(std::span<const double> xi) const;

protected:
    Tensor zero_df(int order) const;  // (n, n, ..., n), order+1 modes
    Tensor zero_dh(int order) const;  // (p, n, ..., n)
    void check_state(std::span<const double> xi) const;
    void check_order(int order) const;

private:
    int n_, m_, p_;
    Tensor g_;
    int f_degree_, h_degree_;
};

/// f(xi) = A xi, h(xi) = C xi.
class LinearModel final : public SystemModel {
public:
    LinearModel(Tensor a, Tensor c, Tensor g);
    const Tensor& A() const noexcept { return a_; }
    const Tensor& C() const noexcept { return c_; }

    using SystemModel::f;
    using SystemModel::h;
    void f(std::span<const double> xi, std::span<double> out) const override;
    Tensor df(std::span<const double> xi, int order) const override;
    void h(std::span<const double> xi, std::span<double> out) const override;
    Tensor dh(std::span<const double> xi, int order) const override;

private:
    Tensor a_, c_;
};

/// Forced oscillator with cubic stiffness:
///   dx1/dt = x2,
///   dx2/dt = -lambda x1 - delta x2 - beta x1^3 + v,
/// measured through y = x1. Chaotic for the packaged parameter set.
class DuffingModel final : public SystemModel {
public:
    DuffingModel(double lambda, double beta, double delta);
    double lambda() const noexcept { return lambda_; }
    double beta() const noexcept { return beta_; }
    double delta() const noexcept { return delta_; }
    Tensor A() const;  // linear part
    Tensor C() const;

    using SystemModel::f;
    using SystemModel::h;
    void f(std::span<const double> xi, std::span<double> out) const override;
    Tensor df(std::span<const double> xi, int order) const override;
    void h(std::span<const double> xi, std::span<double> out) const override;
    Tensor dh(std::span<const double> xi, int order) const override;

private:
    double lambda_, beta_, delta_;
};

LinearModel linear_model(Tensor a, Tensor c, Tensor g);
DuffingModel duffing_model(double lambda, double beta, double delta);

/// Symmetric positive definite weighting matrices of the estimation cost.
struct Weights {
    Tensor Gamma;  // n x n, initial-state weight
    Tensor Rw;     // m x m, process-disturbance weight
    Tensor Q;      // p x p, output weight

    Weights(Tensor gamma, Tensor rw, Tensor q);
    static Weights identities(int n, int m, int p);
};

/// Disturbance realization used to manufacture truth data: initial state
/// x0 + eta, process disturbance v(t), measurement disturbance mu(t).
/// mu_dot is optional (finite differences of mu are used when absent).
struct DisturbanceSpec {
    std::vector<double> x0;
    std::vector<double> eta;
    std::function<void(double, std::span<double>)> v;
    std::function<void(double, std::span<double>)> mu;
    std::function<void(double, std::span<double>)> mu_dot;

    static DisturbanceSpec none(int n, int m, int p);
};

/// Time-continuous vector signal on [0, T], realized as a cubic Hermite
/// interpolant over a strictly increasing sample grid. Evaluation is only
/// defined inside [0, T]; grid samples are reproduced exactly.
class Signal {
public:
    Signal(std::vector<double> grid, std::vector<double> values,
           std::vector<double> derivatives, int dim);

    int dim() const noexcept { return dim_; }
    double horizon() const noexcept { return grid_.back(); }
    int nodes() const noexcept { return static_cast<int>(grid_.size()); }
    double node_time(int i) const { return grid_[static_cast<std::size_t>(i)]; }
    std::span<const double> node_value(int i) const;
    std::span<const double> node_derivative(int i) const;

    void eval(double t, std::span<double> out) const;
    std::vector<double> eval(double t) const;

private:
    std::vector<double> grid_;
    std::vector<double> values_;  // node-major
    std::vector<double> derivs_;
    int dim_;
    bool uniform_;
};

struct TruthResult {
    Signal state;
    Signal measurement;
};

/// Integrates the disturbed dynamics from x0 + eta on a dense uniform grid
/// (tolerances one decade tighter than observer runs by default) and builds
/// the state trajectory and the measured output y = h(x) + mu as Signals.
/// Throws on integration failure, reporting the blow-up time.
TruthResult simulate_truth(const SystemModel& model, const DisturbanceSpec& dist, double T,
                           int grid_points, const IntegratorConfig& cfg = {1e-7, 1e-9});

}  // namespace hoekf
