#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hoekf/model.hpp"
#include "hoekf/ode.hpp"
#include "hoekf/tensor.hpp"

namespace hoekf {

/// State of the order-k observer: estimate x and the family P_2, ..., P_k of
/// fully symmetric derivative tensors of the value function along the
/// estimate (P_2 is kept symmetric positive definite).
struct ObserverState {
    std::vector<double> x;
    std::vector<Tensor> P;  // P[j-2] holds P_j

    int dim() const noexcept { return static_cast<int>(x.size()); }
    int order() const noexcept { return static_cast<int>(P.size()) + 1; }
    const Tensor& Pj(int j) const { return P.at(static_cast<std::size_t>(j - 2)); }
    Tensor& Pj(int j) { return P.at(static_cast<std::size_t>(j - 2)); }
};

/// x = x0, P_2 = Gamma, P_j = 0 for 3 <= j <= k. Gamma must be SPD.
ObserverState initial_state(int k, std::span<const double> x0, const Tensor& gamma);

std::size_t flat_dim(int n, int k);
std::vector<double> flatten(const ObserverState& s);
ObserverState unflatten(std::span<const double> v, int n, int k);

struct HoekfOptions {
    /// Flip the sign of the P_{j+1} transport coupling (the term produced by
    /// the moving expansion point). The default positive sign is the one
    /// consistent with the Hessian evolution along the estimate; the negated
    /// variant is kept for comparison only.
    bool negate_transport_coupling = false;
    /// Project each dP_j/dt onto fully symmetric tensors (cheap at the
    /// dimensions this library targets).
    bool project_symmetric = true;
};

/// Source tensor R_ell of the generalized differential Lyapunov equation,
/// evaluated at the observer state: couples lower-order P tensors with the
/// derivative tensors of f and h and the output innovation.
Tensor compute_R(int ell, const ObserverState& s, const SystemModel& model,
                 std::span<const double> y_t, const Weights& w);

/// Pre-assembled observer problem; rhs() is a pure function of its inputs.
class HoekfProblem {
public:
    HoekfProblem(const SystemModel& model, const Weights& w, const Signal& y, int k,
                 HoekfOptions opt = {});

    int order() const noexcept { return k_; }
    const Tensor& disturbance_weight() const noexcept { return grg_; }  // G R^{-1} G^T

    /// Writes the time derivative of s into ds. Returns false when P_2 stops
    /// being positive definite (observer breakdown at time t).
    bool rhs(double t, const ObserverState& s, ObserverState& ds) const;

    Tensor source_term(int ell, const ObserverState& s, std::span<const double> y_t) const;

private:
    const SystemModel& model_;
    const Weights& w_;
    const Signal& y_;
    int k_;
    HoekfOptions opt_;
    Tensor grg_;
};

/// One-shot variant of HoekfProblem::rhs for tests and exploration.
bool hoekf_rhs(double t, const ObserverState& s, const SystemModel& model, const Weights& w,
               const Signal& y, ObserverState& ds, const HoekfOptions& opt = {});

enum class ObserverKind { hoekf, covariance_filter, mortensen };

struct ObserverDiagnostics {
    std::vector<double> min_pivot;   // smallest P_2 pivot per accepted node
    std::vector<double> max_p_norm;  // running max of ||P_j||_max, slot j-2
};

/// Time-discrete record of an observer run. The estimate component is always
/// stored densely (cubic Hermite interpolation between accepted nodes); the
/// full tensor state is kept only for small problems or on request, plus
/// explicit snapshots at configured times. A breakdown ends the record early
/// instead of raising.
class ObserverTrajectory {
public:
    ObserverKind kind = ObserverKind::hoekf;
    int n = 0;
    int k = 0;  // observer order; 2 for covariance filters, 0 for mortensen
    OdeStatus status = OdeStatus::completed;
    std::optional<OdeBreakdown> breakdown;
    std::vector<double> times;
    std::vector<double> x_nodes;     // n per node
    std::vector<double> xdot_nodes;  // n per node
    ObserverDiagnostics diag;
    std::vector<std::pair<double, ObserverState>> snapshots;
    std::optional<DenseTrajectory> full;

    double t_begin() const { return times.front(); }
    double t_end() const { return times.back(); }
    void eval_x(double t, std::span<double> out) const;
    std::vector<double> eval_x(double t) const;
    bool has_full() const noexcept { return full.has_value(); }
    /// Full state at t (requires full storage). For covariance filters the
    /// P_2 slot carries the covariance.
    ObserverState eval_state(double t) const;
};

struct RunOptions {
    IntegratorConfig ode;
    HoekfOptions hoekf;
    std::vector<double> snapshot_times;
    enum class Storage { automatic, full, slim } storage = Storage::automatic;
};

/// Integrates the order-k observer from initial_state(k, x0, Gamma) over
/// [0, T]. Breakdown is reported through the trajectory status.
ObserverTrajectory run_hoekf(int k, const SystemModel& model, const Weights& w, const Signal& y,
                             std::span<const double> x0, double T, const RunOptions& opt = {});

/// Same, from a caller-supplied initial observer state (e.g. derivative
/// tensors of a non-quadratic initial penalty).
ObserverTrajectory run_hoekf(ObserverState s0, const SystemModel& model, const Weights& w,
                             const Signal& y, double T, const RunOptions& opt = {});

/// Extended Kalman filter in covariance form: the (x, Sigma) system with
/// Sigma(0) = Gamma^{-1}; no matrix inversion inside the right-hand side.
ObserverTrajectory run_ekf(const SystemModel& model, const Weights& w, const Signal& y,
                           std::span<const double> x0, double T, const RunOptions& opt = {});

/// Kalman filter for linear dynamics/measurements (A, C).
ObserverTrajectory run_kf(const Tensor& a, const Tensor& c, const Tensor& g, const Weights& w,
                          const Signal& y, std::span<const double> x0, double T,
                          const RunOptions& opt = {});

struct DistanceSeries {
    std::vector<double> t;
    std::vector<double> d;  // NaN where the reference norm vanishes
};

/// Relative estimate distance ||x_k(t) - x_ref(t)|| / ||x_ref(t)|| on the
/// given grid, clipped to the time span covered by both trajectories.
DistanceSeries relative_distance(const ObserverTrajectory& traj, const ObserverTrajectory& ref,
                                 std::span<const double> grid);

}  // namespace hoekf
