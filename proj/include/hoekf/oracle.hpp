#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hoekf/model.hpp"
#include "hoekf/observer.hpp"
#include "hoekf/tensor.hpp"

namespace hoekf {

/// Gradient-descent configuration for the open-loop solves.
struct GDConfig {
    double rel_tol = 1e-6;      // gradient-norm reduction target
    int max_iters = 600;
    int inner_grid_points = 501;  // nodes of the uniform grid on [0, t]
    double fd_step = 1e-3;        // relative step for Hessian differencing
    double first_step = 1e-4;     // fixed first step before the secant rule
};

/// Solution of the disturbance-attribution problem at a query point (t, xi):
/// the control v minimizing the energy functional subject to the dynamics
/// ending at x(t) = xi, together with the state and adjoint trajectories on
/// the uniform inner grid and the attained value.
struct OpenLoopSolution {
    double t = 0.0;
    std::vector<double> xi;
    double value = 0.0;
    int grid_points = 0;
    std::vector<double> control;  // node-major, m per node
    std::vector<double> state;    // node-major, n per node
    std::vector<double> adjoint;  // node-major, n per node
    int iterations = 0;
    bool converged = false;
    double grad_norm = 0.0;

    std::span<const double> state_at(int node, int n) const {
        return {state.data() + static_cast<std::size_t>(node) * static_cast<std::size_t>(n),
                static_cast<std::size_t>(n)};
    }
};

struct HessianInfo {
    double asym_residual = 0.0;  // max-norm of the skew part before symmetrization
    bool spd = false;
    double min_pivot = 0.0;
    bool converged = false;  // all underlying solves converged
};

/// Reference minimum-energy (Mortensen) observer machinery: value-function
/// evaluation by adjoint gradient descent with Barzilai-Borwein steps,
/// derivative evaluation, direct minimization, and observer-equation
/// integration. Pure evaluations; solves at distinct (t, xi) are independent.
class MortensenOracle {
public:
    MortensenOracle(const SystemModel& model, const Weights& w, const Signal& y,
                    std::vector<double> x0, GDConfig cfg = {});

    const GDConfig& config() const noexcept { return cfg_; }

    /// Minimizes the energy functional over the discretized control. A
    /// non-converged solve returns its best iterate with converged = false.
    /// t = 0 is the exact quadratic case (no control interval).
    OpenLoopSolution solve_open_loop(double t, std::span<const double> xi,
                                     const OpenLoopSolution* warm_start = nullptr) const;

    /// Spatial gradient of the value function: the terminal adjoint of the
    /// converged open-loop solution.
    std::vector<double> value_grad(double t, std::span<const double> xi,
                                   const OpenLoopSolution* warm_start = nullptr,
                                   OpenLoopSolution* solution_out = nullptr) const;

    /// Symmetrized central finite differences of value_grad. Positive
    /// definiteness is reported, not enforced.
    Tensor value_hessian(double t, std::span<const double> xi,
                         const OpenLoopSolution* warm_start = nullptr,
                         HessianInfo* info = nullptr,
                         OpenLoopSolution* center_out = nullptr) const;

    /// Gradient descent on xi -> value(t, xi) with Barzilai-Borwein steps.
    std::vector<double> minimize_value(double t, std::span<const double> x_init,
                                       bool* converged = nullptr) const;

    /// Fixed-step RK4 integration of the observer equation, with the gain
    /// built from value_hessian at every stage (warm-started solves). Stops
    /// with a partial trajectory when the open-loop solves stop converging.
    /// Guarded to small state dimensions.
    ObserverTrajectory integrate_mortensen(double T_obs, int grid_points) const;

private:
    struct Evaluation {
        bool finite = false;
        double value = 0.0;
        std::vector<double> state;
        std::vector<double> state_dot;
        std::vector<double> adjoint;
        std::vector<double> gradient;
        double grad_norm = 0.0;
    };
    Evaluation evaluate(double t, std::span<const double> xi,
                        std::span<const double> control) const;
    OpenLoopSolution solve_with_tol(double t, std::span<const double> xi,
                                    const OpenLoopSolution* warm_start, double rel_tol) const;

    const SystemModel& model_;
    const Weights& w_;
    const Signal& y_;
    std::vector<double> x0_;
    GDConfig cfg_;
};

}  // namespace hoekf
