#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hoekf {

struct IntegratorConfig {
    double rtol = 1e-6;
    double atol = 1e-8;
    long max_steps = 2'000'000;
    double min_step = 0.0;      // <= 0: 1e-12 * span
    double initial_step = 0.0;  // <= 0: automatic
};

/// Right-hand side callback. Writes the derivative into dv and returns false
/// to signal a breakdown (the state left the domain where the flow exists).
using OdeRhs = std::function<bool(double t, std::span<const double> v, std::span<double> dv)>;

enum class OdeStatus { completed, breakdown };

struct OdeBreakdown {
    double t = 0.0;
    std::string reason;
};

/// View of one accepted integration step; spans are valid only inside the
/// observer callback.
struct OdeStepView {
    double t0 = 0.0, t1 = 0.0;
    std::span<const double> y0, y1;
    std::span<const double> f0, f1;                 // derivatives at the nodes
    std::array<std::span<const double>, 5> rcont;   // dense-output coefficients

    /// Dense output at t in [t0, t1] (4th-order continuous extension).
    void eval(double t, std::span<double> out) const;
};

/// Step observer; returning false halts the integration (recorded as a
/// breakdown at the step's end time).
using OdeStepObserver = std::function<bool(const OdeStepView&)>;

struct DenseTrajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<std::array<std::vector<double>, 5>> rcont;  // one set per interval
    OdeStatus status = OdeStatus::completed;
    std::optional<OdeBreakdown> breakdown;

    int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
    double t_front() const { return times.front(); }
    double t_back() const { return times.back(); }
    void eval(double t, std::span<double> out) const;
    std::vector<double> eval(double t) const;
};

/// Adaptive Dormand-Prince 4(5) integration over [t0, t1] with PI step-size
/// control on the embedded error estimate (mixed tolerance atol + rtol*|v|).
/// Breakdowns (rhs signal, step-size underflow, step budget) are encoded in
/// the returned status, never thrown.
DenseTrajectory rk45_adaptive(const OdeRhs& rhs, std::span<const double> v0, double t0,
                              double t1, const IntegratorConfig& cfg = {});

/// Streaming variant: invokes the observer after each accepted step instead
/// of accumulating a trajectory.
OdeStatus rk45_observe(const OdeRhs& rhs, std::span<const double> v0, double t0, double t1,
                       const IntegratorConfig& cfg, const OdeStepObserver& observer,
                       std::optional<OdeBreakdown>* breakdown = nullptr);

struct FixedGridResult {
    std::vector<std::vector<double>> states;  // one per grid node; truncated on breakdown
    OdeStatus status = OdeStatus::completed;
    int failed_node = -1;
    std::optional<OdeBreakdown> breakdown;
};

/// Classical fixed-step RK4 on a uniform grid. The grid may decrease, which
/// integrates in reverse time. A non-finite state or an rhs breakdown stops
/// the sweep at the offending node.
FixedGridResult rk4_fixed(const OdeRhs& rhs, std::span<const double> v0,
                          std::span<const double> grid);

}  // namespace hoekf
