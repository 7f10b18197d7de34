#pragma once

#include <array>
#include <utility>
#include <vector>

#include "hoekf/model.hpp"
#include "hoekf/tensor.hpp"

namespace hoekf {

/// Spectral semi-discretization of the defocusing cubic wave equation
/// u_tt + u^3 = Lap(u) on the unit square with homogeneous Dirichlet
/// boundary, in the sine basis phi_{i,j}(x,y) = sin(pi i x) sin(pi j y)
/// truncated to i + j <= K. The basis is orthogonal in both L2 and H1_0,
/// so the mass and stiffness matrices are diagonal. The first-order state
/// z = Ttrafo * (coordinates of (u, u_t)) makes the energy norm Euclidean.
struct WaveDiscretization {
    int K = 0;
    int N = 0;  // K(K-1)/2 basis functions
    int p = 0;  // sensor count
    std::vector<std::pair<int, int>> index_set;
    Tensor M;       // N x N mass matrix (diagonal, 1/4 * I on the unit square)
    Tensor S;       // N x N stiffness matrix (diagonal)
    Tensor Ttrafo;  // 2N x 2N block transform diag(S^1/2, M^1/2)
    Tensor A;       // 2N x 2N drift (skew-symmetric)
    Tensor B;       // 2N x N disturbance input map (0; Id)
    Tensor C;       // p x 2N output matrix (sensor averages of displacement)
    Tensor T4;      // N^4 tensor of quadruple basis products over the domain
    std::vector<std::array<double, 2>> sensors;
    double ell = 0.0;  // sensor squares have side 2*ell

    /// Transformed coordinates of a displacement/velocity coefficient pair.
    std::vector<double> to_state(std::span<const double> displacement,
                                 std::span<const double> velocity) const;
};

/// Composition of the cubic term in the transformed state.
///   stiffness_scaled: dz2/dt gains -M^{-1/2} g(S^{-1/2} z1), the first-order
///     reduction of the continuous defocusing equation (default);
///   mass_scaled:      dz2/dt gains +M^{-1/2} g(M^{-1/2} z1), kept as a
///     configuration variant for comparison.
enum class WaveCubicForm { stiffness_scaled, mass_scaled };

class WaveModel final : public SystemModel {
public:
    WaveModel(int K, std::vector<std::array<double, 2>> sensors, double ell,
              WaveCubicForm form = WaveCubicForm::stiffness_scaled);
    WaveModel(WaveDiscretization disc, WaveCubicForm form);

    const WaveDiscretization& disc() const noexcept { return disc_; }
    WaveCubicForm form() const noexcept { return form_; }

    using SystemModel::f;
    using SystemModel::h;
    void f(std::span<const double> xi, std::span<double> out) const override;
    Tensor df(std::span<const double> xi, int order) const override;
    void h(std::span<const double> xi, std::span<double> out) const override;
    Tensor dh(std::span<const double> xi, int order) const override;

private:
    WaveDiscretization disc_;
    WaveCubicForm form_;
    double sign_;                // of the cubic contribution to dz2/dt
    std::vector<double> wdiag_;  // diagonal of the argument scaling
    std::vector<double> mdiag_;  // diagonal of M^{-1/2}
    std::vector<double> ddiag_;  // diagonal of S^{1/2} M^{-1/2}

    std::vector<double> scaled_displacement(std::span<const double> xi) const;
};

/// Assembles the truncated model for a given sensor layout. Every sensor
/// square must lie inside the open unit square.
WaveModel wave_model(int K, std::vector<std::array<double, 2>> sensors, double ell,
                     WaveCubicForm form = WaveCubicForm::stiffness_scaled);

/// p*p sensor centers on the equidistant interior grid {(i/(p+1), j/(p+1))}.
std::vector<std::array<double, 2>> sensor_grid(int per_side);

/// Closed-form 1D integral of sin(pi a x) sin(pi b x) sin(pi c x) sin(pi d x)
/// over [0, 1] for positive integer frequencies.
double quad_sine_integral(int a, int b, int c, int d);

}  // namespace hoekf
