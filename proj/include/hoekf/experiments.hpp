#pragma once

#include <vector>

#include "hoekf/model.hpp"
#include "hoekf/wave.hpp"

namespace hoekf {

/// Packaged chaotic-oscillator benchmark: cubic stiffness, scalar position
/// measurement, harmonic process disturbance and sinusoidal measurement
/// disturbance on [0, T].
struct DuffingSetup {
    double lambda = -1.0;
    double beta = 1.0;
    double delta = 0.3;
    double v_amp = 0.5;    // process disturbance v(t) = v_amp * cos(v_freq * t)
    double v_freq = 1.2;
    double mu_amp = 0.05;  // measurement disturbance mu(t) = mu_amp * sin(2 pi t)
    std::vector<double> x0{0.0, 0.0};
    std::vector<double> eta{-1.216, 0.493};
    double T = 10.0;
    int truth_grid = 10001;
    double q = 2.0;      // output weight (1x1)
    double gamma = 1.0;  // initial-state weight Gamma = gamma * I
    double r = 1.0;      // disturbance weight (1x1)

    DuffingModel make_model() const;
    Weights make_weights() const;
    DisturbanceSpec make_disturbance() const;
};

/// Packaged semi-discretized cubic wave benchmark: K = 4 sine modes
/// (12 states), a 4x4 grid of averaging sensors, identity weights, and the
/// modal disturbances of the reference experiment.
struct WaveSetup {
    int K = 4;
    int sensors_per_side = 4;
    double ell = 0.01;
    double T = 2.0;
    int truth_grid = 4001;
    // displacement coefficients of the modeled initial state, in the modal
    // ordering (1,1), (1,2), ..., truncated or zero-padded to N
    std::vector<double> z0_coeff{8.0, 4.0, 2.0, 2.0, 0.0, 1.0};
    double eta_coeff = -1.0;  // initial-displacement disturbance on the lowest mode
    double v_amp = 0.1;       // process disturbance amplitude on the (1,2) mode
    double mu_amp = 0.05;     // per-sensor measurement disturbance scale
    WaveCubicForm form = WaveCubicForm::stiffness_scaled;

    WaveModel make_model() const;
    Weights make_weights(const WaveModel& model) const;
    /// Transformed-state x0/eta and the modal/sensor disturbance callables.
    DisturbanceSpec make_disturbance(const WaveModel& model) const;
};

/// Energy of a transformed wave state, 0.5 * ||z||^2.
double wave_energy(std::span<const double> z);

}  // namespace hoekf
