#include "hoekf/experiments.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hoekf {

namespace {
constexpr double kPi = std::numbers::pi;
}

DuffingModel DuffingSetup::make_model() const { return duffing_model(lambda, beta, delta); }

Weights DuffingSetup::make_weights() const {
    Tensor g = Tensor::identity(2);
    g *= gamma;
    return Weights(std::move(g), Tensor({1, 1}, {r}), Tensor({1, 1}, {q}));
}

DisturbanceSpec DuffingSetup::make_disturbance() const {
    DisturbanceSpec d;
    d.x0 = x0;
    d.eta = eta;
    const double va = v_amp, vf = v_freq, ma = mu_amp;
    d.v = [va, vf](double t, std::span<double> out) { out[0] = va * std::cos(vf * t); };
    d.mu = [ma](double t, std::span<double> out) { out[0] = ma * std::sin(2.0 * kPi * t); };
    d.mu_dot = [ma](double t, std::span<double> out) {
        out[0] = 2.0 * kPi * ma * std::cos(2.0 * kPi * t);
    };
    return d;
}

WaveModel WaveSetup::make_model() const {
    return wave_model(K, sensor_grid(sensors_per_side), ell, form);
}

Weights WaveSetup::make_weights(const WaveModel& model) const {
    return Weights::identities(model.state_dim(), model.disturbance_dim(), model.output_dim());
}

DisturbanceSpec WaveSetup::make_disturbance(const WaveModel& model) const {
    const WaveDiscretization& disc = model.disc();
    const int N = disc.N;
    const int p = disc.p;

    std::vector<double> disp(static_cast<std::size_t>(N), 0.0);
    for (std::size_t i = 0; i < z0_coeff.size() && i < disp.size(); ++i) disp[i] = z0_coeff[i];
    const std::vector<double> zero_vel(static_cast<std::size_t>(N), 0.0);

    std::vector<double> eta_disp(static_cast<std::size_t>(N), 0.0);
    eta_disp[0] = eta_coeff;  // lowest mode (1,1)

    DisturbanceSpec d;
    d.x0 = disc.to_state(disp, zero_vel);
    d.eta = disc.to_state(eta_disp, zero_vel);

    int mode12 = -1;
    for (int a = 0; a < N; ++a) {
        if (disc.index_set[static_cast<std::size_t>(a)] == std::pair<int, int>{1, 2}) mode12 = a;
    }
    if (mode12 < 0) throw std::logic_error("WaveSetup: (1,2) mode missing from the basis");

    const double va = v_amp;
    d.v = [va, mode12, N](double t, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        (void)N;
        out[static_cast<std::size_t>(mode12)] = va * std::abs(std::sin(0.5 * kPi * t));
    };
    const double ma = mu_amp;
    d.mu = [ma, p](double t, std::span<double> out) {
        const double s = std::sin(5.0 * kPi * t);
        for (int k = 0; k < p; ++k) {
            const double c = -2.0 + 4.0 * k / (p - 1);
            out[static_cast<std::size_t>(k)] = ma * c * s;
        }
    };
    d.mu_dot = [ma, p](double t, std::span<double> out) {
        const double s = 5.0 * kPi * std::cos(5.0 * kPi * t);
        for (int k = 0; k < p; ++k) {
            const double c = -2.0 + 4.0 * k / (p - 1);
            out[static_cast<std::size_t>(k)] = ma * c * s;
        }
    };
    return d;
}

double wave_energy(std::span<const double> z) {
    double acc = 0.0;
    for (double v : z) acc += v * v;
    return 0.5 * acc;
}

}  // namespace hoekf
