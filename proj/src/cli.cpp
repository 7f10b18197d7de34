#include "hoekf/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <numbers>
#include <random>

#include <CLI11.hpp>

#include "hoekf/csv.hpp"
#include "hoekf/experiments.hpp"
#include "hoekf/observer.hpp"
#include "hoekf/oracle.hpp"
#include "hoekf/svg.hpp"

namespace hoekf {

namespace {

namespace fs = std::filesystem;

DuffingSetup duffing_setup(const ExperimentConfig& cfg) {
    DuffingSetup s;
    s.lambda = cfg.duffing_lambda;
    s.beta = cfg.duffing_beta;
    s.delta = cfg.duffing_delta;
    s.v_amp = cfg.duffing_v_amp;
    s.v_freq = cfg.duffing_v_freq;
    s.mu_amp = cfg.duffing_mu_amp;
    s.x0 = cfg.duffing_x0;
    s.eta = cfg.duffing_eta;
    s.T = cfg.T;
    s.truth_grid = cfg.truth_grid;
    s.q = cfg.q;
    s.gamma = cfg.duffing_gamma;
    s.r = cfg.duffing_r;
    return s;
}

WaveSetup wave_setup(const ExperimentConfig& cfg) {
    WaveSetup s;
    s.K = cfg.wave_K;
    s.sensors_per_side = cfg.wave_sensors_per_side;
    s.ell = cfg.wave_ell;
    s.T = cfg.wave_T;
    s.truth_grid = cfg.wave_truth_grid;
    s.form = cfg.wave_mass_scaled_cubic ? WaveCubicForm::mass_scaled
                                        : WaveCubicForm::stiffness_scaled;
    return s;
}

GDConfig oracle_config(const ExperimentConfig& cfg) {
    GDConfig g;
    g.rel_tol = cfg.oracle_rel_tol;
    g.max_iters = cfg.oracle_max_iters;
    g.inner_grid_points = cfg.oracle_inner_grid;
    g.fd_step = cfg.oracle_fd_step;
    return g;
}

std::string observer_label(const ObserverTrajectory& tr) {
    switch (tr.kind) {
        case ObserverKind::hoekf: return "hoekf-" + std::to_string(tr.k);
        case ObserverKind::covariance_filter: return "ekf";
        case ObserverKind::mortensen: return "mortensen";
    }
    return "observer";
}

void write_signal_csv(const std::string& path, const Signal& sig, const std::string& prefix) {
    CsvWriter csv(path);
    std::vector<std::string> cols{"t"};
    for (int i = 1; i <= sig.dim(); ++i) cols.push_back(prefix + "_" + std::to_string(i));
    csv.header(cols);
    std::vector<double> row(static_cast<std::size_t>(sig.dim()) + 1);
    for (int i = 0; i < sig.nodes(); ++i) {
        row[0] = sig.node_time(i);
        const auto v = sig.node_value(i);
        std::copy(v.begin(), v.end(), row.begin() + 1);
        csv.row(row);
    }
}

void write_trajectory_csv(const std::string& path, const ObserverTrajectory& tr, bool dump_p) {
    CsvWriter csv(path);
    std::vector<std::string> cols{"t"};
    for (int i = 1; i <= tr.n; ++i) cols.push_back("x_" + std::to_string(i));
    cols.push_back("min_pivot");
    const bool with_p = dump_p && tr.has_full() && tr.k >= 2;
    if (with_p) {
        std::size_t nj = static_cast<std::size_t>(tr.n);
        for (int j = 2; j <= tr.k; ++j) {
            nj *= static_cast<std::size_t>(tr.n);
            for (std::size_t q = 1; q <= nj; ++q) {
                cols.push_back("p" + std::to_string(j) + "_" + std::to_string(q));
            }
        }
    }
    csv.header(cols);
    std::vector<double> row;
    for (std::size_t node = 0; node < tr.times.size(); ++node) {
        row.clear();
        row.push_back(tr.times[node]);
        for (int i = 0; i < tr.n; ++i) {
            row.push_back(tr.x_nodes[node * static_cast<std::size_t>(tr.n) + static_cast<std::size_t>(i)]);
        }
        row.push_back(node < tr.diag.min_pivot.size()
                          ? tr.diag.min_pivot[node]
                          : std::numeric_limits<double>::quiet_NaN());
        if (with_p) {
            const auto& flat = tr.full->states[node];
            row.insert(row.end(), flat.begin() + tr.n, flat.end());
        }
        csv.row(row);
    }
    if (tr.status == OdeStatus::breakdown && tr.breakdown) {
        csv.raw_row("# breakdown t=" + CsvWriter::format(tr.breakdown->t));
    }
}

PlotSeries component_series(const ObserverTrajectory& tr, int component,
                            const std::string& label, int samples) {
    PlotSeries s;
    s.label = label;
    const double t0 = tr.t_begin(), t1 = tr.t_end();
    std::vector<double> x(static_cast<std::size_t>(tr.n));
    for (int i = 0; i <= samples; ++i) {
        const double t = t0 + (t1 - t0) * i / samples;
        tr.eval_x(t, x);
        s.x.push_back(t);
        s.y.push_back(x[static_cast<std::size_t>(component)]);
    }
    return s;
}

PlotSeries signal_series(const Signal& sig, int component, const std::string& label,
                         int samples) {
    PlotSeries s;
    s.label = label;
    std::vector<double> v(static_cast<std::size_t>(sig.dim()));
    for (int i = 0; i <= samples; ++i) {
        const double t = sig.horizon() * i / samples;
        sig.eval(t, v);
        s.x.push_back(t);
        s.y.push_back(v[static_cast<std::size_t>(component)]);
    }
    return s;
}

void print_status(const ObserverTrajectory& tr) {
    if (tr.status == OdeStatus::completed) {
        std::printf("  %-10s completed to t = %s\n", observer_label(tr).c_str(),
                    CsvWriter::format(tr.t_end()).c_str());
    } else {
        std::printf("  %-10s breakdown at t = %s (%s)\n", observer_label(tr).c_str(),
                    CsvWriter::format(tr.breakdown ? tr.breakdown->t : tr.t_end()).c_str(),
                    tr.breakdown ? tr.breakdown->reason.c_str() : "unknown");
    }
}

std::vector<ObserverTrajectory> run_orders_parallel(
    const std::vector<int>& orders, const SystemModel& model, const Weights& w, const Signal& y,
    std::span<const double> x0, double T, const RunOptions& opt) {
    std::vector<std::future<ObserverTrajectory>> futs;
    futs.reserve(orders.size());
    for (int k : orders) {
        futs.push_back(std::async(std::launch::async, [&, k] {
            return run_hoekf(k, model, w, y, x0, T, opt);
        }));
    }
    std::vector<ObserverTrajectory> out;
    out.reserve(orders.size());
    for (auto& f : futs) out.push_back(f.get());
    return out;
}

}  // namespace

int cmd_run_duffing(const ExperimentConfig& cfg) {
    const DuffingSetup setup = duffing_setup(cfg);
    const DuffingModel model = setup.make_model();
    const Weights weights = setup.make_weights();
    const DisturbanceSpec dist = setup.make_disturbance();

    std::printf("duffing: T = %g, Q = %g, orders =", setup.T, setup.q);
    for (int k : cfg.orders) std::printf(" %d", k);
    std::printf("%s\n", cfg.with_oracle ? ", with reference observer" : "");

    const TruthResult truth =
        simulate_truth(model, dist, setup.T, setup.truth_grid, {cfg.rtol / 10.0, cfg.atol / 10.0});

    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    write_signal_csv((out / "duffing_truth.csv").string(), truth.state, "x");
    write_signal_csv((out / "duffing_measurement.csv").string(), truth.measurement, "y");

    RunOptions ropt;
    ropt.ode = {cfg.rtol, cfg.atol};
    const auto trajectories = run_orders_parallel(cfg.orders, model, weights, truth.measurement,
                                                  setup.x0, setup.T, ropt);
    const ObserverTrajectory ekf =
        run_ekf(model, weights, truth.measurement, setup.x0, setup.T, ropt);

    std::vector<PlotSeries> pos, vel;
    pos.push_back(signal_series(truth.state, 0, "truth", 600));
    vel.push_back(signal_series(truth.state, 1, "truth", 600));

    std::optional<ObserverTrajectory> mortensen;
    if (cfg.with_oracle) {
        const MortensenOracle oracle(model, weights, truth.measurement, setup.x0,
                                     oracle_config(cfg));
        mortensen = oracle.integrate_mortensen(std::min(cfg.oracle_T, setup.T), cfg.oracle_grid);
        write_trajectory_csv((out / "duffing_mortensen.csv").string(), *mortensen, false);
        print_status(*mortensen);
        pos.push_back(component_series(*mortensen, 0, "mortensen", 600));
        vel.push_back(component_series(*mortensen, 1, "mortensen", 600));
    }

    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto& tr = trajectories[i];
        print_status(tr);
        write_trajectory_csv(
            (out / ("duffing_hoekf_k" + std::to_string(tr.k) + ".csv")).string(), tr, cfg.dump_p);
        pos.push_back(component_series(tr, 0, observer_label(tr), 600));
        vel.push_back(component_series(tr, 1, observer_label(tr), 600));
    }
    print_status(ekf);
    write_trajectory_csv((out / "duffing_ekf.csv").string(), ekf, false);

    write_line_plot((out / "duffing_positions.svg").string(), pos,
                    {"Positions", "t", "x_1", false});
    write_line_plot((out / "duffing_velocities.svg").string(), vel,
                    {"Velocities", "t", "x_2", false});

    if (mortensen) {
        std::vector<double> grid;
        const double Td = mortensen->t_end();
        for (int i = 0; i <= 600; ++i) grid.push_back(Td * i / 600.0);

        CsvWriter csv((out / "duffing_dk.csv").string());
        std::vector<std::string> cols{"t"};
        for (const auto& tr : trajectories) cols.push_back("d_" + std::to_string(tr.k));
        csv.header(cols);

        std::vector<DistanceSeries> dks;
        std::vector<PlotSeries> dkplots;
        for (const auto& tr : trajectories) {
            dks.push_back(relative_distance(tr, *mortensen, grid));
            dkplots.push_back(PlotSeries{"d_" + std::to_string(tr.k), dks.back().t, dks.back().d});
        }
        for (std::size_t i = 0; i < grid.size(); ++i) {
            std::vector<double> row{grid[i]};
            for (const auto& dk : dks) {
                row.push_back(i < dk.d.size() ? dk.d[i] : std::numeric_limits<double>::quiet_NaN());
            }
            csv.row(row);
        }
        write_line_plot((out / "duffing_dk.svg").string(), dkplots,
                        {"Relative distance to the reference observer", "t", "d_k", true});
    }
    return kExitOk;
}

int cmd_run_linear(const ExperimentConfig& cfg) {
    DuffingSetup setup = duffing_setup(cfg);
    setup.beta = 0.0;  // linearized benchmark
    const DuffingModel model = setup.make_model();
    const Weights weights = setup.make_weights();
    const DisturbanceSpec dist = setup.make_disturbance();

    std::printf("linear: T = %g, Q = %g\n", setup.T, setup.q);
    const TruthResult truth =
        simulate_truth(model, dist, setup.T, setup.truth_grid, {cfg.rtol / 10.0, cfg.atol / 10.0});

    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);

    RunOptions ropt;
    ropt.ode = {cfg.rtol, cfg.atol};
    const ObserverTrajectory kf = run_kf(model.A(), model.C(), model.G(), weights,
                                         truth.measurement, setup.x0, setup.T, ropt);
    const ObserverTrajectory ekf =
        run_ekf(model, weights, truth.measurement, setup.x0, setup.T, ropt);
    const auto trajectories = run_orders_parallel(cfg.orders, model, weights, truth.measurement,
                                                  setup.x0, setup.T, ropt);
    print_status(kf);
    print_status(ekf);

    const int max_order = *std::max_element(cfg.orders.begin(), cfg.orders.end());
    CsvWriter csv((out / "linear_report.csv").string());
    std::vector<std::string> cols{"k", "max_x_dev"};
    for (int j = 3; j <= max_order; ++j) cols.push_back("max_p_" + std::to_string(j));
    csv.header(cols);

    for (const auto& tr : trajectories) {
        print_status(tr);
        write_trajectory_csv(
            (out / ("linear_hoekf_k" + std::to_string(tr.k) + ".csv")).string(), tr, cfg.dump_p);
        double dev = 0.0;
        std::vector<double> a(2), b(2);
        for (int i = 0; i <= 600; ++i) {
            const double t = setup.T * i / 600.0;
            tr.eval_x(t, a);
            kf.eval_x(t, b);
            dev = std::max(dev, std::hypot(a[0] - b[0], a[1] - b[1]));
        }
        std::vector<double> row{static_cast<double>(tr.k), dev};
        for (int j = 3; j <= max_order; ++j) {
            row.push_back(j <= tr.k ? tr.diag.max_p_norm[static_cast<std::size_t>(j - 2)]
                                    : std::numeric_limits<double>::quiet_NaN());
        }
        csv.row(row);
    }
    write_trajectory_csv((out / "linear_kf.csv").string(), kf, false);
    write_trajectory_csv((out / "linear_ekf.csv").string(), ekf, false);
    return kExitOk;
}

int cmd_run_wave(const ExperimentConfig& cfg) {
    const WaveSetup setup = wave_setup(cfg);
    const WaveModel model = setup.make_model();
    const Weights weights = setup.make_weights(model);
    const DisturbanceSpec dist = setup.make_disturbance(model);
    const auto& disc = model.disc();

    std::printf("wave: K = %d (state dimension %d), %d sensors, T = %g\n", disc.K,
                model.state_dim(), disc.p, setup.T);

    const TruthResult truth = simulate_truth(model, dist, setup.T, setup.truth_grid,
                                             {cfg.rtol / 10.0, cfg.atol / 10.0});

    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    write_signal_csv((out / "wave_measurement.csv").string(), truth.measurement, "y");

    // disturbed initial displacement field on a uniform spatial grid
    {
        CsvWriter csv((out / "wave_initial_displacement.csv").string());
        const std::vector<std::string> cols{"x", "y", "u"};
        csv.header(cols);
        const auto z0 = truth.state.eval(0.0);
        for (int iy = 0; iy <= 40; ++iy) {
            for (int ix = 0; ix <= 40; ++ix) {
                const double x = ix / 40.0, yy = iy / 40.0;
                double u = 0.0;
                for (int a = 0; a < disc.N; ++a) {
                    const auto [i, j] = disc.index_set[static_cast<std::size_t>(a)];
                    const double coeff = z0[static_cast<std::size_t>(a)] / std::sqrt(disc.S(a, a));
                    u += coeff * std::sin(std::numbers::pi * i * x) *
                         std::sin(std::numbers::pi * j * yy);
                }
                const double row[3] = {x, yy, u};
                csv.row(row);
            }
        }
    }

    RunOptions ropt;
    ropt.ode = {cfg.rtol, cfg.atol};
    ropt.snapshot_times = cfg.wave_sample_times;
    const auto trajectories = run_orders_parallel(cfg.orders, model, weights, truth.measurement,
                                                  dist.x0, setup.T, ropt);
    for (const auto& tr : trajectories) {
        print_status(tr);
        write_trajectory_csv(
            (out / ("wave_hoekf_k" + std::to_string(tr.k) + ".csv")).string(), tr, false);
    }

    // energies along the truth and the estimators
    {
        CsvWriter csv((out / "wave_energy.csv").string());
        std::vector<std::string> cols{"t", "energy_truth"};
        for (const auto& tr : trajectories) cols.push_back("energy_k" + std::to_string(tr.k));
        csv.header(cols);
        std::vector<PlotSeries> plots;
        plots.push_back(PlotSeries{"truth", {}, {}});
        for (const auto& tr : trajectories)
            plots.push_back(PlotSeries{observer_label(tr), {}, {}});

        std::vector<double> xbuf(static_cast<std::size_t>(model.state_dim()));
        for (int i = 0; i <= 200; ++i) {
            const double t = setup.T * i / 200.0;
            std::vector<double> row{t};
            truth.state.eval(t, xbuf);
            row.push_back(wave_energy(xbuf));
            plots[0].x.push_back(t);
            plots[0].y.push_back(row.back());
            for (std::size_t q = 0; q < trajectories.size(); ++q) {
                const auto& tr = trajectories[q];
                if (t <= tr.t_end()) {
                    tr.eval_x(t, xbuf);
                    row.push_back(wave_energy(xbuf));
                } else {
                    row.push_back(std::numeric_limits<double>::quiet_NaN());
                }
                plots[q + 1].x.push_back(t);
                plots[q + 1].y.push_back(row.back());
            }
            csv.row(row);
        }
        write_line_plot((out / "wave_energy.svg").string(), plots,
                        {"Energy along the estimators", "t", "energy", false});
    }

    // value-function diagnostics at the sample times
    {
        const MortensenOracle oracle(model, weights, truth.measurement, dist.x0,
                                     oracle_config(cfg));
        CsvWriter vcsv((out / "wave_value.csv").string());
        CsvWriter gcsv((out / "wave_gradnorm.csv").string());
        std::vector<std::string> vcols{"t"}, gcols{"t"};
        for (const auto& tr : trajectories) {
            vcols.push_back("value_k" + std::to_string(tr.k));
            gcols.push_back("gradnorm_k" + std::to_string(tr.k));
        }
        vcsv.header(vcols);
        gcsv.header(gcols);

        std::vector<std::vector<double>> values(cfg.wave_sample_times.size()),
            grads(cfg.wave_sample_times.size());
        std::vector<PlotSeries> gplots;
        for (std::size_t q = 0; q < trajectories.size(); ++q) {
            const auto& tr = trajectories[q];
            gplots.push_back(PlotSeries{observer_label(tr), {}, {}});
            OpenLoopSolution warm;
            bool have_warm = false;
            for (std::size_t si = 0; si < cfg.wave_sample_times.size(); ++si) {
                const double t = cfg.wave_sample_times[si];
                if (t > tr.t_end() + 1e-9) {
                    values[si].push_back(std::numeric_limits<double>::quiet_NaN());
                    grads[si].push_back(std::numeric_limits<double>::quiet_NaN());
                    continue;
                }
                const auto xi = tr.eval_x(t);
                const OpenLoopSolution sol =
                    oracle.solve_open_loop(t, xi, have_warm ? &warm : nullptr);
                double gn = 0.0;
                const int n = model.state_dim();
                for (int c = 0; c < n; ++c) {
                    const double g = sol.adjoint[sol.adjoint.size() - static_cast<std::size_t>(n - c)];
                    gn += g * g;
                }
                gn = std::sqrt(gn);
                values[si].push_back(sol.value);
                grads[si].push_back(gn);
                gplots[q].x.push_back(t);
                gplots[q].y.push_back(gn);
                warm = sol;
                have_warm = true;
                std::printf("  value(t=%.2f, hoekf-%d) = %.6f, |grad| = %.3e%s\n", t, tr.k,
                            sol.value, gn, sol.converged ? "" : " (not converged)");
            }
        }
        for (std::size_t si = 0; si < cfg.wave_sample_times.size(); ++si) {
            std::vector<double> vrow{cfg.wave_sample_times[si]}, grow{cfg.wave_sample_times[si]};
            vrow.insert(vrow.end(), values[si].begin(), values[si].end());
            grow.insert(grow.end(), grads[si].begin(), grads[si].end());
            vcsv.row(vrow);
            gcsv.row(grow);
        }
        write_line_plot((out / "wave_gradnorm.svg").string(), gplots,
                        {"Value-function gradient norms", "t", "|grad V|", true});
    }
    return kExitOk;
}

int cmd_probe_oracle(const OracleProbeArgs& args, const ExperimentConfig& cfg) {
    const DuffingSetup setup = duffing_setup(cfg);
    const DuffingModel model = setup.make_model();
    const Weights weights = setup.make_weights();
    const DisturbanceSpec dist = setup.make_disturbance();
    const TruthResult truth =
        simulate_truth(model, dist, setup.T, setup.truth_grid, {cfg.rtol / 10.0, cfg.atol / 10.0});
    const MortensenOracle oracle(model, weights, truth.measurement, setup.x0, oracle_config(cfg));

    OpenLoopSolution sol;
    HessianInfo info;
    const Tensor hess = oracle.value_hessian(args.t, args.xi, nullptr, &info, &sol);
    double gn = 0.0;
    const int n = model.state_dim();
    for (int c = 0; c < n; ++c) {
        const double g = sol.adjoint[sol.adjoint.size() - static_cast<std::size_t>(n - c)];
        gn += g * g;
    }
    gn = std::sqrt(gn);

    fs::create_directories(cfg.out_dir);
    CsvWriter csv((fs::path(cfg.out_dir) / "oracle_probe.csv").string());
    std::vector<std::string> cols{"t"};
    for (int i = 1; i <= n; ++i) cols.push_back("xi_" + std::to_string(i));
    cols.push_back("value");
    cols.push_back("grad_norm");
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j)
            cols.push_back("hess_" + std::to_string(i) + "_" + std::to_string(j));
    cols.push_back("iterations");
    cols.push_back("converged");
    csv.header(cols);
    std::vector<double> row{args.t};
    row.insert(row.end(), args.xi.begin(), args.xi.end());
    row.push_back(sol.value);
    row.push_back(gn);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) row.push_back(hess(i, j));
    row.push_back(static_cast<double>(sol.iterations));
    row.push_back(sol.converged && info.converged ? 1.0 : 0.0);
    csv.row(row);

    std::printf("value(%g, xi) = %.8f, |grad| = %.3e, iterations = %d, converged = %s\n", args.t,
                sol.value, gn, sol.iterations, sol.converged && info.converged ? "yes" : "no");
    return kExitOk;
}

namespace {

bool selftest_check(const char* name, bool ok) {
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name);
    return ok;
}

}  // namespace

int cmd_selftest(unsigned seed) {
    std::mt19937_64 rng(seed);
    auto uni = [&rng](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    auto random_cube = [&](int order, int n) {
        Tensor t = Tensor::cube(order, n);
        for (double& v : t.values()) v = uni(-1.0, 1.0);
        return t;
    };
    bool all_ok = true;

    {
        auto binom = [](int n, int k) {
            long r = 1;
            for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
            return r;
        };
        bool ok = true;
        for (int m = 1; m <= 8; ++m)
            for (int i = 0; i <= m; ++i)
                ok = ok && static_cast<long>(shuffle_set(i, m - i).size()) == binom(m, i);
        all_ok &= selftest_check("shuffle-set cardinalities", ok);
    }
    {
        bool ok = true;
        for (int n : {2, 3})
            for (int j = 1; j <= 3 && ok; ++j)
                for (int l = 1; l <= 3 && ok; ++l) {
                    const Tensor a = symmetrize_full(random_cube(j + 1, n));
                    const Tensor b = symmetrize_full(random_cube(l + 1, n));
                    const Tensor g = symmetrize_full(random_cube(2, n));
                    const Tensor lhs = sym_shuffle(contract(a, 1, contract(g, 2, b, 1), 1), j, l);
                    const Tensor rhs = sym_shuffle(contract(b, 1, contract(g, 2, a, 1), 1), l, j);
                    ok = norm_max(lhs - rhs) < 1e-12;
                }
        all_ok &= selftest_check("weighted-contraction symmetry exchange", ok);
    }
    {
        bool ok = true;
        for (int n : {2, 3})
            for (int l : {2, 3, 4}) {
                const Tensor a = symmetrize_full(random_cube(l, n));
                const Tensor b = random_cube(2, n);
                const Tensor lhs = sym_shuffle(contract(a, 1, b, 1), l - 1, 1);
                Tensor rhs(a.dims());
                for (int q = 1; q <= l; ++q) rhs += mode_mul(a, q, b);
                ok = ok && norm_max(lhs - rhs) < 1e-12;
            }
        all_ok &= selftest_check("mode-sum identity", ok);
    }
    {
        const Tensor a = random_cube(3, 3);
        const Permutation sigma{{3, 1, 2}};
        const Tensor r = reshape_perm(a, sigma);
        const bool ok = norm_max(reshape_perm(r, sigma.inverse()) - a) == 0.0 &&
                        std::abs(norm_frobenius(r) - norm_frobenius(a)) < 1e-12;
        all_ok &= selftest_check("reshape round trip and isometry", ok);
    }
    {
        ObserverState s;
        s.x = {uni(-1, 1), uni(-1, 1)};
        s.P.push_back(symmetrize_full(random_cube(2, 2)) + 2.0 * Tensor::identity(2));
        s.P.push_back(symmetrize_full(random_cube(3, 2)));
        const auto flat = flatten(s);
        const ObserverState r = unflatten(flat, 2, 3);
        const bool ok = r.x == s.x && norm_max(r.Pj(2) - s.Pj(2)) == 0.0 &&
                        norm_max(r.Pj(3) - s.Pj(3)) == 0.0;
        all_ok &= selftest_check("observer state flatten round trip", ok);
    }
    {
        const OdeRhs rhs = [](double, std::span<const double> v, std::span<double> dv) {
            dv[0] = -v[0];
            return true;
        };
        const double v0 = 1.0;
        const auto tr = rk45_adaptive(rhs, std::span(&v0, 1), 0.0, 1.0, {1e-8, 1e-10});
        const bool ok = tr.status == OdeStatus::completed &&
                        std::abs(tr.states.back()[0] - std::exp(-1.0)) < 1e-8;
        all_ok &= selftest_check("adaptive integrator on the exponential", ok);
    }
    {
        Tensor l({4, 4});
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j <= i; ++j) l(i, j) = uni(-1.0, 1.0);
        Tensor m = matmul(l, transpose(l));
        for (int i = 0; i < 4; ++i) m(i, i) += 0.5;
        Tensor b({4});
        for (int i = 0; i < 4; ++i) b(i) = uni(-1.0, 1.0);
        const Tensor x = spd_solve(m, b);
        const bool ok = norm_frobenius(matvec(m, x) - b) <= 1e-10 * (1.0 + norm_frobenius(b));
        all_ok &= selftest_check("symmetric positive definite solve", ok);
    }
    return all_ok ? kExitOk : kExitInternal;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Higher-order extended Kalman filters with a minimum-energy reference observer"};
    app.require_subcommand(1);

    std::string config_path, orders_arg, q_arg, out_arg, T_arg;
    bool with_oracle = false, dump_p = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value configuration file");
        sub->add_option("--orders", orders_arg, "observer orders, e.g. 2,3,4");
        sub->add_option("--q", q_arg, "output weight Q");
        sub->add_option("--out", out_arg, "output directory");
        sub->add_option("--T", T_arg, "time horizon");
    };

    CLI::App* run = app.add_subcommand("run", "run an experiment");
    run->require_subcommand(1);
    CLI::App* run_duffing = run->add_subcommand("duffing", "chaotic oscillator benchmark");
    CLI::App* run_wave = run->add_subcommand("wave", "semi-discretized cubic wave benchmark");
    CLI::App* run_linear = run->add_subcommand("linear", "linear reduction benchmark");
    for (CLI::App* sub : {run_duffing, run_wave, run_linear}) add_common(sub);
    run_duffing->add_flag("--with-oracle", with_oracle,
                          "integrate the minimum-energy reference observer");
    for (CLI::App* sub : {run_duffing, run_linear}) {
        sub->add_flag("--dump-p", dump_p, "append flattened tensor blocks to trajectory output");
    }

    CLI::App* probe = app.add_subcommand("probe-oracle", "evaluate the value function at (t, xi)");
    double probe_t = 0.0;
    std::string probe_xi;
    probe->add_option("--t", probe_t, "query time")->required();
    probe->add_option("--xi", probe_xi, "query state, comma-separated")->required();
    add_common(probe);

    CLI::App* selftest = app.add_subcommand("selftest", "run the built-in property suites");
    unsigned seed = 0;
    selftest->add_option("--seed", seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (selftest->parsed()) return cmd_selftest(seed);

        std::string experiment;
        if (probe->parsed()) {
            experiment = "duffing";
        } else if (run_duffing->parsed()) {
            experiment = "duffing";
        } else if (run_wave->parsed()) {
            experiment = "wave";
        } else {
            experiment = "linear";
        }

        std::vector<std::string> errors;
        KeyValueConfig kv = config_path.empty() ? KeyValueConfig{}
                                                : KeyValueConfig::parse_file(config_path, errors);
        if (!orders_arg.empty()) kv.set("orders", orders_arg);
        if (!q_arg.empty()) kv.set("q", q_arg);
        if (!out_arg.empty()) kv.set("out", out_arg);
        if (!T_arg.empty()) kv.set("T", T_arg);
        if (with_oracle) kv.set("with_oracle", "true");
        if (dump_p) kv.set("dump_p", "true");
        if (!kv.has("orders") && (experiment == "wave" || experiment == "linear")) {
            kv.set("orders", "2,3,4,5");
        }

        const ExperimentConfig cfg = ExperimentConfig::load(kv, experiment, errors);
        if (!errors.empty()) {
            for (const auto& e : errors) std::fprintf(stderr, "config error: %s\n", e.c_str());
            return kExitConfig;
        }

        if (probe->parsed()) {
            OracleProbeArgs args;
            args.t = probe_t;
            std::vector<std::string> perr;
            KeyValueConfig tmp;
            tmp.set("xi", probe_xi);
            args.xi = tmp.get_reals("xi", {}, perr);
            if (!perr.empty() || args.xi.size() != 2) {
                std::fprintf(stderr, "config error: --xi expects 2 comma-separated reals\n");
                return kExitConfig;
            }
            return cmd_probe_oracle(args, cfg);
        }
        if (run_duffing->parsed()) return cmd_run_duffing(cfg);
        if (run_wave->parsed()) return cmd_run_wave(cfg);
        return cmd_run_linear(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInternal;
    }
}

}  // namespace hoekf
