#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hoekf {

/// Flat key-value configuration: one `section.name = value` per line,
/// `#` comments, vector literals as comma-separated scalars. Typed reads
/// collect errors instead of throwing so a schema pass can report all
/// violations at once.
class KeyValueConfig {
public:
    KeyValueConfig() = default;
    static KeyValueConfig parse_file(const std::string& path, std::vector<std::string>& errors);
    static KeyValueConfig parse_string(const std::string& text, std::vector<std::string>& errors);

    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    double get_real(const std::string& key, double fallback, std::vector<std::string>& errors) const;
    int get_int(const std::string& key, int fallback, std::vector<std::string>& errors) const;
    bool get_bool(const std::string& key, bool fallback, std::vector<std::string>& errors) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::vector<double> get_reals(const std::string& key, std::vector<double> fallback,
                                  std::vector<std::string>& errors) const;
    std::vector<int> get_ints(const std::string& key, std::vector<int> fallback,
                              std::vector<std::string>& errors) const;

    /// Keys never touched by any getter; used to reject unknown settings.
    std::vector<std::string> untouched_keys() const;

private:
    std::map<std::string, std::string> kv_;
    mutable std::set<std::string> touched_;
};

/// Settings shared by the experiment subcommands, resolved from defaults,
/// an optional config file, and command-line overrides.
struct ExperimentConfig {
    std::string experiment;  // duffing | wave | linear | oracle-probe
    std::vector<int> orders{2, 3, 4, 5, 6, 7, 8};
    double q = 2.0;
    double T = 10.0;
    double rtol = 1e-6;
    double atol = 1e-8;
    std::string out_dir = "out";
    unsigned seed = 0;
    bool with_oracle = false;
    bool dump_p = false;

    // duffing parameters
    double duffing_lambda = -1.0;
    double duffing_beta = 1.0;
    double duffing_delta = 0.3;
    double duffing_gamma = 1.0;
    double duffing_r = 1.0;
    std::vector<double> duffing_x0{0.0, 0.0};
    std::vector<double> duffing_eta{-1.216, 0.493};
    double duffing_v_amp = 0.5;
    double duffing_v_freq = 1.2;
    double duffing_mu_amp = 0.05;
    int truth_grid = 10001;

    // oracle parameters
    double oracle_T = 6.0;
    int oracle_grid = 601;
    int oracle_inner_grid = 501;
    double oracle_rel_tol = 1e-6;
    int oracle_max_iters = 600;
    double oracle_fd_step = 1e-3;

    // wave parameters
    int wave_K = 4;
    int wave_sensors_per_side = 4;
    double wave_ell = 0.01;
    double wave_T = 2.0;
    int wave_truth_grid = 4001;
    std::vector<double> wave_sample_times{0.5, 1.0, 1.5, 2.0};
    bool wave_mass_scaled_cubic = false;

    /// Reads every known key (applying the stated defaults), then validates.
    /// Unknown keys and type violations are reported through `errors`.
    static ExperimentConfig load(const KeyValueConfig& cfg, const std::string& experiment,
                                 std::vector<std::string>& errors);
};

}  // namespace hoekf
