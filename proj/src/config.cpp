#include "hoekf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace hoekf {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::optional<double> to_real(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(trim(item));
    return parts;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text,
                                            std::vector<std::string>& errors) {
    KeyValueConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            errors.push_back("config line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            errors.push_back("config line " + std::to_string(lineno) + ": empty key");
            continue;
        }
        cfg.kv_[key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path,
                                          std::vector<std::string>& errors) {
    std::ifstream in(path);
    if (!in) {
        errors.push_back("config file not readable: " + path);
        return {};
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), errors);
}

double KeyValueConfig::get_real(const std::string& key, double fallback,
                                std::vector<std::string>& errors) const {
    touched_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (auto v = to_real(it->second)) return *v;
    errors.push_back("config key '" + key + "': expected a real number, got '" + it->second + "'");
    return fallback;
}

int KeyValueConfig::get_int(const std::string& key, int fallback,
                            std::vector<std::string>& errors) const {
    touched_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    int v = 0;
    const auto& s = it->second;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        errors.push_back("config key '" + key + "': expected an integer, got '" + s + "'");
        return fallback;
    }
    return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback,
                              std::vector<std::string>& errors) const {
    touched_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::string s = it->second;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    errors.push_back("config key '" + key + "': expected a boolean, got '" + it->second + "'");
    return fallback;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    touched_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

std::vector<double> KeyValueConfig::get_reals(const std::string& key, std::vector<double> fallback,
                                              std::vector<std::string>& errors) const {
    touched_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<double> out;
    for (const auto& part : split_commas(it->second)) {
        if (auto v = to_real(part)) {
            out.push_back(*v);
        } else {
            errors.push_back("config key '" + key + "': bad vector entry '" + part + "'");
            return fallback;
        }
    }
    return out;
}

std::vector<int> KeyValueConfig::get_ints(const std::string& key, std::vector<int> fallback,
                                          std::vector<std::string>& errors) const {
    touched_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<int> out;
    for (const auto& part : split_commas(it->second)) {
        int v = 0;
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc{} || p != part.data() + part.size()) {
            errors.push_back("config key '" + key + "': bad integer entry '" + part + "'");
            return fallback;
        }
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> KeyValueConfig::untouched_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : kv_) {
        if (!touched_.count(k)) out.push_back(k);
    }
    return out;
}

ExperimentConfig ExperimentConfig::load(const KeyValueConfig& cfg, const std::string& experiment,
                                        std::vector<std::string>& errors) {
    ExperimentConfig e;
    e.experiment = cfg.get_string("experiment", experiment);
    if (e.experiment != experiment && cfg.has("experiment")) {
        errors.push_back("config 'experiment' = '" + e.experiment +
                         "' conflicts with the requested subcommand '" + experiment + "'");
    }
    e.orders = cfg.get_ints("orders", e.orders, errors);
    e.q = cfg.get_real("q", e.q, errors);
    e.T = cfg.get_real("T", experiment == "wave" ? 2.0 : e.T, errors);
    e.rtol = cfg.get_real("rtol", e.rtol, errors);
    e.atol = cfg.get_real("atol", e.atol, errors);
    e.out_dir = cfg.get_string("out", e.out_dir);
    e.seed = static_cast<unsigned>(cfg.get_int("seed", 0, errors));
    e.with_oracle = cfg.get_bool("with_oracle", e.with_oracle, errors);
    e.dump_p = cfg.get_bool("dump_p", e.dump_p, errors);

    e.duffing_lambda = cfg.get_real("duffing.lambda", e.duffing_lambda, errors);
    e.duffing_beta = cfg.get_real("duffing.beta", e.duffing_beta, errors);
    e.duffing_delta = cfg.get_real("duffing.delta", e.duffing_delta, errors);
    e.duffing_gamma = cfg.get_real("duffing.gamma", e.duffing_gamma, errors);
    e.duffing_r = cfg.get_real("duffing.r", e.duffing_r, errors);
    e.duffing_x0 = cfg.get_reals("duffing.x0", e.duffing_x0, errors);
    e.duffing_eta = cfg.get_reals("duffing.eta", e.duffing_eta, errors);
    e.duffing_v_amp = cfg.get_real("duffing.v_amp", e.duffing_v_amp, errors);
    e.duffing_v_freq = cfg.get_real("duffing.v_freq", e.duffing_v_freq, errors);
    e.duffing_mu_amp = cfg.get_real("duffing.mu_amp", e.duffing_mu_amp, errors);
    e.truth_grid = cfg.get_int("truth.grid_points", e.truth_grid, errors);

    e.oracle_T = cfg.get_real("oracle.T", e.oracle_T, errors);
    e.oracle_grid = cfg.get_int("oracle.grid_points", e.oracle_grid, errors);
    e.oracle_inner_grid = cfg.get_int("oracle.inner_grid_points", e.oracle_inner_grid, errors);
    e.oracle_rel_tol = cfg.get_real("oracle.rel_tol", e.oracle_rel_tol, errors);
    e.oracle_max_iters = cfg.get_int("oracle.max_iters", e.oracle_max_iters, errors);
    e.oracle_fd_step = cfg.get_real("oracle.fd_step", e.oracle_fd_step, errors);

    e.wave_K = cfg.get_int("wave.K", e.wave_K, errors);
    e.wave_sensors_per_side = cfg.get_int("wave.sensors_per_side", e.wave_sensors_per_side, errors);
    e.wave_ell = cfg.get_real("wave.ell", e.wave_ell, errors);
    e.wave_T = cfg.get_real("wave.T", e.wave_T, errors);
    e.wave_truth_grid = cfg.get_int("wave.truth_grid_points", e.wave_truth_grid, errors);
    e.wave_sample_times = cfg.get_reals("wave.sample_times", e.wave_sample_times, errors);
    e.wave_mass_scaled_cubic = cfg.get_bool("wave.mass_scaled_cubic", e.wave_mass_scaled_cubic, errors);

    for (const auto& k : cfg.untouched_keys()) {
        errors.push_back("unknown config key '" + k + "'");
    }

    if (e.orders.empty()) errors.push_back("orders: at least one observer order required");
    for (int k : e.orders) {
        if (k < 2 || k > 8) {
            errors.push_back("orders: observer order " + std::to_string(k) +
                             " outside the supported range 2..8");
        }
    }
    if (!(e.T > 0.0)) errors.push_back("T must be positive");
    if (!(e.q > 0.0)) errors.push_back("q must be positive");
    if (!(e.rtol > 0.0) || !(e.atol > 0.0)) errors.push_back("tolerances must be positive");
    if (e.truth_grid < 2) errors.push_back("truth.grid_points must be at least 2");
    if (static_cast<int>(e.duffing_x0.size()) != 2 || static_cast<int>(e.duffing_eta.size()) != 2) {
        errors.push_back("duffing.x0 and duffing.eta must have 2 entries");
    }
    if (e.experiment == "wave") {
        if (e.wave_K < 2) errors.push_back("wave.K must be at least 2");
        for (int k : e.orders) {
            if (k > 5) {
                errors.push_back("orders: order " + std::to_string(k) +
                                 " exceeds the wave memory guard (tensor state grows as n^k; "
                                 "maximum supported order is 5)");
            }
        }
    }
    return e;
}

}  // namespace hoekf
