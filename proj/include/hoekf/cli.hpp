#pragma once

#include <string>
#include <vector>

#include "hoekf/config.hpp"

namespace hoekf {

// Exit-code contract: 0 = completed (recorded breakdowns included),
// 2 = configuration error, 3 = internal failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInternal = 3;

int cmd_run_duffing(const ExperimentConfig& cfg);
int cmd_run_linear(const ExperimentConfig& cfg);
int cmd_run_wave(const ExperimentConfig& cfg);

struct OracleProbeArgs {
    double t = 0.0;
    std::vector<double> xi;
};
int cmd_probe_oracle(const OracleProbeArgs& args, const ExperimentConfig& cfg);

int cmd_selftest(unsigned seed);

int run_cli(int argc, char** argv);

}  // namespace hoekf
