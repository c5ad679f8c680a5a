/// @file runner.hpp
/// @brief Configuration-driven experiment runner behind the command-line subcommands.
#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace kiw {

inline constexpr int kExitPass = 0;
inline constexpr int kExitThreshold = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

/// Subcommand names: kiw-verify, advect, kelvin, convergence, diagnostics.
const std::vector<std::string>& command_names();

struct RunRequest {
    std::string command;
    nlohmann::json config;
    std::string out_dir;
    std::optional<std::uint64_t> seed;  // overrides config "seed"
    std::optional<int> workers;         // overrides config "workers"; 0 = available parallelism
    std::string load_error;             // non-empty: the config could not be parsed (exit 2)
};

struct ThresholdCheck {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool upper = true;  // pass when value <= threshold (else value >= threshold)
    bool pass = false;
};

struct RunOutcome {
    int exit_code = kExitPass;
    std::string message;
    std::vector<std::string> outputs;  // result files, relative to out_dir, in write order
    std::vector<ThresholdCheck> checks;
    nlohmann::json report;
};

/// Runs one subcommand. Never throws: configuration, numerical and I/O failures map to
/// exit codes 2, 1 and 3. Writes run_manifest.json (status "running") before any result
/// file and finalizes it afterwards.
RunOutcome run_experiment(const RunRequest& request, std::ostream* log = nullptr);

/// Loads the config file, then runs. Returns the process exit code.
int run_from_file(const std::string& command, const std::string& config_path, const std::string& out_dir,
                  std::optional<std::uint64_t> seed, std::optional<int> workers, std::ostream& log);

}  // namespace kiw
