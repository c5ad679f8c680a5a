/// @file config.hpp
/// @brief Experiment configuration: a single JSON document resolved against the field catalog.
#pragma once

#include "kiw/advect.hpp"
#include "kiw/flow.hpp"
#include "kiw/kiw.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace kiw {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct ExperimentConfig {
    nlohmann::json raw;  // document after overrides, used for hashing and section access
    int n = 0;
    double T = 0.0;
    double dt = 0.0;
    int levels = 1;
    int n_paths = 1;
    std::uint64_t seed = 0;
    int n_channels = 0;
    int workers = 0;
    FlowModel flow;
    InverseMethod inverse = InverseMethod::newton_exact;
    std::optional<SemimartingaleForm> form;
    std::vector<Vec> seeds;
    int random_test_vectors = 3;

    [[nodiscard]] const nlohmann::json& section(const std::string& key) const;
    [[nodiscard]] bool has(const std::string& key) const { return raw.contains(key); }
    [[nodiscard]] BrownianDriver driver() const;
};

/// Parse and validate. Throws ConfigError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& doc);
/// Read a config file (IoError if unreadable, ConfigError if malformed JSON).
nlohmann::json load_config_file(const std::string& path);

/// FNV-1a 64 of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

// Typed accessors that name the key in their errors.
void check_json_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where);
const nlohmann::json& json_require(const nlohmann::json& j, const std::string& key, const std::string& where);
double json_number(const nlohmann::json& j, const std::string& key, const std::string& where);
double json_number_or(const nlohmann::json& j, const std::string& key, double fallback, const std::string& where);
int json_int(const nlohmann::json& j, const std::string& key, const std::string& where);
int json_int_or(const nlohmann::json& j, const std::string& key, int fallback, const std::string& where);
std::string json_string_or(const nlohmann::json& j, const std::string& key, const std::string& fallback,
                           const std::string& where);
Vec json_point(const nlohmann::json& j, int n, const std::string& where);
std::vector<Vec> json_points(const nlohmann::json& j, int n, const std::string& where);

}  // namespace kiw
