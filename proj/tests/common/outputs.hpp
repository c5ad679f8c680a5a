/// @file outputs.hpp
/// @brief Comparison of run output directories.
#pragma once

#include "kiw/io.hpp"

#include <filesystem>
#include <set>
#include <string>

namespace kiw::testing {

/// Names of the regular files in dir, except the run manifest (it records wall time).
inline std::set<std::string> result_files(const std::string& dir) {
    std::set<std::string> names;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "run_manifest.json") names.insert(e.path().filename().string());
    return names;
}

/// Empty when both directories hold the same result files with identical bytes; otherwise the first difference.
inline std::string compare_outputs(const std::string& a, const std::string& b) {
    const auto fa = result_files(a), fb = result_files(b);
    if (fa != fb) return "file sets differ";
    if (fa.empty()) return "no result files";
    for (const auto& name : fa)
        if (read_text_file(a + "/" + name) != read_text_file(b + "/" + name)) return name + " differs";
    return "";
}

}  // namespace kiw::testing
