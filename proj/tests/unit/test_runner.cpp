/// @file test_runner.cpp
/// @brief Configuration parsing, exit codes, run manifest and reproducibility of the runner.
#include "doctest.h"

#include "kiw/config.hpp"
#include "kiw/io.hpp"
#include "kiw/runner.hpp"
#include "outputs.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <sstream>

using namespace kiw;
using namespace kiw::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json shipped(const std::string& name) {
    return json::parse(read_text_file(std::string(KIW_SOURCE_DIR) + "/configs/" + name + ".json"));
}

std::string scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("kiw_runner_test_" + name);
    fs::remove_all(p);
    return p.string();
}

json small_closed_form() {
    json c = shipped("closed_form_shift");
    c["n_paths"] = 8;
    c["levels"] = 2;
    return c;
}

json manifest_of(const std::string& dir) { return json::parse(read_text_file(dir + "/run_manifest.json")); }

}  // namespace

TEST_CASE("every shipped config parses except the deliberately broken one") {
    for (const auto& e : fs::directory_iterator(std::string(KIW_SOURCE_DIR) + "/configs")) {
        const json doc = json::parse(read_text_file(e.path().string()));
        INFO(e.path().filename().string());
        if (e.path().stem() == "bad_catalog") CHECK_THROWS_AS(parse_config(doc), ConfigError);
        else CHECK_NOTHROW(parse_config(doc));
    }
}

TEST_CASE("unknown keys are rejected by name with exit code 2") {
    json c = small_closed_form();
    c["flow"]["drfit"] = 1;
    const std::string dir = scratch("unknown");
    const auto out = run_experiment({"kiw-verify", c, dir, std::nullopt, std::nullopt, ""});
    CHECK(out.exit_code == kExitConfig);
    CHECK(out.message.find("flow.drfit") != std::string::npos);
    CHECK(manifest_of(dir).at("status") == "failed");

    json t = small_closed_form();
    t["thresholds"]["max_nonsense"] = 1.0;
    CHECK(run_experiment({"kiw-verify", t, scratch("unknown_threshold"), std::nullopt, std::nullopt, ""}).exit_code == kExitConfig);
    CHECK(run_experiment({"no-such-command", c, scratch("cmd"), std::nullopt, std::nullopt, ""}).exit_code == kExitConfig);
    CHECK(run_experiment({"kiw-verify", json(), scratch("load"), std::nullopt, std::nullopt, "parse error"}).exit_code == kExitConfig);
}

TEST_CASE("passing run: manifest, report and CSV") {
    const std::string dir = scratch("pass");
    const auto out = run_experiment({"kiw-verify", small_closed_form(), dir, std::nullopt, 1, ""});
    REQUIRE(out.exit_code == kExitPass);
    const json m = manifest_of(dir);
    CHECK(m.at("status") == "finished");
    CHECK(m.at("exit_code") == 0);
    CHECK(m.at("seed") == 7);
    CHECK(m.at("library_version") == kLibraryVersion);
    CHECK(m.at("config_hash").get<std::string>().size() == 16);
    for (const auto& f : out.outputs) CHECK(fs::exists(fs::path(dir) / f));
    const std::string csv = read_text_file(dir + "/kiw_residuals.csv");
    CHECK(csv.substr(0, csv.find('\n')).find(',') != std::string::npos);
    CHECK(json::parse(read_text_file(dir + "/kiw_report.json")).at("pass") == true);
}

TEST_CASE("threshold failure exits 1") {
    json c = small_closed_form();
    c["thresholds"]["max_residual"] = 1e-300;
    const std::string dir = scratch("fail");
    const auto out = run_experiment({"kiw-verify", c, dir, std::nullopt, std::nullopt, ""});
    CHECK(out.exit_code == kExitThreshold);
    CHECK(manifest_of(dir).at("status") == "finished");
    CHECK(manifest_of(dir).at("exit_code") == 1);
}

TEST_CASE("unwritable output directory exits 3") {
    const std::string file = scratch("blocker");
    write_text_file(file, "x");
    std::ostringstream sink;
    const auto out = run_experiment({"kiw-verify", small_closed_form(), file + "/sub", std::nullopt, std::nullopt, ""});
    CHECK(out.exit_code == kExitIo);
    CHECK(run_from_file("kiw-verify", file + ".missing.json", scratch("io"), std::nullopt, std::nullopt, sink) == kExitIo);
    fs::remove(file);
}

TEST_CASE("config hash ignores workers and follows the seed") {
    json a = small_closed_form();
    json b = a;
    b["seed"] = 8;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a) == config_hash(json::parse(a.dump())));
    const std::string d1 = scratch("hash1"), d2 = scratch("hash2");
    run_experiment({"kiw-verify", a, d1, std::nullopt, 1, ""});
    run_experiment({"kiw-verify", a, d2, std::nullopt, 3, ""});
    CHECK(manifest_of(d1).at("config_hash") == manifest_of(d2).at("config_hash"));
}

TEST_CASE("outputs are byte-identical across worker counts and repeat runs") {
    json c = small_closed_form();
    const std::string d1 = scratch("rep1"), d2 = scratch("rep2"), d3 = scratch("rep3");
    REQUIRE(run_experiment({"kiw-verify", c, d1, std::nullopt, 1, ""}).exit_code == kExitPass);
    REQUIRE(run_experiment({"kiw-verify", c, d2, std::nullopt, 3, ""}).exit_code == kExitPass);
    REQUIRE(run_experiment({"kiw-verify", c, d3, 99, 2, ""}).exit_code == kExitPass);
    CHECK(compare_outputs(d1, d2) == "");
    CHECK(compare_outputs(d1, d3) != "");
}
