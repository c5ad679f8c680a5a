/// @file runner.cpp
/// @brief Subcommand implementations, run manifest and threshold checks.
#include "kiw/runner.hpp"

#include "kiw/advect.hpp"
#include "kiw/catalog.hpp"
#include "kiw/circulation.hpp"
#include "kiw/config.hpp"
#include "kiw/convergence.hpp"
#include "kiw/io.hpp"
#include "kiw/kiw.hpp"
#include "kiw/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>

namespace kiw {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"kiw-verify", "advect", "kelvin", "convergence", "diagnostics"};
    return names;
}

namespace {

const std::set<std::string> kThresholdKeys{
    "max_residual",      "min_slope",           "max_slope",          "max_pullback_defect",
    "max_relative_drift", "max_refinement_ratio", "min_kelvin_slope",   "max_kelvin_defect",
    "max_change_of_variables", "min_flow_slope", "min_kiw_slope",      "min_duality_slope",
    "max_dB",            "max_diamond_defect",  "max_bilinearity_defect", "max_excluded_fraction"};

/// State of one run: output directory, manifest, checks and exclusion counts.
class RunContext {
public:
    RunContext(std::string out_dir, std::string command, const json& config, std::uint64_t seed, int workers)
        : dir_(std::move(out_dir)), command_(std::move(command)), seed_(seed), workers_(workers) {
        hash_ = config_hash(config);
        thresholds_ = config.contains("thresholds") ? config.at("thresholds") : json::object();
        if (!thresholds_.is_object()) throw ConfigError("key 'thresholds' must be an object");
        for (auto it = thresholds_.begin(); it != thresholds_.end(); ++it) {
            if (!kThresholdKeys.count(it.key())) throw ConfigError("unknown key 'thresholds." + it.key() + "'");
            if (!it.value().is_number()) throw ConfigError("key 'thresholds." + it.key() + "' must be a number");
        }
    }

    [[nodiscard]] const std::string& hash() const { return hash_; }
    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] int workers() const { return workers_; }

    void write(const std::string& name, const std::string& text) {
        write_text_file((fs::path(dir_) / name).string(), text);
        outputs_.push_back(name);
    }

    void add_exclusions(const std::string& what, int count) { exclusions_[what] += count; }
    [[nodiscard]] const std::map<std::string, int>& exclusions() const { return exclusions_; }

    [[nodiscard]] std::optional<double> threshold(const std::string& key) const {
        if (!thresholds_.contains(key)) return std::nullopt;
        return thresholds_.at(key).get<double>();
    }

    /// Adds a check when the threshold is configured.
    void check(const std::string& key, double value, bool upper) {
        const auto thr = threshold(key);
        if (!thr) return;
        ThresholdCheck c;
        c.name = key;
        c.value = value;
        c.threshold = *thr;
        c.upper = upper;
        c.pass = std::isfinite(value) && (upper ? value <= *thr : value >= *thr);
        checks_.push_back(c);
    }

    [[nodiscard]] const std::vector<ThresholdCheck>& checks() const { return checks_; }
    [[nodiscard]] bool all_pass() const {
        return std::all_of(checks_.begin(), checks_.end(), [](const ThresholdCheck& c) { return c.pass; });
    }
    [[nodiscard]] json checks_json() const {
        json arr = json::array();
        for (const auto& c : checks_)
            arr.push_back({{"name", c.name},
                           {"value", c.value},
                           {"threshold", c.threshold},
                           {"kind", c.upper ? "max" : "min"},
                           {"pass", c.pass}});
        return arr;
    }

    /// Common header of every JSON report.
    [[nodiscard]] json report_header() const {
        return {{"command", command_}, {"config_hash", hash_}, {"library_version", kLibraryVersion}, {"seed", seed_}};
    }

    [[nodiscard]] std::vector<std::string> outputs() const { return outputs_; }

private:
    std::string dir_;
    std::string command_;
    std::string hash_;
    std::uint64_t seed_;
    int workers_;
    json thresholds_;
    std::vector<std::string> outputs_;
    std::vector<ThresholdCheck> checks_;
    std::map<std::string, int> exclusions_;
};

json manifest_json(const std::string& command, const std::string& hash, std::uint64_t seed, int workers,
                   const std::string& status, double wall, const std::map<std::string, int>& excl,
                   const std::vector<std::string>& outputs, std::optional<int> exit_code, const std::string& message) {
    json m{{"command", command},
           {"config_hash", hash},
           {"library_version", kLibraryVersion},
           {"seed", seed},
           {"workers", workers},
           {"status", status},
           {"wall_time_seconds", wall},
           {"exclusions", excl},
           {"outputs", outputs},
           {"message", message}};
    m["exit_code"] = exit_code ? json(*exit_code) : json(nullptr);
    return m;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double rel_drift(double value, double initial) { return std::abs(value - initial) / std::max(std::abs(initial), 1e-300); }

std::vector<double> parse_times(const json& sec, const std::string& where, const BrownianDriver& driver) {
    std::vector<double> times;
    if (sec.contains("times")) {
        const json& arr = sec.at("times");
        if (!arr.is_array() || arr.empty()) throw ConfigError("key '" + where + ".times' must be a non-empty array");
        for (const auto& v : arr) {
            if (!v.is_number()) throw ConfigError("key '" + where + ".times' must hold numbers");
            const double t = v.get<double>();
            try {
                (void)driver.step_of(t);
            } catch (const ConfigError&) {
                throw ConfigError("key '" + where + ".times': " + fmt17(t) + " is not on the time grid");
            }
            times.push_back(t);
        }
        return times;
    }
    times.push_back(0.0);
    for (int s : default_checkpoints(driver.steps())) times.push_back(driver.time(s));
    return times;
}

int path_limit(const json& sec, const std::string& where, int n_paths, int fallback) {
    const int p = json_int_or(sec, "paths", std::min(n_paths, fallback), where);
    if (p < 1 || p > n_paths) throw ConfigError("key '" + where + ".paths' must be in [1, n_paths]");
    return p;
}

std::vector<Vec> require_seeds(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw ConfigError("missing key 'seeds'");
    return cfg.seeds;
}

std::function<double(double)> phi_from_string(const std::string& s) {
    if (s == "identity") return [](double v) { return v; };
    if (s == "square") return [](double v) { return v * v; };
    if (s == "cube") return [](double v) { return v * v * v; };
    if (s == "exp") return [](double v) { return std::exp(v); };
    throw ConfigError("key 'diagnostics.Phi': unknown function '" + s + "' (identity, square, cube, exp)");
}

// ---------------------------------------------------------------------------------------
// kiw-verify

json cmd_kiw_verify(RunContext& ctx, const ExperimentConfig& cfg) {
    if (!cfg.form) throw ConfigError("missing key 'form'");
    if (cfg.levels < 2) throw ConfigError("key 'levels' must be >= 2 for kiw-verify");
    const auto seeds = require_seeds(cfg);
    const BrownianDriver base = cfg.driver();
    KiwOptions opt;
    opt.levels = cfg.levels;
    opt.workers = ctx.workers();
    opt.test_sets = default_test_sets(cfg.n, cfg.form->degree(), cfg.random_test_vectors, cfg.seed);
    const KiwReport rep = kiw_residual(*cfg.form, cfg.flow, base, seeds, opt);
    int excl = 0;
    for (const auto& lv : rep.levels) excl = std::max(excl, lv.n_excluded);
    ctx.add_exclusions("kiw_paths", excl);

    ctx.write("kiw_residuals.csv", rep.to_csv());
    ctx.check("max_residual", rep.max_residual(), true);
    if (rep.levels.size() >= 2) {
        ctx.check("min_slope", rep.fit.slope, false);
        ctx.check("max_slope", rep.fit.slope, true);
    }
    ctx.check("max_excluded_fraction", static_cast<double>(excl) / cfg.n_paths, true);
    json r = ctx.report_header();
    r["kiw"] = rep.to_json();
    return r;
}

// ---------------------------------------------------------------------------------------
// advect

json cmd_advect(RunContext& ctx, const ExperimentConfig& cfg) {
    const json& sec = cfg.section("advect");
    check_json_keys(sec, {"kind", "initial", "probes", "times", "paths", "diagnostics", "grid"}, "advect");
    const AdvectedKind kind = advected_kind_from_string(json_string_or(sec, "kind", "density", "advect"));
    const FieldJet initial = field_from_json(json_require(sec, "initial", "advect"), cfg.n, "advect.initial");
    const BrownianDriver driver = cfg.driver();
    const AdvectedField field(kind, initial, cfg.flow, &driver, cfg.inverse);
    const auto probes = json_points(json_require(sec, "probes", "advect"), cfg.n, "advect.probes");
    if (probes.empty()) throw ConfigError("key 'advect.probes' must be non-empty");
    const auto times = parse_times(sec, "advect", driver);
    const int P = path_limit(sec, "advect", cfg.n_paths, 4);

    std::vector<std::string> names;
    if (sec.contains("diagnostics")) {
        for (const auto& v : sec.at("diagnostics")) {
            if (!v.is_string()) throw ConfigError("key 'advect.diagnostics' must hold strings");
            names.push_back(v.get<std::string>());
        }
    } else if (kind == AdvectedKind::density) {
        names.push_back("total_mass");
    }
    DiagnosticFields df;
    if (kind == AdvectedKind::density) df.density = &field;
    if (kind == AdvectedKind::magnetic_potential) df.potential = &field;
    for (const auto& nm : names) {
        if (nm == "total_mass" && df.density == nullptr) throw ConfigError("advect.diagnostics: total_mass needs kind 'density'");
        if (nm == "magnetic_helicity" && df.potential == nullptr)
            throw ConfigError("advect.diagnostics: magnetic_helicity needs kind 'magnetic_potential'");
        if (nm != "total_mass" && nm != "magnetic_helicity")
            throw ConfigError("advect.diagnostics: unsupported diagnostic '" + nm + "'");
    }
    if (!names.empty()) require_periodic(field);
    const QuadratureGrid grid(cfg.n, json_int_or(sec, "grid", 32, "advect"));

    // Forward flow of the probes, for the pullback identity at T.
    FlowOptions fo;
    fo.path_count = P;
    fo.workers = ctx.workers();
    const FlowSample flow = integrate_flow(cfg.flow, driver, probes, fo);
    check_exclusions(flow);
    ctx.add_exclusions("advect_paths", flow.n_excluded());

    struct PathOut {
        std::string values, pullback, diag;
        std::vector<std::pair<std::string, double>> drift;
        double max_pullback = 0.0;
        double max_drift = 0.0;
    };
    std::vector<PathOut> out(static_cast<std::size_t>(P));
    const int k = field.degree();
    parallel_for(P, ctx.workers(), [&](int p) {
        if (flow.excluded(p)) return;
        PathOut& o = out[static_cast<std::size_t>(p)];
        for (double t : times)
            for (std::size_t j = 0; j < probes.size(); ++j) {
                const KFormValue v = field.evaluate(p, t, probes[j]);
                for (int c = 0; c < v.size(); ++c)
                    o.values += csv_line({fmt17(t), std::to_string(p), std::to_string(j), std::to_string(c), fmt17(v[c])});
            }
        JetSample s;
        for (std::size_t j = 0; j < probes.size(); ++j) {
            const Vec y = flow.point(p, static_cast<int>(j), driver.steps());
            const Mat J = flow.jacobian(p, static_cast<int>(j), driver.steps());
            const KFormValue v = field.evaluate(p, driver.horizon(), y);
            KFormValue back;
            if (kind == AdvectedKind::scalar) back = v;
            else if (kind == AdvectedKind::density) back = J.determinant() * v;
            else back = pullback_linear(J, v);
            initial.sample(0.0, probes[j], 0, s);
            const KFormValue v0 = form_value(s, cfg.n, k);
            const double d = (back - v0).max_abs() / std::max(1.0, v0.max_abs());
            o.max_pullback = std::max(o.max_pullback, d);
            o.pullback += csv_line({std::to_string(p), std::to_string(j), fmt17(d)});
        }
        for (const auto& nm : names) {
            double v0 = 0.0, worst = 0.0;
            for (std::size_t q = 0; q < times.size(); ++q) {
                const double v = integral_diagnostic(nm, df, grid, times[q], p);
                if (q == 0) v0 = v;
                worst = std::max(worst, rel_drift(v, v0));
                o.diag += csv_line({fmt17(times[q]), std::to_string(p), nm, fmt17(v)});
            }
            o.drift.emplace_back(nm, worst);
            o.max_drift = std::max(o.max_drift, worst);
        }
    });

    std::string values = csv_line({"t", "path", "probe", "component", "value"});
    std::string pull = csv_line({"path", "probe", "relative_defect"});
    std::string diag = csv_line({"t", "path", "name", "value"});
    std::string drift = csv_line({"path", "name", "relative_drift"});
    double max_pull = 0.0, max_drift = 0.0;
    for (int p = 0; p < P; ++p) {
        const PathOut& o = out[static_cast<std::size_t>(p)];
        values += o.values;
        pull += o.pullback;
        diag += o.diag;
        for (const auto& [nm, d] : o.drift) drift += csv_line({std::to_string(p), nm, fmt17(d)});
        max_pull = std::max(max_pull, o.max_pullback);
        max_drift = std::max(max_drift, o.max_drift);
    }
    ctx.write("advect_values.csv", values);
    ctx.write("advect_pullback.csv", pull);
    if (!names.empty()) {
        ctx.write("advect_diagnostics.csv", diag);
        ctx.write("advect_drift.csv", drift);
        ctx.check("max_relative_drift", max_drift, true);
    }
    ctx.check("max_pullback_defect", max_pull, true);
    json r = ctx.report_header();
    r["advect"] = {{"kind", json_string_or(sec, "kind", "density", "advect")},
                   {"paths", P},
                   {"n_excluded", flow.n_excluded()},
                   {"max_pullback_defect", max_pull},
                   {"max_relative_drift", max_drift},
                   {"diagnostics", names}};
    return r;
}

// ---------------------------------------------------------------------------------------
// diagnostics

json cmd_diagnostics(RunContext& ctx, const ExperimentConfig& cfg) {
    const json& sec = cfg.section("diagnostics");
    check_json_keys(sec, {"names", "density", "scalar", "potential", "Phi", "grids", "times", "paths", "dB_probes",
                          "fd_step", "diamond"},
                    "diagnostics");
    const BrownianDriver driver = cfg.driver();
    const auto times = parse_times(sec, "diagnostics", driver);
    const int P = path_limit(sec, "diagnostics", cfg.n_paths, 2);

    std::optional<AdvectedField> density, scalar, potential;
    if (sec.contains("density"))
        density.emplace(AdvectedKind::density, field_from_json(sec.at("density"), cfg.n, "diagnostics.density"), cfg.flow,
                        &driver, cfg.inverse);
    if (sec.contains("scalar"))
        scalar.emplace(AdvectedKind::scalar, field_from_json(sec.at("scalar"), cfg.n, "diagnostics.scalar"), cfg.flow,
                       &driver, cfg.inverse);
    if (sec.contains("potential"))
        potential.emplace(AdvectedKind::magnetic_potential,
                          field_from_json(sec.at("potential"), cfg.n, "diagnostics.potential"), cfg.flow, &driver,
                          cfg.inverse);
    DiagnosticFields df;
    if (density) df.density = &*density;
    if (scalar) df.scalar = &*scalar;
    if (potential) df.potential = &*potential;
    df.Phi = phi_from_string(json_string_or(sec, "Phi", "identity", "diagnostics"));

    std::vector<std::string> names;
    for (const auto& v : sec.value("names", json::array())) {
        if (!v.is_string()) throw ConfigError("key 'diagnostics.names' must hold strings");
        names.push_back(v.get<std::string>());
    }
    for (const auto& nm : names) {
        if (nm == "total_mass") {
            if (!density) throw ConfigError("diagnostics.names: total_mass needs key 'diagnostics.density'");
            require_periodic(*density);
        } else if (nm == "entropy_integral") {
            if (!density || !scalar)
                throw ConfigError("diagnostics.names: entropy_integral needs keys 'diagnostics.density' and 'diagnostics.scalar'");
            require_periodic(*density);
            require_periodic(*scalar);
        } else if (nm == "magnetic_helicity") {
            if (!potential) throw ConfigError("diagnostics.names: magnetic_helicity needs key 'diagnostics.potential'");
            if (cfg.n != 3) throw ConfigError("diagnostics.names: magnetic_helicity needs dimension 3");
            require_periodic(*potential);
        } else {
            throw ConfigError("diagnostics.names: unknown diagnostic '" + nm + "'");
        }
    }
    std::vector<int> grids;
    for (const auto& v : sec.value("grids", json::array({32}))) {
        if (!v.is_number_integer() || v.get<int>() < 2) throw ConfigError("key 'diagnostics.grids' must hold integers >= 2");
        grids.push_back(v.get<int>());
    }
    if (grids.empty()) throw ConfigError("key 'diagnostics.grids' must be non-empty");

    json r = ctx.report_header();
    json summary = json::object();

    // Integral diagnostics, per grid and path.
    if (!names.empty()) {
        FlowOptions fo;
        fo.path_count = P;
        fo.workers = ctx.workers();
        const FlowSample probe_flow = integrate_flow(cfg.flow, driver, {Vec::Zero(cfg.n)}, fo);
        check_exclusions(probe_flow);
        ctx.add_exclusions("diagnostic_paths", probe_flow.n_excluded());

        std::string drift_csv = csv_line({"grid", "path", "name", "relative_drift"});
        std::vector<std::vector<double>> mean_drift(grids.size(), std::vector<double>(names.size(), 0.0));
        double finest_max = 0.0;
        for (std::size_t g = 0; g < grids.size(); ++g) {
            const QuadratureGrid grid(cfg.n, grids[g]);
            std::vector<std::string> rows(static_cast<std::size_t>(P));
            std::vector<std::vector<double>> drift(static_cast<std::size_t>(P), std::vector<double>(names.size(), 0.0));
            parallel_for(P, ctx.workers(), [&](int p) {
                if (probe_flow.excluded(p)) return;
                for (std::size_t a = 0; a < names.size(); ++a) {
                    double v0 = 0.0;
                    for (std::size_t q = 0; q < times.size(); ++q) {
                        const double v = integral_diagnostic(names[a], df, grid, times[q], p);
                        if (q == 0) v0 = v;
                        drift[static_cast<std::size_t>(p)][a] =
                            std::max(drift[static_cast<std::size_t>(p)][a], rel_drift(v, v0));
                        rows[static_cast<std::size_t>(p)] += csv_line({fmt17(times[q]), std::to_string(p), names[a], fmt17(v)});
                    }
                }
            });
            std::string csv = csv_line({"t", "path", "name", "value"});
            int retained = 0;
            for (int p = 0; p < P; ++p) {
                csv += rows[static_cast<std::size_t>(p)];
                if (probe_flow.excluded(p)) continue;
                ++retained;
                for (std::size_t a = 0; a < names.size(); ++a) {
                    const double d = drift[static_cast<std::size_t>(p)][a];
                    drift_csv += csv_line({std::to_string(grids[g]), std::to_string(p), names[a], fmt17(d)});
                    mean_drift[g][a] += d;
                    if (g + 1 == grids.size()) finest_max = std::max(finest_max, d);
                }
            }
            for (auto& m : mean_drift[g]) m /= std::max(retained, 1);
            ctx.write("diagnostics_N" + std::to_string(grids[g]) + ".csv", csv);
        }
        ctx.write("diagnostics_drift.csv", drift_csv);
        ctx.check("max_relative_drift", finest_max, true);
        // Refinement: finest-grid mean drift relative to the coarsest; drifts already at the
        // quadrature roundoff floor (<= 1e-9) count as converged.
        double worst_ratio = 0.0;
        json ratios = json::object();
        if (grids.size() >= 2) {
            for (std::size_t a = 0; a < names.size(); ++a) {
                const double fine = mean_drift.back()[a], coarse = mean_drift.front()[a];
                const double ratio = fine <= 1e-9 ? 0.0 : fine / std::max(coarse, 1e-300);
                ratios[names[a]] = ratio;
                worst_ratio = std::max(worst_ratio, ratio);
            }
            ctx.check("max_refinement_ratio", worst_ratio, true);
        }
        json md = json::object();
        for (std::size_t a = 0; a < names.size(); ++a) {
            json per = json::array();
            for (std::size_t g = 0; g < grids.size(); ++g) per.push_back(mean_drift[g][a]);
            md[names[a]] = per;
        }
        summary["grids"] = grids;
        summary["mean_relative_drift"] = md;
        summary["max_relative_drift_finest"] = finest_max;
        summary["refinement_ratio"] = ratios;
    }

    // Divergence-free magnetic field: d(dA) at probe points.
    if (sec.contains("dB_probes")) {
        if (!potential) throw ConfigError("key 'diagnostics.dB_probes' needs key 'diagnostics.potential'");
        if (cfg.n != 3) throw ConfigError("key 'diagnostics.dB_probes' needs dimension 3");
        const auto probes = json_points(sec.at("dB_probes"), cfg.n, "diagnostics.dB_probes");
        const double h = json_number_or(sec, "fd_step", 1e-3, "diagnostics");
        const AdvectedMagnetic mag(potential->initial(), cfg.flow, driver, cfg.inverse, h);
        std::vector<std::string> rows(static_cast<std::size_t>(P));
        std::vector<double> worst(static_cast<std::size_t>(P), 0.0);
        parallel_for(P, ctx.workers(), [&](int p) {
            for (double t : times)
                for (std::size_t j = 0; j < probes.size(); ++j) {
                    const double v = mag.dB(p, t, probes[j]).max_abs();
                    worst[static_cast<std::size_t>(p)] = std::max(worst[static_cast<std::size_t>(p)], v);
                    rows[static_cast<std::size_t>(p)] += csv_line({fmt17(t), std::to_string(p), std::to_string(j), fmt17(v)});
                }
        });
        std::string csv = csv_line({"t", "path", "probe", "abs_dB"});
        double mx = 0.0;
        for (int p = 0; p < P; ++p) {
            csv += rows[static_cast<std::size_t>(p)];
            mx = std::max(mx, worst[static_cast<std::size_t>(p)]);
        }
        ctx.write("diagnostics_dB.csv", csv);
        ctx.check("max_dB", mx, true);
        summary["max_abs_dB"] = mx;
    }

    // Diamond pairing cases.
    if (sec.contains("diamond")) {
        const json& cases = sec.at("diamond");
        if (!cases.is_array()) throw ConfigError("key 'diagnostics.diamond' must be an array");
        std::string csv = csv_line({"case", "type", "lhs", "rhs", "defect", "bilinearity_defect"});
        double max_def = 0.0, max_bil = 0.0;
        for (std::size_t c = 0; c < cases.size(); ++c) {
            const std::string w = "diagnostics.diamond[" + std::to_string(c) + "]";
            check_json_keys(cases[c], {"type", "a", "b", "u", "a2", "b2", "grid"}, w);
            const std::string ts = json_string_or(cases[c], "type", "scalar", w);
            DiamondType type;
            if (ts == "scalar") type = DiamondType::scalar;
            else if (ts == "density") type = DiamondType::density;
            else if (ts == "one_form") type = DiamondType::one_form;
            else throw ConfigError("key '" + w + ".type': unknown tensor type '" + ts + "'");
            const FieldJet a = field_from_json(json_require(cases[c], "a", w), cfg.n, w + ".a");
            const FieldJet b = field_from_json(json_require(cases[c], "b", w), cfg.n, w + ".b");
            const FieldJet u = field_from_json(json_require(cases[c], "u", w), cfg.n, w + ".u");
            const QuadratureGrid grid(cfg.n, json_int_or(cases[c], "grid", 32, w));
            const DiamondPairing dp = diamond_pairing(b, a, type, u, grid, 0.0);
            const double scale = std::max({std::abs(dp.lhs), std::abs(dp.rhs), 1.0});
            // Bilinearity: scaling in each slot, plus additivity when second fields are given.
            const double alpha = 2.5;
            double bil = std::abs(diamond_pairing(scaled(alpha, b), a, type, u, grid, 0.0).lhs - alpha * dp.lhs);
            bil = std::max(bil, std::abs(diamond_pairing(b, scaled(alpha, a), type, u, grid, 0.0).lhs - alpha * dp.lhs));
            if (cases[c].contains("a2")) {
                const FieldJet a2 = field_from_json(cases[c].at("a2"), cfg.n, w + ".a2");
                const double sum = diamond_pairing(b, linear_combination({1.0, -0.75}, {a, a2}), type, u, grid, 0.0).lhs;
                bil = std::max(bil, std::abs(sum - dp.lhs + 0.75 * diamond_pairing(b, a2, type, u, grid, 0.0).lhs));
            }
            if (cases[c].contains("b2")) {
                const FieldJet b2 = field_from_json(cases[c].at("b2"), cfg.n, w + ".b2");
                const double sum = diamond_pairing(linear_combination({1.0, 1.5}, {b, b2}), a, type, u, grid, 0.0).lhs;
                bil = std::max(bil, std::abs(sum - dp.lhs - 1.5 * diamond_pairing(b2, a, type, u, grid, 0.0).lhs));
            }
            bil /= scale;
            const double def = std::abs(dp.defect()) / scale;
            max_def = std::max(max_def, def);
            max_bil = std::max(max_bil, bil);
            csv += csv_line({std::to_string(c), ts, fmt17(dp.lhs), fmt17(dp.rhs), fmt17(def), fmt17(bil)});
        }
        ctx.write("diamond.csv", csv);
        ctx.check("max_diamond_defect", max_def, true);
        ctx.check("max_bilinearity_defect", max_bil, true);
        summary["max_diamond_defect"] = max_def;
        summary["max_bilinearity_defect"] = max_bil;
    }
    summary["paths"] = P;
    summary["names"] = names;
    r["diagnostics"] = summary;
    return r;
}

// ---------------------------------------------------------------------------------------
// kelvin

json cmd_kelvin(RunContext& ctx, const ExperimentConfig& cfg) {
    const json& sec = cfg.section("kelvin");
    check_json_keys(sec, {"v0", "forcing", "loop", "inverse", "paths", "change_of_variables"}, "kelvin");
    const FieldJet v0 = field_from_json(json_require(sec, "v0", "kelvin"), cfg.n, "kelvin.v0");
    FieldJet F;
    if (sec.contains("forcing") && !sec.at("forcing").is_null())
        F = field_from_json(sec.at("forcing"), cfg.n, "kelvin.forcing");
    const json& ls = json_require(sec, "loop", "kelvin");
    check_json_keys(ls, {"center", "radius", "nodes", "axes"}, "kelvin.loop");
    const Vec center = json_point(json_require(ls, "center", "kelvin.loop"), cfg.n, "kelvin.loop.center");
    int ax0 = 0, ax1 = 1;
    if (ls.contains("axes")) {
        const auto ax = ls.at("axes");
        if (!ax.is_array() || ax.size() != 2 || !ax[0].is_number_integer() || !ax[1].is_number_integer())
            throw ConfigError("key 'kelvin.loop.axes' must be two integers");
        ax0 = ax[0].get<int>();
        ax1 = ax[1].get<int>();
    }
    const int M = json_int_or(ls, "nodes", 256, "kelvin.loop");
    if (M < kMinLoopNodes) throw ConfigError("key 'kelvin.loop.nodes' must be >= 16");
    Loop loop;
    try {
        loop = circle_loop(center, json_number(ls, "radius", "kelvin.loop"), M, ax0, ax1);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("kelvin.loop: ") + e.what());
    }
    KelvinOptions ko;
    ko.method = inverse_method_from_string(json_string_or(sec, "inverse", "reversed_heun", "kelvin"));
    ko.path_count = path_limit(sec, "kelvin", cfg.n_paths, cfg.n_paths);
    ko.workers = ctx.workers();
    const bool want_cov = sec.value("change_of_variables", true);

    BrownianDriver driver = cfg.driver();
    std::string summary = csv_line({"level", "dt", "rms_terminal_defect", "max_abs_defect", "n_excluded"});
    std::vector<double> dts, rms;
    double finest_max = 0.0;
    int excl = 0;
    json levels = json::array();
    for (int level = 0; level < cfg.levels; ++level) {
        if (level > 0) driver = refine(driver);
        const KelvinResult res = kelvin_check(v0, F, cfg.flow, driver, loop, ko);
        ctx.write("kelvin_level" + std::to_string(level) + ".csv", res.to_csv());
        summary += csv_line({std::to_string(level), fmt17(driver.dt()), fmt17(res.rms_terminal_defect()),
                             fmt17(res.max_abs_defect()), std::to_string(res.n_excluded)});
        dts.push_back(driver.dt());
        rms.push_back(res.rms_terminal_defect());
        finest_max = res.max_abs_defect();
        excl = std::max(excl, res.n_excluded);
        levels.push_back({{"dt", driver.dt()},
                          {"rms_terminal_defect", res.rms_terminal_defect()},
                          {"max_abs_defect", res.max_abs_defect()},
                          {"n_excluded", res.n_excluded}});
    }
    ctx.add_exclusions("kelvin_paths", excl);
    ctx.write("kelvin_summary.csv", summary);
    const SlopeFit fit = fit_log2_slope(dts, rms);
    if (cfg.levels >= 2) ctx.check("min_kelvin_slope", fit.slope, false);
    ctx.check("max_kelvin_defect", finest_max, true);

    json r = ctx.report_header();
    json k{{"levels", levels},
           {"slope", fit.slope},
           {"r_squared", fit.r_squared},
           {"loop_nodes", M},
           {"inverse", sec.value("inverse", std::string("reversed_heun"))}};
    if (want_cov) {
        // change of variables on the finest driver at T
        const KelvinField kf(v0, F, cfg.flow, &driver, ko.method);
        const int P = ko.path_count;
        std::vector<ChangeOfVariables> cv(static_cast<std::size_t>(P));
        std::vector<char> ok(static_cast<std::size_t>(P), 0);
        parallel_for(P, ctx.workers(), [&](int p) {
            try {
                cv[static_cast<std::size_t>(p)] = change_of_variables(kf, cfg.flow, driver, loop, p, driver.steps());
                ok[static_cast<std::size_t>(p)] = 1;
            } catch (const NumericalError&) {
            }
        });
        std::string csv = csv_line({"path", "advected", "initial", "relative_difference"});
        double worst = 0.0;
        for (int p = 0; p < P; ++p) {
            if (!ok[static_cast<std::size_t>(p)]) continue;
            const auto& c = cv[static_cast<std::size_t>(p)];
            const double d = std::abs(c.advected - c.initial) / std::max(1.0, std::abs(c.initial));
            worst = std::max(worst, d);
            csv += csv_line({std::to_string(p), fmt17(c.advected), fmt17(c.initial), fmt17(d)});
        }
        ctx.write("kelvin_change_of_variables.csv", csv);
        ctx.check("max_change_of_variables", worst, true);
        k["max_change_of_variables"] = worst;
    }
    r["kelvin"] = k;
    return r;
}

// ---------------------------------------------------------------------------------------
// convergence

json cmd_convergence(RunContext& ctx, const ExperimentConfig& cfg) {
    if (cfg.levels < 2) throw ConfigError("key 'levels' must be >= 2 for convergence");
    const auto seeds = require_seeds(cfg);
    std::vector<std::string> quantities;
    if (cfg.has("convergence")) {
        const json& sec = cfg.section("convergence");
        check_json_keys(sec, {"quantities"}, "convergence");
        for (const auto& v : sec.value("quantities", json::array())) {
            if (!v.is_string()) throw ConfigError("key 'convergence.quantities' must hold strings");
            quantities.push_back(v.get<std::string>());
        }
    }
    if (quantities.empty()) {
        quantities.push_back("flow");
        if (cfg.form) quantities.push_back("kiw");
        if (cfg.form && cfg.form->convention() == Convention::stratonovich) quantities.push_back("duality");
    }
    const BrownianDriver base = cfg.driver();
    std::vector<ConvergenceTable> tables;
    for (const auto& q : quantities) {
        if (q == "flow") {
            tables.push_back(flow_self_convergence(cfg.flow, base, seeds, cfg.levels, ctx.workers()));
            ctx.check("min_flow_slope", tables.back().fit.slope, false);
        } else if (q == "kiw") {
            if (!cfg.form) throw ConfigError("convergence.quantities: 'kiw' needs key 'form'");
            KiwOptions opt;
            opt.levels = cfg.levels;
            opt.workers = ctx.workers();
            opt.test_sets = default_test_sets(cfg.n, cfg.form->degree(), cfg.random_test_vectors, cfg.seed);
            tables.push_back(kiw_convergence(kiw_residual(*cfg.form, cfg.flow, base, seeds, opt)));
            ctx.check("min_kiw_slope", tables.back().fit.slope, false);
        } else if (q == "duality") {
            if (!cfg.form || cfg.form->convention() != Convention::stratonovich)
                throw ConfigError("convergence.quantities: 'duality' needs a Stratonovich 'form'");
            tables.push_back(duality_convergence(*cfg.form, cfg.flow, base, seeds, cfg.levels, ctx.workers()));
            ctx.check("min_duality_slope", tables.back().fit.slope, false);
        } else {
            throw ConfigError("convergence.quantities: unknown quantity '" + q + "'");
        }
        int excl = 0;
        for (int e : tables.back().n_excluded) excl = std::max(excl, e);
        ctx.add_exclusions(q + "_paths", excl);
    }
    ctx.write("convergence.csv", convergence_csv(tables));
    json r = ctx.report_header();
    json arr = json::array();
    for (const auto& t : tables) arr.push_back(t.to_json());
    r["convergence"] = arr;
    return r;
}

const char* report_name(const std::string& cmd) {
    if (cmd == "kiw-verify") return "kiw_report.json";
    if (cmd == "advect") return "advect_report.json";
    if (cmd == "kelvin") return "kelvin_report.json";
    if (cmd == "convergence") return "convergence_report.json";
    return "diagnostics_report.json";
}

}  // namespace

RunOutcome run_experiment(const RunRequest& req, std::ostream* log) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    RunOutcome out;
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), req.command) == names.end()) {
        out.exit_code = kExitConfig;
        out.message = "unknown command '" + req.command + "'";
        return out;
    }
    const fs::path manifest_path = fs::path(req.out_dir) / "run_manifest.json";
    try {
        std::error_code ec;
        fs::create_directories(req.out_dir, ec);
        if (ec || !fs::is_directory(req.out_dir)) throw IoError("cannot create output directory '" + req.out_dir + "'");
    } catch (const Error& e) {
        out.exit_code = kExitIo;
        out.message = e.what();
        return out;
    }

    json doc = req.config;
    std::string hash = "";
    std::uint64_t seed = 0;
    int workers = 1;
    std::map<std::string, int> excl;
    auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };
    auto finalize = [&](const std::string& status) {
        try {
            write_text_file(manifest_path.string(), dump(manifest_json(req.command, hash, seed, workers, status, elapsed(),
                                                                       excl, out.outputs, out.exit_code, out.message)));
        } catch (const Error& e) {
            out.exit_code = kExitIo;
            out.message = e.what();
        }
    };

    try {
        if (!req.load_error.empty()) throw ConfigError(req.load_error);
        if (!doc.is_object()) throw ConfigError("config must be a JSON object");
        if (req.seed) doc["seed"] = *req.seed;
        if (req.workers) doc.erase("workers");
        const ExperimentConfig cfg = parse_config(doc);
        workers = resolve_workers(req.workers ? *req.workers : cfg.workers);
        seed = cfg.seed;
        // workers never affect results: exclude it from the hash
        json hashed = doc;
        hashed.erase("workers");
        RunContext ctx(req.out_dir, req.command, hashed, seed, workers);
        hash = ctx.hash();
        write_text_file(manifest_path.string(),
                        dump(manifest_json(req.command, hash, seed, workers, "running", 0.0, {}, {}, std::nullopt, "")));

        json report;
        if (req.command == "kiw-verify") report = cmd_kiw_verify(ctx, cfg);
        else if (req.command == "advect") report = cmd_advect(ctx, cfg);
        else if (req.command == "kelvin") report = cmd_kelvin(ctx, cfg);
        else if (req.command == "convergence") report = cmd_convergence(ctx, cfg);
        else report = cmd_diagnostics(ctx, cfg);

        report["checks"] = ctx.checks_json();
        report["pass"] = ctx.all_pass();
        ctx.write(report_name(req.command), dump(report));
        out.outputs = ctx.outputs();
        out.checks = ctx.checks();
        out.report = report;
        excl = ctx.exclusions();
        out.exit_code = ctx.all_pass() ? kExitPass : kExitThreshold;
        out.message = ctx.all_pass() ? "all checks passed" : "threshold check failed";
        if (log)
            for (const auto& c : ctx.checks())
                *log << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << short_num(c.value)
                     << (c.upper ? " <= " : " >= ") << short_num(c.threshold) << "\n";
        finalize("finished");
    } catch (const ConfigError& e) {
        out.exit_code = kExitConfig;
        out.message = std::string("config error: ") + e.what();
        finalize("failed");
    } catch (const IoError& e) {
        out.exit_code = kExitIo;
        out.message = std::string("I/O error: ") + e.what();
        finalize("failed");
    } catch (const NumericalError& e) {
        out.exit_code = kExitThreshold;
        out.message = std::string("numerical failure: ") + e.what();
        finalize("failed");
    } catch (const std::exception& e) {
        out.exit_code = kExitConfig;
        out.message = std::string("error: ") + e.what();
        finalize("failed");
    }
    if (log) *log << req.command << ": " << out.message << " (exit " << out.exit_code << ")\n";
    return out;
}

int run_from_file(const std::string& command, const std::string& config_path, const std::string& out_dir,
                  std::optional<std::uint64_t> seed, std::optional<int> workers, std::ostream& log) {
    RunRequest req;
    req.command = command;
    req.out_dir = out_dir;
    req.seed = seed;
    req.workers = workers;
    try {
        req.config = load_config_file(config_path);
    } catch (const IoError& e) {
        log << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ConfigError& e) {
        req.load_error = e.what();
    }
    return run_experiment(req, &log).exit_code;
}

}  // namespace kiw
