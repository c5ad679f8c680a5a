/// @file config.cpp
/// @brief Experiment configuration parsing, validation and hashing.
#include "kiw/config.hpp"

#include "kiw/catalog.hpp"
#include "kiw/io.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace kiw {

using nlohmann::json;

namespace {

std::string key_path(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    check_json_keys(j, allowed, where);
}

const json& require(const json& j, const std::string& key, const std::string& where) {
    return json_require(j, key, where);
}

FlowModel parse_flow(const json& j, int n, int n_channels) {
    check_keys(j, {"drift", "noise", "scheme", "inverse"}, "flow");
    FlowModel m;
    m.drift = field_from_json(require(j, "drift", "flow"), n, "flow.drift");
    if (j.contains("noise")) {
        const json& arr = j.at("noise");
        if (!arr.is_array()) throw ConfigError("flow.noise: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string w = "flow.noise[" + std::to_string(i) + "]";
            check_keys(arr[i], {"field", "channel"}, w);
            NoiseField nf;
            nf.field = field_from_json(require(arr[i], "field", w), n, w + ".field");
            nf.channel = json_int(arr[i], "channel", w);
            m.noise.push_back(nf);
        }
    }
    m.scheme = scheme_from_string(json_string_or(j, "scheme", "stratonovich_heun", "flow"));
    try {
        m.validate(n_channels);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("flow: ") + e.what());
    }
    return m;
}

FieldJet optional_field(const json& j, const std::string& key, int n, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return {};
    return field_from_json(j.at(key), n, key_path(where, key));
}

SemimartingaleForm parse_form(const json& j, int n, int n_channels) {
    check_keys(j, {"convention", "K0", "G", "H"}, "form");
    const Convention conv = convention_from_string(json_string_or(j, "convention", "ito", "form"));
    const FieldJet K0 = field_from_json(require(j, "K0", "form"), n, "form.K0");
    const FieldJet G = optional_field(j, "G", n, "form");
    const json H = j.value("H", json::array());
    if (!H.is_array()) throw ConfigError("form.H: expected an array");
    SemimartingaleForm sm;
    if (conv == Convention::ito) {
        std::vector<ItoDiffusion> hs;
        for (std::size_t i = 0; i < H.size(); ++i) {
            const std::string w = "form.H[" + std::to_string(i) + "]";
            check_keys(H[i], {"field", "channel"}, w);
            hs.push_back({field_from_json(require(H[i], "field", w), n, w + ".field"), json_int(H[i], "channel", w)});
        }
        sm = SemimartingaleForm::ito(K0, G, hs);
    } else {
        std::vector<StratonovichDiffusion> hs;
        for (std::size_t i = 0; i < H.size(); ++i) {
            const std::string w = "form.H[" + std::to_string(i) + "]";
            check_keys(H[i], {"channel", "H0", "g", "h"}, w);
            StratonovichDiffusion d;
            d.channel = json_int(H[i], "channel", w);
            d.H0 = field_from_json(require(H[i], "H0", w), n, w + ".H0");
            d.g = optional_field(H[i], "g", n, w);
            const json hh = H[i].value("h", json::array());
            for (std::size_t q = 0; q < hh.size(); ++q) {
                const std::string wq = w + ".h[" + std::to_string(q) + "]";
                check_keys(hh[q], {"field", "channel"}, wq);
                d.h.push_back({field_from_json(require(hh[q], "field", wq), n, wq + ".field"), json_int(hh[q], "channel", wq)});
            }
            hs.push_back(std::move(d));
        }
        sm = SemimartingaleForm::stratonovich(K0, G, hs);
    }
    try {
        sm.validate(n_channels);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("form: ") + e.what());
    }
    return sm;
}

}  // namespace

void check_json_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError((where.empty() ? std::string("config") : where) + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("unknown key '" + key_path(where, it.key()) + "'");
}

const json& json_require(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError("missing key '" + key_path(where, key) + "'");
    return j.at(key);
}

double json_number(const json& j, const std::string& key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_number()) throw ConfigError("key '" + key_path(where, key) + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError("key '" + key_path(where, key) + "' must be finite");
    return d;
}

double json_number_or(const json& j, const std::string& key, double fallback, const std::string& where) {
    return j.is_object() && j.contains(key) ? json_number(j, key, where) : fallback;
}

int json_int(const json& j, const std::string& key, const std::string& where) {
    const json& v = require(j, key, where);
    if (!v.is_number_integer()) throw ConfigError("key '" + key_path(where, key) + "' must be an integer");
    return v.get<int>();
}

int json_int_or(const json& j, const std::string& key, int fallback, const std::string& where) {
    return j.is_object() && j.contains(key) ? json_int(j, key, where) : fallback;
}

std::string json_string_or(const json& j, const std::string& key, const std::string& fallback,
                           const std::string& where) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw ConfigError("key '" + key_path(where, key) + "' must be a string");
    return j.at(key).get<std::string>();
}

Vec json_point(const json& j, int n, const std::string& where) {
    if (!j.is_array() || static_cast<int>(j.size()) != n)
        throw ConfigError(where + ": expected an array of " + std::to_string(n) + " numbers");
    Vec x(n);
    for (int i = 0; i < n; ++i) {
        if (!j[static_cast<std::size_t>(i)].is_number()) throw ConfigError(where + ": coordinates must be numbers");
        x(i) = j[static_cast<std::size_t>(i)].get<double>();
    }
    return x;
}

std::vector<Vec> json_points(const json& j, int n, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array of points");
    std::vector<Vec> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(json_point(j[i], n, where + "[" + std::to_string(i) + "]"));
    return out;
}

const json& ExperimentConfig::section(const std::string& key) const { return require(raw, key, ""); }

BrownianDriver ExperimentConfig::driver() const { return make_driver(seed, T, dt, n_paths, n_channels); }

ExperimentConfig parse_config(const json& doc) {
    check_keys(doc, {"description", "dimension", "T", "dt", "levels", "n_paths", "seed", "n_channels", "workers", "flow",
                     "form", "seeds", "test_vectors", "advect", "kelvin", "diagnostics", "convergence", "thresholds"},
               "");
    ExperimentConfig c;
    c.raw = doc;
    c.n = json_int(doc, "dimension", "");
    if (c.n < 1 || c.n > kMaxDim) throw ConfigError("key 'dimension' must be 1, 2 or 3");
    c.T = json_number(doc, "T", "");
    c.dt = json_number(doc, "dt", "");
    c.levels = json_int_or(doc, "levels", 1, "");
    c.n_paths = json_int(doc, "n_paths", "");
    c.n_channels = json_int_or(doc, "n_channels", 0, "");
    c.workers = json_int_or(doc, "workers", 0, "");
    if (c.levels < 1 || c.levels > 12) throw ConfigError("key 'levels' must be in [1, 12]");
    if (c.n_paths < 1) throw ConfigError("key 'n_paths' must be >= 1");
    if (c.n_channels < 0) throw ConfigError("key 'n_channels' must be >= 0");
    const json& s = require(doc, "seed", "");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
        throw ConfigError("key 'seed' must be a non-negative integer");
    c.seed = s.get<std::uint64_t>();
    // grid check: the base step must divide T (refinements halve it)
    try {
        (void)make_driver(0, c.T, c.dt, 1, 0);
    } catch (const ConfigError&) {
        throw ConfigError("keys 'T'/'dt': dt must divide T");
    }

    c.flow = parse_flow(require(doc, "flow", ""), c.n, c.n_channels);
    c.inverse = inverse_method_from_string(json_string_or(doc.at("flow"), "inverse", "newton_exact", "flow"));
    if (doc.contains("form")) c.form = parse_form(doc.at("form"), c.n, c.n_channels);
    if (doc.contains("seeds")) c.seeds = json_points(doc.at("seeds"), c.n, "seeds");
    if (doc.contains("test_vectors")) {
        check_keys(doc.at("test_vectors"), {"random"}, "test_vectors");
        c.random_test_vectors = json_int_or(doc.at("test_vectors"), "random", 3, "test_vectors");
        if (c.random_test_vectors < 0) throw ConfigError("key 'test_vectors.random' must be >= 0");
    }
    if (doc.contains("thresholds") && !doc.at("thresholds").is_object())
        throw ConfigError("key 'thresholds' must be an object");
    return c;
}

json load_config_file(const std::string& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
}

std::string config_hash(const json& doc) {
    const std::string s = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace kiw
