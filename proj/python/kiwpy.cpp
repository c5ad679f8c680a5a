/// @file kiwpy.cpp
/// @brief Python bindings: catalog fields, pointwise exterior calculus and the experiment runner.
#include "kiw/catalog.hpp"
#include "kiw/config.hpp"
#include "kiw/exterior.hpp"
#include "kiw/runner.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <vector>

namespace py = pybind11;
using namespace kiw;

namespace {

Vec to_vec(const std::vector<double>& x, int n) {
    if (static_cast<int>(x.size()) != n) throw py::value_error("point has dimension " + std::to_string(x.size()) + ", field expects " + std::to_string(n));
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = x[i];
    return v;
}

std::vector<double> comps(const KFormValue& K) { return {K.comps.begin(), K.comps.begin() + K.size()}; }

std::vector<double> values(const FieldJet& f, const std::vector<double>& x, double t) {
    const JetSample s = f.jet(t, to_vec(x, f.dim()), 0);
    return {s.value.begin(), s.value.begin() + f.components()};
}

std::vector<std::vector<double>> gradient(const FieldJet& f, const std::vector<double>& x, double t) {
    const JetSample s = f.jet(t, to_vec(x, f.dim()), 1);
    std::vector<std::vector<double>> g(f.components(), std::vector<double>(f.dim()));
    for (int c = 0; c < f.components(); ++c)
        for (int l = 0; l < f.dim(); ++l) g[c][l] = s.d1[c][l];
    return g;
}

py::dict run(const std::string& command, const std::string& config_json, const std::string& out_dir,
             std::optional<std::uint64_t> seed, std::optional<int> workers) {
    RunRequest req;
    req.command = command;
    req.out_dir = out_dir;
    req.seed = seed;
    req.workers = workers;
    try {
        req.config = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::exception& e) {
        req.load_error = e.what();
    }
    RunOutcome out;
    {
        py::gil_scoped_release release;
        out = run_experiment(req);
    }
    py::list checks;
    for (const auto& c : out.checks) {
        py::dict d;
        d["name"] = c.name;
        d["value"] = c.value;
        d["threshold"] = c.threshold;
        d["upper"] = c.upper;
        d["pass"] = c.pass;
        checks.append(d);
    }
    py::dict r;
    r["exit_code"] = out.exit_code;
    r["message"] = out.message;
    r["outputs"] = out.outputs;
    r["checks"] = checks;
    r["report"] = out.report.dump();
    return r;
}

}  // namespace

PYBIND11_MODULE(kiwpy, m) {
    m.doc() = "Stochastic transport of differential forms: catalog fields, exterior calculus and experiment runner";
    m.attr("__version__") = kLibraryVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<FieldJet>(m, "Field")
        .def_property_readonly("dim", &FieldJet::dim)
        .def_property_readonly("degree", &FieldJet::degree)
        .def_property_readonly("components", &FieldJet::components)
        .def("__call__", &values, py::arg("x"), py::arg("t") = 0.0, "Component values at x")
        .def("gradient", &gradient, py::arg("x"), py::arg("t") = 0.0, "First derivatives [component][axis] at x");

    m.def("catalog_field", &catalog_field, py::arg("name"), py::arg("params"), py::arg("dim"), "Instantiate a catalog entry");
    m.def("catalog_manifest", [] { return catalog_manifest().dump(); }, "Catalog description as a JSON string");
    m.def("exterior_derivative_field", &exterior_derivative_jet, py::arg("K"));
    m.def("lie_derivative_field", &lie_derivative_jet, py::arg("u"), py::arg("K"));
    m.def("interior_product_field", &interior_product_jet, py::arg("u"), py::arg("K"));
    m.def("wedge_field", &wedge_jet, py::arg("a"), py::arg("b"));
    m.def(
        "exterior_derivative",
        [](const FieldJet& K, const std::vector<double>& x, double t) { return comps(exterior_derivative(K, t, to_vec(x, K.dim()))); },
        py::arg("K"), py::arg("x"), py::arg("t") = 0.0);
    m.def(
        "lie_derivative",
        [](const FieldJet& u, const FieldJet& K, const std::vector<double>& x, double t) {
            return comps(lie_derivative(u, K, t, to_vec(x, K.dim())));
        },
        py::arg("u"), py::arg("K"), py::arg("x"), py::arg("t") = 0.0);
    m.def(
        "double_lie_derivative",
        [](const FieldJet& u, const FieldJet& K, const std::vector<double>& x, double t) {
            return comps(double_lie_derivative(u, K, t, to_vec(x, K.dim())));
        },
        py::arg("u"), py::arg("K"), py::arg("x"), py::arg("t") = 0.0);
    m.def("commands", &command_names, "Runner subcommand names");
    m.def("run", &run, py::arg("command"), py::arg("config_json"), py::arg("out_dir"), py::arg("seed") = std::nullopt,
          py::arg("workers") = std::nullopt,
          "Run one subcommand; returns exit_code, message, outputs, checks and the JSON report");
}
