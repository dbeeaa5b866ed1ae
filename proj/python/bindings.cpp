#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "datekit/dgp.hpp"
#include "datekit/eval.hpp"
#include "datekit/runner.hpp"

namespace py = pybind11;
using namespace datekit;

namespace {

ScenarioConfig config_from(const py::dict& d) {
    const std::string text = py::module_::import("json").attr("dumps")(d).cast<std::string>();
    return nlohmann::json::parse(text).get<ScenarioConfig>();
}

py::dict path_dict(const DatePath& p) {
    py::dict d;
    d["estimate"] = p.estimate;
    d["lower"] = p.lower;
    d["upper"] = p.upper;
    d["level"] = p.level;
    if (p.components) {
        d["spot"] = p.components->spot;
        d["persistent"] = p.components->persistent;
        d["trend"] = p.components->trend;
    }
    return d;
}

DatePath path_from(const py::dict& d) {
    DatePath p = DatePath::point(d["estimate"].cast<std::vector<double>>());
    if (d.contains("lower")) p.lower = d["lower"].cast<std::vector<double>>();
    if (d.contains("upper")) p.upper = d["upper"].cast<std::vector<double>>();
    if (d.contains("level")) p.level = d["level"].cast<double>();
    return p;
}

SeriesPanel panel_from(const std::vector<std::vector<double>>& paths, const std::vector<bool>& treated, int t_c) {
    if (paths.size() != treated.size()) fail(ErrorKind::LengthMismatch, "paths and treated flags differ in length");
    std::vector<UnitSeries> units;
    for (std::size_t i = 0; i < paths.size(); ++i) units.push_back({paths[i], static_cast<bool>(treated[i])});
    return SeriesPanel(std::move(units), t_c);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Dynamic average treatment effect estimation";

    static py::exception<Error> exc(m, "DatekitError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object kind = py::str(std::string(to_string(e.kind())));
            py::object err = py::handle(exc.ptr())(e.what());
            err.attr("kind") = kind;
            PyErr_SetObject(exc.ptr(), err.ptr());
        }
    });

    m.def("standard_config", [](const std::string& kind, int horizon) {
        const nlohmann::json j = ScenarioConfig::standard(parse_scenario_kind(kind), horizon);
        return py::module_::import("json").attr("loads")(j.dump());
    }, py::arg("kind"), py::arg("horizon") = 72);

    m.def("true_date", [](const py::dict& cfg) { return true_date_oracle(config_from(cfg)).estimate; },
          py::arg("config"));

    m.def("simulate", [](const py::dict& cfg, int rep) {
        const ScenarioConfig c = config_from(cfg);
        c.validate();
        const SimulatedReplication r = simulate_scenario(c, rep);
        std::vector<std::vector<double>> paths;
        std::vector<bool> treated;
        for (const auto& u : r.panel.units()) {
            paths.push_back(u.path);
            treated.push_back(u.treated);
        }
        py::dict d;
        d["paths"] = paths;
        d["treated"] = treated;
        d["t_c"] = r.panel.t_c();
        d["truth"] = r.truth.estimate;
        return d;
    }, py::arg("config"), py::arg("rep") = 1);

    m.def("estimate", [](const std::vector<std::vector<double>>& paths, const std::vector<bool>& treated, int t_c,
                         const std::string& method, int draws, std::uint64_t seed, double level) {
        EstimateOptions o;
        o.level = level;
        o.dlm.draws = draws;
        o.dlm.seed = seed;
        const MethodOutput out = estimate(panel_from(paths, treated, t_c), parse_method(method), o);
        py::dict d = path_dict(out.date);
        if (out.dlm) d["discounts"] = out.dlm->discounts;
        if (out.baseline) d["coefficients"] = out.baseline->coefficients;
        return d;
    }, py::arg("paths"), py::arg("treated"), py::arg("t_c"), py::arg("method") = "dlm", py::arg("draws") = 5000,
       py::arg("seed") = 1, py::arg("level") = 0.95);

    m.def("mse", [](const py::dict& est, const std::vector<double>& truth) {
        return mse(path_from(est), DatePath::point(truth));
    }, py::arg("estimate"), py::arg("truth"));

    m.def("coverage", [](const py::dict& est, const std::vector<double>& truth, double level) {
        return coverage(path_from(est), DatePath::point(truth), level);
    }, py::arg("estimate"), py::arg("truth"), py::arg("level") = 0.95);
}
