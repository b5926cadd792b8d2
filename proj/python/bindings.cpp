#include "hesm/cli.hpp"
#include "hesm/config.hpp"
#include "hesm/fuzzy.hpp"
#include "hesm/sim.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace hesm;

namespace {

config::Config load(const std::string& text) { return text.empty() ? config::Config{} : config::parse_text(text); }

py::dict trace_dict(const sim::Trace& tr) {
    py::dict d;
    d["t"] = tr.t;
    d["v_bus"] = tr.v_bus;
    d["i_L"] = tr.i_L;
    d["i_batt"] = tr.i_batt;
    d["i_uc"] = tr.i_uc;
    d["zeta"] = tr.zeta;
    d["soc"] = tr.soc;
    d["v_uc"] = tr.v_uc;
    d["i_limit"] = tr.i_limit;
    d["ctrl_state"] = tr.ctrl_state;
    d["flags"] = tr.flags;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.attr("__version__") = cli::version;

    py::register_exception<config::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<plant::SimulationFault>(m, "SimulationFault", PyExc_RuntimeError);
    py::register_exception<fuzzy::FuzzyError>(m, "FuzzyError", PyExc_ValueError);

    m.def("canonical_config", [](const std::string& text) { return config::canonical_text(load(text)); },
          py::arg("text") = "");
    m.def("config_digest", [](const std::string& text) { return config::digest_hex(load(text)); },
          py::arg("text") = "");

    m.def(
        "infer",
        [](double v_bus, double i_hesm, const std::string& text) {
            return fuzzy::infer(load(text).sim.controller.flc, v_bus, i_hesm).value;
        },
        py::arg("v_bus"), py::arg("i_hesm"), py::arg("text") = "");

    m.def(
        "run",
        [](const std::string& text) {
            const auto cfg = load(text);
            sim::RunResult r;
            {
                py::gil_scoped_release nogil;
                r = sim::run(cfg.sim);
            }
            py::dict out;
            out["status"] = r.ok() ? "ok" : "fault";
            out["fault"] = r.meta.fault ? py::object(py::str(r.meta.fault->message)) : py::object(py::none());
            out["steps"] = r.meta.steps;
            out["trace"] = trace_dict(r.trace);
            if (r.ok()) out["metrics"] = py::module_::import("json").attr("loads")(cli::metrics_json(sim::compute_metrics(r.trace, cfg.sim.load)).dump());
            else out["metrics"] = py::none();
            return out;
        },
        py::arg("text") = "");

    m.def(
        "main",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "hesm_sim");
            std::vector<char*> argv;
            for (auto& a : args) argv.push_back(a.data());
            std::ostringstream out, err;
            int rc;
            {
                py::gil_scoped_release nogil;
                rc = cli::main(int(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(rc, out.str(), err.str());
        },
        py::arg("args"));
}
