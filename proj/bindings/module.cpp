#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kfp/pipeline.hpp"

namespace py = pybind11;
using namespace kfp;

namespace {

OperatorSet ops_for(double gamma, double h_v) {
    PotentialParams p;
    p.gamma = gamma;
    return build_operator_set(grid_for(gamma, h_v, 1), p);
}

std::vector<Sample> samples(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size()) throw ConfigError("t and y differ in length");
    std::vector<Sample> s;
    for (size_t i = 0; i < t.size(); ++i) s.push_back({t[i], y[i]});
    return s;
}

py::dict fit_dict(const DecayFit& f) {
    py::dict d;
    d["law"] = to_string(f.law);
    d["coefficient"] = f.coefficient;
    d["exponent"] = f.exponent;
    d["residual"] = f.residual;
    d["band95"] = f.band95;
    return d;
}

using Command = int (*)(const RunConfig&, const RunOptions&);

int run(Command cmd, const std::string& config_json, const std::string& out, int threads, bool force) {
    RunOptions o;
    o.out_dir = out;
    o.threads = threads;
    o.force = force;
    const RunConfig c = RunConfig::from_json_text(config_json);
    py::gil_scoped_release nogil;
    return cmd(c, o);
}

} // namespace

PYBIND11_MODULE(_kfplab, m) {
    m.doc() = "Kinetic Fokker-Planck solver core";
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<InvariantFailure>(m, "InvariantFailure", PyExc_RuntimeError);

    m.def("config_hash", [](const std::string& text) { return RunConfig::from_json_text(text).hash(); });
    m.def("canonical_config", [](const std::string& text) { return RunConfig::from_json_text(text).to_json(); });

    m.def("velocity_operator", [](double gamma, double h_v) {
        const OperatorSet ops = ops_for(gamma, h_v);
        py::dict d;
        d["v"] = Vec(ops.grid.nodes.col(0));
        d["L"] = Mat(ops.L);
        d["sqrtM"] = ops.sqrtM;
        d["K"] = ops.K;
        d["phi0"] = ops.params.phi0;
        d["cell"] = ops.cell();
        return d;
    }, py::arg("gamma"), py::arg("h_v") = 0.2);

    m.def("coercivity_constant", [](double gamma, double h_v) { return coercivity_constant(ops_for(gamma, h_v)); },
          py::arg("gamma"), py::arg("h_v") = 0.2);

    m.def("diffusion_coefficient", [](double gamma, double h_v) {
        Vec e = Vec::Zero(1);
        e(0) = 1.0;
        const DiffusionData dd = diffusion_coefficient(ops_for(gamma, h_v), e);
        py::dict d;
        d["a_gamma"] = dd.a_gamma;
        d["a_fit"] = dd.a_fit;
        d["agreement"] = dd.agreement;
        return d;
    }, py::arg("gamma"), py::arg("h_v") = 0.2);

    m.def("leading_eigenvalue", [](double gamma, double eta, double h_v) {
        Vec e(1);
        e(0) = eta;
        return leading_eigenpair(ops_for(gamma, h_v), e).lambda;
    }, py::arg("gamma"), py::arg("eta"), py::arg("h_v") = 0.2);

    m.def("fit_power", [](const std::vector<double>& t, const std::vector<double>& y) {
        return fit_dict(fit_power(samples(t, y)));
    });
    m.def("fit_exp", [](const std::vector<double>& t, const std::vector<double>& y) {
        return fit_dict(fit_exp(samples(t, y)));
    });
    m.def("fit_stretched_exp", [](const std::vector<double>& t, const std::vector<double>& y, double q) {
        return fit_dict(fit_stretched_exp(samples(t, y), q));
    });

    const std::pair<const char*, Command> cmds[] = {
        {"check_operator", cmd_check_operator}, {"spectrum", cmd_spectrum},   {"evolve", cmd_evolve},
        {"decompose", cmd_decompose},           {"probe_regularization", cmd_probe_regularization},
        {"rates", cmd_rates},                   {"report", cmd_report},       {"run_all", cmd_all}};
    for (const auto& [name, cmd] : cmds) {
        const Command c = cmd;
        m.def(name, [c](const std::string& config_json, const std::string& out, int threads, bool force) {
            return run(c, config_json, out, threads, force);
        }, py::arg("config_json"), py::arg("out"), py::arg("threads") = 1, py::arg("force") = false);
    }
    m.attr("__version__") = "0.3.0";
}
