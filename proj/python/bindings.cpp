#include <optional>
#include <random>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tpmwork/errors.hpp"
#include "tpmwork/model.hpp"
#include "tpmwork/propagator.hpp"
#include "tpmwork/theory.hpp"
#include "tpmwork/version.hpp"
#include "tpmwork/workstats.hpp"

namespace py = pybind11;
using namespace tpmwork;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

double center_or(const HamiltonianSet& hs, std::optional<double> e0) { return e0 ? *e0 : hs.spectrum_center(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Driven spin-bath model: exact propagation, two-point-measurement work statistics and "
              "Jarzynski deviations";
    m.attr("__version__") = kVersion;

    static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
    static py::exception<NumericalError> numerical_error(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const NumericalError& e) {
            py::set_error(numerical_error, e.what());
        }
    });

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init<>())
        .def_readwrite("N", &ModelParams::N)
        .def_readwrite("B_z", &ModelParams::B_z)
        .def_readwrite("beta", &ModelParams::beta)
        .def_readwrite("E_bath_min", &ModelParams::E_bath_min)
        .def_readwrite("E_bath_max", &ModelParams::E_bath_max)
        .def_readwrite("sigma_int_sq", &ModelParams::sigma_int_sq)
        .def_readwrite("xi", &ModelParams::xi)
        .def_readwrite("alpha", &ModelParams::alpha)
        .def_readwrite("lambda_", &ModelParams::lambda)
        .def_readwrite("omega_prot", &ModelParams::omega_prot)
        .def_readwrite("n_periods", &ModelParams::n_periods)
        .def_readwrite("seed", &ModelParams::seed)
        .def_property_readonly("duration", &ModelParams::duration)
        .def("violations", &ModelParams::violations)
        .def("validate", &ModelParams::validate)
        .def("__repr__", [](const ModelParams& p) {
            return "ModelParams(N=" + std::to_string(p.N) + ", xi=" + std::to_string(p.xi) +
                   ", alpha=" + std::to_string(p.alpha) + ", lambda_=" + std::to_string(p.lambda) +
                   ", seed=" + std::to_string(p.seed) + ")";
        });

    py::class_<PropagatorConfig>(m, "PropagatorConfig")
        .def(py::init<>())
        .def_property(
            "scheme", [](const PropagatorConfig& c) { return c.scheme == Scheme::strang2 ? "strang2" : "suzuki4"; },
            [](PropagatorConfig& c, const std::string& s) {
                if (s == "strang2") {
                    c.scheme = Scheme::strang2;
                } else if (s == "suzuki4") {
                    c.scheme = Scheme::suzuki4;
                } else {
                    throw ConfigError("scheme must be strang2 or suzuki4");
                }
            })
        .def_readwrite("steps_per_period", &PropagatorConfig::steps_per_period)
        .def_readwrite("richardson_check", &PropagatorConfig::richardson_check)
        .def_readwrite("tolerance", &PropagatorConfig::tolerance);

    py::class_<HamiltonianSet>(m, "Hamiltonian")
        .def_property_readonly("params", &HamiltonianSet::params)
        .def_property_readonly("dim", &HamiltonianSet::dim)
        .def_property_readonly("h0", &HamiltonianSet::h0)
        .def_property_readonly("eigenvalues", &HamiltonianSet::eigenvalues)
        .def_property_readonly("eigenvectors", &HamiltonianSet::eigenvectors)
        .def_property_readonly("drive_eigenbasis", &HamiltonianSet::drive_eigenbasis)
        .def_property_readonly("bath", [](const HamiltonianSet& hs) { return to_array(hs.bath().energies); })
        .def_property_readonly("reconstruction_residual", &HamiltonianSet::reconstruction_residual)
        .def("spectrum_center", &HamiltonianSet::spectrum_center);

    m.def(
        "bath_energies",
        [](std::size_t n, double beta, double e_min, double e_max) {
            return to_array(bath_energies(n, beta, e_min, e_max).energies);
        },
        py::arg("N"), py::arg("beta") = 1.0, py::arg("e_min") = 0.0, py::arg("e_max") = 4.5);

    m.def(
        "bath_dos_slope",
        [](std::size_t n, double beta, double e_min, double e_max, double width) {
            return bath_dos_slope(bath_energies(n, beta, e_min, e_max), width);
        },
        py::arg("N"), py::arg("beta") = 1.0, py::arg("e_min") = 0.0, py::arg("e_max") = 4.5,
        py::arg("bin_width") = 0.25);

    m.def("build_hamiltonian", &build_hamiltonian, py::arg("params"), py::call_guard<py::gil_scoped_release>());

    m.def(
        "window_members",
        [](const HamiltonianSet& hs, double energy, double delta) {
            return window_members(hs, EnergyBinning{delta}, energy);
        },
        py::arg("hs"), py::arg("energy"), py::arg("delta") = 0.06);

    m.def(
        "transition_probabilities",
        [](const HamiltonianSet& hs, const std::vector<std::size_t>& indices, const PropagatorConfig& config) {
            py::gil_scoped_release release;
            const auto pset = propagate(hs, config, indices);
            return Eigen::MatrixXd(transition_table(pset, hs).probabilities);
        },
        py::arg("hs"), py::arg("indices"), py::arg("config") = PropagatorConfig{},
        "p[f, j] = |<f|U|indices[j]>|^2");

    m.def(
        "d_microcanonical",
        [](const HamiltonianSet& hs, std::optional<double> e0, double delta, const PropagatorConfig& config) {
            const double e = center_or(hs, e0);
            MicrocanonicalDeviation mc;
            {
                py::gil_scoped_release release;
                mc = d_microcanonical(hs, e, EnergyBinning{delta}, make_propagate_fn(hs, config));
            }
            py::dict d;
            d["E0"] = e;
            d["exact"] = mc.exact.value;
            d["binned"] = mc.binned.value;
            d["members"] = mc.members;
            d["dt_discrepancy"] = mc.exact.dt_discrepancy;
            return d;
        },
        py::arg("hs"), py::arg("e0") = py::none(), py::arg("delta") = 0.06, py::arg("config") = PropagatorConfig{},
        "Microcanonical Jarzynski deviation of the window of e0 (default: spectrum center)");

    m.def(
        "d_eigenstate",
        [](const HamiltonianSet& hs, std::size_t index, const PropagatorConfig& config) {
            py::gil_scoped_release release;
            return d_eigenstate(hs, index, make_propagate_fn(hs, config)).value;
        },
        py::arg("hs"), py::arg("index"), py::arg("config") = PropagatorConfig{});

    m.def(
        "work_pdf",
        [](const HamiltonianSet& hs, std::optional<double> e0, double delta, const PropagatorConfig& config) {
            const EnergyBinning bins{delta};
            const double e = center_or(hs, e0);
            const auto members = window_members(hs, bins, e);
            if (members.empty()) throw std::invalid_argument("empty energy window");
            std::optional<CoarseGrained> cg;
            {
                py::gil_scoped_release release;
                cg = coarse_grain(transition_table(propagate(hs, config, members), hs), bins, hs);
            }
            const auto* pdf = cg->pdf_for(bins.index(e));
            std::vector<double> w, p;
            for (std::size_t k = 0; k < pdf->size(); ++k) {
                w.push_back(pdf->work(k));
                p.push_back(pdf->density(k));
            }
            py::dict d;
            d["initial_bin"] = pdf->initial_bin;
            d["W"] = to_array(w);
            d["P"] = to_array(p);
            return d;
        },
        py::arg("hs"), py::arg("e0") = py::none(), py::arg("delta") = 0.06, py::arg("config") = PropagatorConfig{},
        "Coarse-grained work density P_E(W) of the window of e0");

    m.def(
        "stiffness",
        [](const HamiltonianSet& hs, const std::vector<double>& energies, double delta,
           const PropagatorConfig& config) {
            StiffnessProfile prof;
            {
                py::gil_scoped_release release;
                prof = stiffness_profile(hs, EnergyBinning{delta}, energies, make_propagate_fn(hs, config));
            }
            std::vector<double> p0;
            for (const auto& pt : prof.windows) p0.push_back(pt.p0);
            return to_array(p0);
        },
        py::arg("hs"), py::arg("energies"), py::arg("delta") = 0.06, py::arg("config") = PropagatorConfig{},
        "P_E(0) for the window of each energy");

    m.def(
        "jr0_check",
        [](double beta, double delta, double z_ini, double z_fin, std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            const auto ens = theory::make_consistent_ensemble(beta, delta, z_ini, z_fin, 301, 20, rng);
            const auto r = theory::jr0_check(ens);
            py::dict d;
            d["lhs"] = r.lhs;
            d["rhs"] = r.rhs;
            d["rhs_via_dos"] = r.rhs_via_dos;
            d["consistent"] = r.consistent;
            return d;
        },
        py::arg("beta") = 1.0, py::arg("delta") = 0.06, py::arg("z_ini") = 1.0, py::arg("z_fin") = 1.1,
        py::arg("seed") = 1, "Both sides of the stiff-kernel Jarzynski relation on a synthetic ensemble");
}
