#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "phonondd/errors.hpp"
#include "phonondd/experiments.hpp"

namespace py = pybind11;
using namespace phonondd;

namespace {

py::dict record_dict(const ResultRecord& r) {
  py::dict d;
  d["scenario"] = r.scenario;
  d["modes"] = r.mode_count;
  d["spacing"] = r.spacing;
  d["repetitions"] = r.repetitions;
  d["shaped"] = r.shaped;
  d["pulse_duration"] = r.pulse_duration;
  d["strength"] = r.strength;
  d["n_max"] = r.n_max;
  d["converged"] = r.converged;
  d["error_E"] = r.error_E;
  d["error_EB"] = r.error_EB ? py::object(py::float_(*r.error_EB)) : py::object(py::none());
  d["norm_drift"] = r.norm_drift;
  d["boundary_leakage"] = r.boundary_leakage;
  d["leakage_flagged"] = r.leakage_flagged;
  d["sim_time"] = r.sim_time;
  return d;
}

py::dict run_dict(const ScenarioRun& run) {
  py::dict d = record_dict(run.record);
  d["times"] = run.simulation.times;
  std::vector<std::string> labels;
  for (std::int64_t i = 0; i < run.space.dimension(); ++i) labels.push_back(run.space.label(i));
  d["labels"] = labels;
  Eigen::MatrixXd pops(static_cast<Eigen::Index>(run.simulation.populations.size()), run.space.dimension());
  for (std::size_t r = 0; r < run.simulation.populations.size(); ++r)
    pops.row(static_cast<Eigen::Index>(r)) = run.simulation.populations[r].transpose();
  d["populations"] = pops;
  d["final_state"] = run.simulation.final_state.amplitudes;
  return d;
}

}  // namespace

PYBIND11_MODULE(_phonondd, m) {
  m.doc() = "Phonon hopping dynamical decoupling simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InfeasiblePulseError>(m, "InfeasiblePulseError", PyExc_ValueError);
  py::register_exception<PulseInvalidError>(m, "PulseInvalidError", PyExc_ValueError);
  py::register_exception<StabilityError>(m, "StabilityError", PyExc_ValueError);
  py::register_exception<PropagationError>(m, "PropagationError", PyExc_RuntimeError);

  m.def("coupling_rate", &coupling_rate, py::arg("spacing"), py::arg("ion_mass"),
        py::arg("secular_frequency"), "Hopping rate kappa in rad/s.");
  m.attr("ATOMIC_MASS_UNIT") = PhysicalConstants::atomic_mass_unit;

  m.def("solve_strength", &solve_strength, py::arg("pulse_duration"), py::arg("ramp_time"),
        py::arg("erf_width"), py::arg("secular_frequency"), py::arg("target_phase"));
  m.def(
      "design_pulse",
      [](double tp, double tud, double sigma, double w0, double phase, double spacing) {
        const auto p = design_pulse(tp, tud, sigma, w0, phase, spacing);
        std::vector<double> t, b, omega;
        for (const auto& s : p.samples) {
          t.push_back(s.t);
          b.push_back(s.b);
          omega.push_back(s.omega);
        }
        py::dict d;
        d["strength"] = p.params.strength;
        d["achieved_phase"] = p.achieved_phase;
        d["boundary_mismatch"] = p.boundary_mismatch;
        d["t"] = t;
        d["b"] = b;
        d["omega"] = omega;
        return d;
      },
      py::arg("pulse_duration"), py::arg("ramp_time"), py::arg("erf_width") = 6.0,
      py::arg("secular_frequency") = kTwoPi * 2.2e6, py::arg("target_phase") = std::numbers::pi,
      py::arg("sample_spacing") = 1e-9);

  m.def(
      "synthesize_schedule",
      [](int modes, double total_time, int repetitions, std::vector<int> protected_set, double pulse_duration) {
        DDSpec spec{modes, total_time, repetitions};
        spec.protected_set = std::move(protected_set);
        spec.pulse_duration = pulse_duration;
        return serialize_schedule(synthesize(spec));
      },
      py::arg("modes"), py::arg("total_time"), py::arg("repetitions") = 1,
      py::arg("protected_set") = std::vector<int>{}, py::arg("pulse_duration") = 0.0,
      "Schedule in the text serialization format.");

  m.def("catalog", [] {
    std::vector<std::string> names;
    for (const auto& c : scenario_catalog()) names.push_back(c.name);
    return names;
  });
  m.def("scenario_config", [](const std::string& name) { return serialize_config(catalog_scenario(name)); });
  m.def(
      "run",
      [](const std::string& scenario_or_config, int n_max) {
        ScenarioConfig cfg = scenario_or_config.find('=') != std::string::npos
                                 ? parse_config(scenario_or_config)
                                 : catalog_scenario(scenario_or_config);
        if (n_max > 0) cfg.n_max = n_max;
        ScenarioRun run;
        {
          py::gil_scoped_release release;
          run = run_scenario(cfg);
        }
        return run_dict(run);
      },
      py::arg("scenario"), py::arg("n_max") = 0,
      "Run a catalog scenario by name or a config text (key = value lines).");
}
