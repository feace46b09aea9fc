// Acceptance harness: one PASS/FAIL line per criterion, detail lines indented.
// Exit status 0 when every selected criterion passes, 1 otherwise, 2 on error.

#include "CLI11.hpp"

#include "phonondd/errors.hpp"
#include "phonondd/experiments.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <string>

using namespace phonondd;

namespace {

constexpr double kW0 = kTwoPi * 2.2e6;
constexpr double kT0 = 1.0 / 2.2e6;
constexpr double kMass = 40.0 * PhysicalConstants::atomic_mass_unit;

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    all_ &= ok;
    std::printf("  [%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
  }
  void note(const std::string& what) { std::printf("  [info] %s\n", what.c_str()); }
  bool passed() const { return all_; }

 private:
  bool all_ = true;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

bool relative_ok(double computed, double reference, double tol) {
  return std::abs(computed / reference - 1.0) <= tol;
}

const ReferenceValue& reference_for(const std::vector<ReferenceValue>& refs, const std::string& scenario,
                                    const std::string& metric) {
  for (const auto& r : refs)
    if (r.scenario == scenario && r.metric == metric) return r;
  throw ConfigError("no reference value for " + scenario + "/" + metric);
}

std::string tolerance_text(const ReferenceValue& r) {
  switch (r.kind) {
    case ToleranceKind::factor: return "within x" + fmt(r.tolerance);
    case ToleranceKind::relative: return "within " + fmt(100 * r.tolerance) + "%";
    case ToleranceKind::below: return "below " + fmt(r.tolerance);
  }
  return {};
}

// Runs a catalog scenario and compares its metric against the reference table.
ScenarioRun check_scenario(Check& c, const std::vector<ReferenceValue>& refs, const std::string& name,
                           const std::string& metric) {
  const auto start = std::chrono::steady_clock::now();
  auto run = run_scenario(catalog_scenario(name));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& ref = reference_for(refs, name, metric);
  const double value = metric == "EB" ? run.record.error_EB.value() : run.record.error_E;
  c.expect(within_tolerance(value, ref), name + ": " + metric + " = " + fmt(value) + " (reference_value " +
                                              fmt(ref.value) + ", " + tolerance_text(ref) + "; n_max " +
                                              std::to_string(run.record.n_max) +
                                              (run.record.converged ? ", converged" : ", not converged") +
                                              ", " + fmt(secs) + " s)");
  return run;
}

bool coupling_rates(Check& c) {
  const double k1 = coupling_rate(27.6e-6, kMass, kW0) / kTwoPi;
  const double k2 = coupling_rate(43.8e-6, kMass, kW0) / kTwoPi;
  c.expect(relative_ok(k1, 1.9e3, 0.01), "kappa/2pi at 27.6 um = " + fmt(k1) + " Hz (reference_value 1900 Hz, 1%)");
  c.expect(relative_ok(k2, 0.47e3, 0.01), "kappa/2pi at 43.8 um = " + fmt(k2) + " Hz (reference_value 470 Hz, 1%)");
  c.note("ratio kappa(27.6)/kappa(43.8) = " + fmt(k1 / k2));
  return c.passed();
}

bool pulse_design(Check& c) {
  const double pi = std::numbers::pi;
  const double k_long = solve_strength(8.8 * kT0, 4.4 * kT0, 6.0, kW0, pi);
  c.expect(relative_ok(k_long, 0.0529, 0.02),
           "k(T_P = 8.8 T0, T_ud = 4.4 T0) = " + fmt(k_long) + " (reference_value 0.0529, 2%)");
  try {
    const double k_short = solve_strength(2.2 * kT0, 2.0 * kT0, 6.0, kW0, pi);
    c.expect(relative_ok(k_short, 0.1636, 0.05),
             "k(T_P = 2.2 T0, T_ud = 2.0 T0) = " + fmt(k_short) + " (reference_value 0.1636, 5%)");
  } catch (const std::exception& e) {
    c.expect(false, std::string("k(T_P = 2.2 T0, T_ud = 2.0 T0) failed: ") + e.what());
  }
  const double k_alt = solve_strength(2.2 * kT0, 1.0 * kT0, 6.0, kW0, pi);
  c.note("k(T_P = 2.2 T0, T_ud = 1.0 T0) = " + fmt(k_alt) + " (parameters used by the fig1b scenario)");

  const auto pulse = design_pulse(8.8 * kT0, 4.4 * kT0, 6.0, kW0, pi);
  double peak = 0.0;
  for (const auto& s : pulse.samples) peak = std::max(peak, s.omega - kW0);
  const double mid = pulse.samples[pulse.samples.size() / 2].omega - kW0;
  c.expect(std::abs(mid / kTwoPi - 250e3) <= 5e3,
           "plateau excursion (omega - w0)/2pi = " + fmt(mid / kTwoPi) + " Hz (250 +- 5 kHz)");
  c.note("peak excursion " + fmt(peak / kTwoPi) + " Hz, phase " + fmt(pulse.achieved_phase));
  return c.passed();
}

bool two_mode_ideal_dd(Check& c, const std::vector<ReferenceValue>& refs) {
  check_scenario(c, refs, "dd2_ideal", "E");
  return c.passed();
}

bool three_mode_ideal_dd(Check& c, const std::vector<ReferenceValue>& refs) {
  for (const char* n : {"fig3", "fig4a", "fig5a"}) check_scenario(c, refs, n, "E");
  return c.passed();
}

bool two_mode_c3po(Check& c, const std::vector<ReferenceValue>& refs) {
  for (const char* n : {"fig1a", "fig1b", "fig2"}) check_scenario(c, refs, n, "E");
  return c.passed();
}

bool three_mode_c3po(Check& c, const std::vector<ReferenceValue>& refs) {
  for (const char* n : {"fig4b", "fig5b"}) check_scenario(c, refs, n, "E");
  return c.passed();
}

bool beam_splitter(Check& c, const std::vector<ReferenceValue>& refs) {
  for (const char* n : {"fig6a", "fig6b", "fig7a", "fig7b"}) {
    const auto run = check_scenario(c, refs, n, "EB");
    const auto& psi = run.simulation.final_state.amplitudes;
    const double p120 = std::norm(psi(run.space.index({0, 2, 1})));
    const double p102 = std::norm(psi(run.space.index({2, 0, 1})));
    c.expect(relative_ok(p120, 0.5, 0.2) && relative_ok(p102, 0.5, 0.2),
             std::string(n) + ": P(|1,2,0>) = " + fmt(p120) + ", P(|1,0,2>) = " + fmt(p102) + " (0.5, 20%)");
  }
  return c.passed();
}

bool scaling_law(Check& c) {
  const std::vector<double> reps{1, 2, 4, 8};
  const auto rows = sweep(catalog_scenario("fig4a"), SweepAxis::repetitions, reps);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& row : rows) {
    if (!row.record) throw PropagationError("scaling sweep failed at n_r = " + fmt(row.value) + ": " + row.error);
    const double x = std::log(row.value), y = std::log(row.record->error_E);
    c.note("n_r = " + fmt(row.value) + ": E = " + fmt(row.record->error_E) + " (n_max " +
           std::to_string(row.record->n_max) + ")");
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(rows.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  c.expect(std::abs(slope + 2.0) <= 0.3, "slope d log E / d log n_r = " + fmt(slope) + " (-2 +- 0.3)");
  return c.passed();
}

// Condensed versions of the unit-level property checks.
bool property_suite(Check& c) {
  using cd = std::complex<double>;
  // Signed-dwell cancellation for all concatenated role orderings, M <= 8.
  {
    int schedules = 0;
    bool ok = true;
    for (int m = 2; m <= 8; ++m) {
      const int levels = concatenation_levels(m);
      const auto couplings = build_coupling_matrix(equidistant_chain(m, 30e-6));
      for (int bits = 0; bits < (1 << levels); ++bits)
        for (int reps : {1, 3}) {
          DDSpec spec{m, 1e-3, reps};
          spec.level_role_swap = std::vector<bool>();
          for (int l = 0; l < levels; ++l) spec.level_role_swap->push_back((bits >> l) & 1);
          for (double tp : {0.0, 4e-6}) {
            spec.pulse_duration = tp;
            ok &= signed_dwell_check(synthesize(spec), couplings).passed;
            ++schedules;
          }
        }
      for (int mask = 1; mask < (1 << m); ++mask) {
        std::vector<int> set;
        for (int q = 0; q < m; ++q)
          if ((mask >> q) & 1) set.push_back(q);
        if (set.size() < 2 || static_cast<int>(set.size()) == m) continue;
        DDSpec spec{m, 1e-3};
        spec.protected_set = set;
        ok &= signed_dwell_check(synthesize(spec), couplings, set).passed;
        ++schedules;
      }
      for (int eta = 1; eta < m - 1; ++eta) {
        DDSpec spec{m, 1e-3};
        spec.truncation_distance = eta;
        const auto truncated = build_coupling_matrix(equidistant_chain(m, 30e-6, kMass, kW0, eta));
        ok &= signed_dwell_check(synthesize(spec), truncated).passed;
        ++schedules;
      }
    }
    c.expect(ok, "signed-dwell cancellation on " + std::to_string(schedules) + " schedules (M <= 8)");
  }
  // Serialization round trip.
  {
    bool ok = true;
    for (int m = 2; m <= 8; ++m) {
      DDSpec spec{m, 525.28e-6, 5};
      spec.pulse_duration = 1e-6;
      const auto s = synthesize(spec);
      ok &= parse_schedule(serialize_schedule(s)) == s;
    }
    c.expect(ok, "schedule serialization round trip");
  }
  // Fock bijection and Hermiticity.
  {
    bool bij = true, herm = true;
    for (int m = 1; m <= 3; ++m) {
      FockSpace space(m, 6);
      for (std::int64_t i = 0; i < space.dimension(); ++i) bij &= space.index(space.occupations(i)) == i;
      const auto couplings = build_coupling_matrix(equidistant_chain(std::max(m, 2), 27.6e-6));
      if (m >= 2) {
        for (auto form : {HoppingForm::rwa, HoppingForm::full}) {
          const SparseOperator h = hopping_hamiltonian(space, couplings, form);
          herm &= SparseOperator(h - SparseOperator(h.transpose())).norm() == 0.0;
        }
      }
      const SparseOperator mod = modulation_hamiltonian(space, 0, 1e12, kW0);
      herm &= SparseOperator(mod - SparseOperator(mod.transpose())).norm() == 0.0;
    }
    c.expect(bij, "Fock index bijection (M <= 3, cutoff 6)");
    c.expect(herm, "Hamiltonians are Hermitian");
  }
  // Unitarity drift and number conservation on a shaped two-mode run.
  {
    FockSpace space(2, 8);
    const auto couplings = build_coupling_matrix(equidistant_chain(2, 27.6e-6));
    DDSpec spec{2, std::numbers::pi / (2 * couplings(1, 0))};
    spec.pulse_duration = 4e-6;
    const auto pulse = design_pulse(4e-6, 4.4 * kT0, 6.0, kW0, std::numbers::pi);
    PropagatorConfig cfg;
    cfg.record_samples = 0;
    const auto psi0 = basis_state(space, {1, 2});
    const auto shaped = run_schedule(space, psi0, synthesize(spec), couplings, cfg, &pulse);
    c.expect(shaped.norm_drift <= 1e-10, "unitarity drift " + fmt(shaped.norm_drift) + " (<= 1e-10)");
    const auto free = evolve_constant(psi0, hopping_hamiltonian(space, couplings), 1e-3);
    const double dn = std::abs(mean_total_number(space, free) - 3.0);
    c.expect(dn < 1e-10, "rwa number conservation |d<N>| = " + fmt(dn));
  }
  // pi-phase gate eigenphases.
  {
    FockSpace space(1, 14);
    const auto pulse = design_pulse(4e-6, 4.4 * kT0, 6.0, kW0, std::numbers::pi);
    const SparseOperator background(space.dimension(), space.dimension());
    double worst = 0.0;
    for (int n = 0; n <= 4; ++n) {
      const auto psi = evolve_shaped(space, basis_state(space, {n}), pulse, {0}, background, 0.0, PropagatorConfig{});
      const cd target = std::exp(cd(0.0, -std::numbers::pi * (n + 0.5)));
      // Phase-sensitive infidelity 1 - Re<target|psi>.
      worst = std::max(worst, 1.0 - std::real(std::conj(target) * psi.amplitudes(n)));
    }
    c.expect(worst <= 1e-3, "pi-phase eigenphase exp(-i pi (n + 1/2)), n <= 4: worst 1 - Re<t|psi> = " + fmt(worst));
  }
  // Ermakov residual.
  {
    const BFunctionParams p{4e-6, 4.4 * kT0, 6.0, solve_strength(4e-6, 4.4 * kT0, 6.0, kW0, std::numbers::pi)};
    double worst = 0.0;
    for (int i = 0; i <= 2000; ++i) {
      const double t = p.pulse_duration * i / 2000.0;
      const auto b = b_value(p, t);
      const double w = omega_of_t(b, kW0, t).omega;
      worst = std::max(worst, std::abs(b.d2b + w * w * b.b - kW0 * kW0 / (b.b * b.b * b.b)) / (kW0 * kW0));
    }
    c.expect(worst <= 1e-9, "Ermakov residual " + fmt(worst) + " (<= 1e-9, relative to w0^2)");
  }
  // Waveform round trips.
  {
    TrapParams trap;
    trap.rf_frequency = kTwoPi * 30e6;
    trap.electrode_distance = 500e-6;
    trap.axial_frequency = kTwoPi * 0.5e6;
    trap.rf_amplitude = 600.0;
    trap.charge = PhysicalConstants::elementary_charge;
    trap.mass = kMass;
    const auto pulse = design_pulse(4e-6, 4.4 * kT0, 6.0, kW0, std::numbers::pi, 10e-9);
    const auto dc = dc_waveform(pulse, trap);
    auto rf_trap = trap;
    rf_trap.dc_amplitude = 0.5;
    const auto rf = rf_waveform(pulse, rf_trap);
    double worst = 0.0;
    for (std::size_t i = 0; i < pulse.samples.size(); ++i) {
      const double w = pulse.samples[i].omega;
      worst = std::max(worst, std::abs(omega_from_dc(dc.values[i], trap) - w) / w);
      worst = std::max(worst, std::abs(omega_from_rf(rf.values[i], rf_trap) - w) / w);
    }
    c.expect(worst <= 1e-10, "waveform round trip " + fmt(worst) + " (<= 1e-10)");
  }
  // Feasibility bounds.
  {
    const auto one = feasibility_bounds(525.28e-6, 4e-6, 1, 3);
    const auto five = feasibility_bounds(525.28e-6, 4e-6, 5, 3);
    c.expect(one.max_reps == 33 && one.max_modes == 128 && five.max_modes == 16 && one.max_eta == 64 &&
                 five.max_eta == 8,
             "feasibility: n_r < " + std::to_string(one.max_reps) + ", M < " + std::to_string(one.max_modes) +
                 " (n_r=1), M < " + std::to_string(five.max_modes) + " (n_r=5), eta < " +
                 std::to_string(one.max_eta) + " / " + std::to_string(five.max_eta));
  }
  return c.passed();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<std::string> selected;
  app.add_option("--criterion", selected, "criterion to evaluate (repeatable; default all)");
  CLI11_PARSE(app, argc, argv);

  std::vector<ReferenceValue> refs;
  const std::vector<std::pair<std::string, std::function<bool(Check&)>>> criteria{
      {"coupling_rates", coupling_rates},
      {"pulse_design", pulse_design},
      {"two_mode_ideal_dd", [&](Check& c) { return two_mode_ideal_dd(c, refs); }},
      {"three_mode_ideal_dd", [&](Check& c) { return three_mode_ideal_dd(c, refs); }},
      {"two_mode_c3po", [&](Check& c) { return two_mode_c3po(c, refs); }},
      {"three_mode_c3po", [&](Check& c) { return three_mode_c3po(c, refs); }},
      {"beam_splitter", [&](Check& c) { return beam_splitter(c, refs); }},
      {"scaling_law", scaling_law},
      {"property_suite", property_suite},
  };

  for (const auto& s : selected) {
    bool known = false;
    for (const auto& [name, fn] : criteria) known |= name == s;
    if (!known) {
      std::cerr << "unknown criterion '" << s << "'\n";
      return 2;
    }
  }

  bool all = true;
  try {
    refs = load_reference_values();
    for (const auto& [name, fn] : criteria) {
      if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
      Check check;
      const bool ok = fn(check);
      std::printf("%s %s\n", ok ? "PASS" : "FAIL", name.c_str());
      std::fflush(stdout);
      all &= ok;
    }
  } catch (const std::exception& e) {
    std::printf("ERROR %s\n", e.what());
    return 2;
  }
  return all ? 0 : 1;
}
