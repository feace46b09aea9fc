// Command-line front end: scenario runs, sweeps, reports and pulse design.
//
// Exit codes: 0 success / all checks pass, 1 a reference tolerance failed,
// 2 configuration, pulse or propagation error.

#include "phonondd/errors.hpp"
#include "phonondd/experiments.hpp"
#include "phonondd/pulse.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace phonondd;

namespace {

constexpr int kExitTolerance = 1;
constexpr int kExitError = 2;

fs::path output_dir(const std::string& flag) {
  fs::path dir = "phonondd_out";
  if (const char* env = std::getenv("PHONONDD_OUT"); env && *env) dir = env;
  if (!flag.empty()) dir = flag;
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

// A catalog name or a path to a key = value config file.
ScenarioConfig resolve_scenario(const std::string& ref) {
  for (const auto& c : scenario_catalog()) {
    if (c.name == ref) return c;
  }
  if (fs::exists(ref)) return parse_config(read_file(ref));
  throw ConfigError("'" + ref + "' is neither a catalog scenario nor a config file");
}

// Replaces rows of the same scenario and rewrites the table sorted by name.
void upsert_results(const fs::path& path, const std::vector<ResultRecord>& fresh) {
  std::vector<ResultRecord> records;
  if (fs::exists(path)) records = parse_results_csv(read_file(path));
  for (const auto& r : fresh) {
    std::erase_if(records, [&](const auto& old) { return old.scenario == r.scenario; });
    records.push_back(r);
  }
  write_file(path, results_csv(records));
}

std::vector<ReferenceValue> references_or_empty() {
  try {
    return load_reference_values();
  } catch (const ConfigError& e) {
    std::cerr << "warning: " << e.what() << "; no reference comparison\n";
    return {};
  }
}

int run_command(const std::string& ref, const std::string& out_flag, bool full_state,
                int n_max) {
  ScenarioConfig config = resolve_scenario(ref);
  if (full_state) config.full_state = true;
  if (n_max > 0) config.n_max = n_max;
  const ScenarioRun run = run_scenario(config);
  const fs::path dir = output_dir(out_flag);
  write_file(dir / (config.name + "_populations.csv"), populations_csv(run));
  upsert_results(dir / "results.csv", {run.record});

  const Report report = emit_report({run.record}, references_or_empty());
  std::cout << config.name << ": " << config.description << '\n';
  for (const auto& step : run.convergence) {
    std::cout << "  n_max " << step.n_max << "  metric " << format_double(step.metric)
              << "  boundary " << format_double(step.boundary_leakage) << '\n';
  }
  std::cout << "  n_max used " << run.record.n_max << (run.record.converged ? "" : " (not converged)")
            << ", norm drift " << format_double(run.record.norm_drift) << '\n';
  if (run.record.leakage_flagged) {
    std::cout << "  warning: boundary leakage " << format_double(run.record.boundary_leakage)
              << " exceeds threshold\n";
  }
  std::cout << report.text();
  std::cout << "wrote " << (dir / (config.name + "_populations.csv")).string() << '\n';
  return report.all_pass() ? 0 : kExitTolerance;
}

std::vector<double> parse_values(const std::vector<std::string>& raw) {
  std::vector<double> values;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (part.empty()) continue;
      try {
        std::size_t used = 0;
        values.push_back(std::stod(part, &used));
        if (used != part.size()) throw std::invalid_argument(part);
      } catch (const std::exception&) {
        throw ConfigError("bad sweep value '" + part + "'");
      }
    }
  }
  return values;
}

int sweep_command(const std::string& ref, const std::string& axis_name,
                  const std::vector<std::string>& raw_values, const std::string& out_flag) {
  const ScenarioConfig base = resolve_scenario(ref);
  const SweepAxis axis = parse_sweep_axis(axis_name);
  const auto rows = sweep(base, axis, parse_values(raw_values));
  const fs::path dir = output_dir(out_flag);
  const fs::path path = dir / ("sweep_" + base.name + "_" + sweep_axis_name(axis) + ".csv");
  write_file(path, sweep_csv(axis, rows));

  bool failed = false;
  for (const auto& row : rows) {
    std::cout << sweep_axis_name(axis) << " = " << format_double(row.value) << ": ";
    if (row.record) {
      std::cout << "E = " << format_double(row.record->error_E);
      if (row.record->error_EB) std::cout << ", E_B = " << format_double(*row.record->error_EB);
      std::cout << ", n_max " << row.record->n_max << '\n';
    } else {
      std::cout << "error: " << row.error << '\n';
      failed = true;
    }
  }
  std::cout << "wrote " << path.string() << '\n';
  return failed ? kExitError : 0;
}

int catalog_command(const std::string& show) {
  if (!show.empty()) {
    std::cout << serialize_config(catalog_scenario(show));
    return 0;
  }
  for (const auto& c : scenario_catalog()) {
    std::cout << std::left;
    std::cout.width(12);
    std::cout << c.name << c.description << '\n';
  }
  return 0;
}

int report_command(const std::string& out_flag, bool run_catalog) {
  const fs::path dir = output_dir(out_flag);
  const fs::path results = dir / "results.csv";
  if (run_catalog) {
    std::vector<ResultRecord> fresh;
    for (const auto& c : scenario_catalog()) {
      std::cerr << "running " << c.name << "...\n";
      const ScenarioRun run = run_scenario(c);
      write_file(dir / (c.name + "_populations.csv"), populations_csv(run));
      fresh.push_back(run.record);
    }
    upsert_results(results, fresh);
  }
  if (!fs::exists(results)) {
    throw ConfigError("no results table at " + results.string() + "; run a scenario first");
  }
  const Report report = emit_report(parse_results_csv(read_file(results)), load_reference_values());
  write_file(dir / "report.csv", report.csv());
  std::cout << report.text();
  return report.all_pass() ? 0 : kExitTolerance;
}

struct PulseFlags {
  double tp_us = 4.0;
  double tud_us = 2.0;
  double sigma = 6.0;
  double omega0_mhz = 2.2;
  double target_phase = 3.141592653589793;
  double spacing_ns = 1.0;
  std::string export_path;
  double rf_mhz = 0.0;
  double r0_um = 0.0;
  double axial_mhz = 0.0;
  double u0 = 0.0;
  double v0 = 0.0;
  double mass_u = 40.0;
};

int pulse_command(const PulseFlags& f, const std::string& out_flag) {
  const double w0 = kTwoPi * f.omega0_mhz * 1e6;
  const auto solution =
      solve_strength_detailed(f.tp_us * 1e-6, f.tud_us * 1e-6, f.sigma, w0, f.target_phase);
  const ShapedPulse pulse = make_shaped_pulse(
      BFunctionParams{f.tp_us * 1e-6, f.tud_us * 1e-6, f.sigma, solution.strength}, w0,
      f.spacing_ns * 1e-9);
  double peak = w0;
  for (const auto& s : pulse.samples) peak = std::max(peak, s.omega);

  std::cout << "k = " << format_double(solution.strength) << '\n'
            << "phase = " << format_double(pulse.achieved_phase) << " rad\n"
            << "largest valid k = " << format_double(solution.max_valid_strength) << '\n'
            << "peak frequency excursion = " << format_double((peak - w0) / kTwoPi / 1e3)
            << " kHz\n"
            << "boundary mismatch |b-1| = " << format_double(pulse.boundary_mismatch) << '\n';

  std::optional<TrapParams> trap;
  if (f.rf_mhz > 0.0) {
    trap = TrapParams{kTwoPi * f.rf_mhz * 1e6, f.r0_um * 1e-6, kTwoPi * f.axial_mhz * 1e6,
                      f.u0, f.v0, PhysicalConstants::elementary_charge,
                      f.mass_u * PhysicalConstants::atomic_mass_unit};
    const StabilityParams s = stability_params(*trap);
    std::cout << "trap a_x = " << format_double(s.a_x) << ", q_x = " << format_double(s.q_x)
              << ", radial x = " << format_double(s.radial_x / kTwoPi / 1e6) << " MHz\n";
    for (const auto& w : dc_waveform(pulse, *trap).warnings) std::cout << "warning: " << w << '\n';
    for (const auto& w : rf_waveform(pulse, *trap).warnings) std::cout << "warning: " << w << '\n';
  }
  if (!f.export_path.empty()) {
    fs::path path = f.export_path;
    if (path.is_relative()) path = output_dir(out_flag) / path;
    write_file(path, waveform_csv(pulse, trap ? &*trap : nullptr));
    std::cout << "wrote " << path.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phonondd: phonon dynamical decoupling simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out_flag;
  app.add_option("--out", out_flag, "Output directory (default $PHONONDD_OUT or ./phonondd_out)");

  auto* run = app.add_subcommand("run", "Run a catalog scenario or a config file");
  std::string run_ref;
  bool full_state = false;
  int n_max = 0;
  run->add_option("scenario", run_ref, "Catalog name or config file")->required();
  run->add_flag("--full-state", full_state, "Write every basis state to the populations CSV");
  run->add_option("--n-max", n_max, "Fixed Fock cutoff (default: convergence protocol)");

  auto* sw = app.add_subcommand("sweep", "Sweep one parameter of a scenario");
  std::string sweep_ref = "fig4a";
  std::string axis;
  std::vector<std::string> values;
  sw->add_option("scenario", sweep_ref, "Base scenario (catalog name or config file)");
  sw->add_option("--axis", axis, "n_r, d (um), T_P (us) or n_max")->required();
  sw->add_option("--values", values, "Comma- or space-separated values")->required();

  auto* cat = app.add_subcommand("catalog", "List built-in scenarios");
  std::string show;
  cat->add_option("--show", show, "Print the full config of one scenario");

  auto* rep = app.add_subcommand("report", "Compare the results table with reference values");
  bool run_catalog = false;
  rep->add_flag("--run-catalog", run_catalog, "Run every catalog scenario first");

  auto* pulse = app.add_subcommand("pulse", "Phase-shift pulse tools");
  pulse->require_subcommand(1);
  auto* design = pulse->add_subcommand("design", "Solve the pulse strength and export waveforms");
  PulseFlags pf;
  design->add_option("--tp-us", pf.tp_us, "Pulse duration T_P in us")->capture_default_str();
  design->add_option("--tud-us", pf.tud_us, "Ramp time T_ud in us")->capture_default_str();
  design->add_option("--sigma", pf.sigma, "erf width")->capture_default_str();
  design->add_option("--omega0-mhz", pf.omega0_mhz, "Secular frequency / 2pi in MHz")
      ->capture_default_str();
  design->add_option("--target-phase", pf.target_phase, "Target phase in rad")
      ->capture_default_str();
  design->add_option("--sample-ns", pf.spacing_ns, "Waveform sample spacing in ns")
      ->capture_default_str();
  design->add_option("--export", pf.export_path, "Write the waveform CSV here");
  design->add_option("--trap-rf-mhz", pf.rf_mhz, "RF drive frequency / 2pi in MHz (enables U0/V0 columns)");
  design->add_option("--trap-r0-um", pf.r0_um, "Electrode distance r0 in um");
  design->add_option("--trap-axial-mhz", pf.axial_mhz, "Axial frequency / 2pi in MHz");
  design->add_option("--trap-u0", pf.u0, "DC amplitude U0 in V");
  design->add_option("--trap-v0", pf.v0, "RF amplitude V0 in V");
  design->add_option("--mass-u", pf.mass_u, "Ion mass in u")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }

  try {
    if (*run) return run_command(run_ref, out_flag, full_state, n_max);
    if (*sw) return sweep_command(sweep_ref, axis, values, out_flag);
    if (*cat) return catalog_command(show);
    if (*rep) return report_command(out_flag, run_catalog);
    if (*design) return pulse_command(pf, out_flag);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
