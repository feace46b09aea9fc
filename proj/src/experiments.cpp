#include "phonondd/experiments.hpp"

#include "phonondd/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>

#ifndef PHONONDD_DATA_DIR
#define PHONONDD_DATA_DIR "data"
#endif

namespace phonondd {

namespace {

constexpr double kT0 = kTwoPi / (kTwoPi * 2.2e6);

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

int to_int(std::string_view s, std::string_view what) {
  s = trim(s);
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(std::string(what) + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

bool to_bool(std::string_view s, std::string_view what) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(std::string(what) + ": bad boolean '" + std::string(s) + "'");
}

std::vector<int> to_int_list(std::string_view s, std::string_view what) {
  std::vector<int> out;
  if (trim(s).empty() || trim(s) == "none") return out;
  for (auto part : split(s, ',')) out.push_back(to_int(part, what));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>) {
      out += items[i];
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

// Re-raises the active exception with the scenario name prefixed, keeping its type.
[[noreturn]] void rethrow_with_context(const std::string& scenario) {
  const std::string prefix = "scenario '" + scenario + "': ";
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const PulseInvalidError& e) {
    throw PulseInvalidError(prefix + e.what(), e.time());
  } catch (const InfeasiblePulseError& e) {
    throw InfeasiblePulseError(prefix + e.what());
  } catch (const StabilityError& e) {
    throw StabilityError(prefix + e.what());
  } catch (const PropagationError& e) {
    throw PropagationError(prefix + e.what());
  } catch (const std::exception& e) {
    throw ConfigError(prefix + e.what());
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// --- configuration -----------------------------------------------------------

void ScenarioConfig::validate() const {
  if (name.empty() || name.find_first_of(",\n\"") != std::string::npos) {
    throw ConfigError("scenario name must be non-empty and free of commas/quotes");
  }
  if (mode_count < 2) throw ConfigError(name + ": at least two modes are required");
  if (!(spacing > 0.0)) throw ConfigError(name + ": spacing must be > 0");
  if (!(ion_mass > 0.0)) throw ConfigError(name + ": ion mass must be > 0");
  if (!(secular_frequency > 0.0)) throw ConfigError(name + ": secular frequency must be > 0");
  if (truncation_distance && *truncation_distance < 1) {
    throw ConfigError(name + ": truncation distance must be >= 1");
  }
  if (static_cast<int>(initial_state.size()) != mode_count) {
    throw ConfigError(name + ": initial state needs one occupation per mode");
  }
  for (int n : initial_state) {
    if (n < 0) throw ConfigError(name + ": occupations must be >= 0");
    if (n_max > 0 && n > n_max) throw ConfigError(name + ": occupation exceeds n_max");
  }
  if (n_max < 0) throw ConfigError(name + ": n_max must be >= 0");
  if (total_time < 0.0) throw ConfigError(name + ": total time must be >= 0");
  if (repetitions < 1) throw ConfigError(name + ": repetitions must be >= 1");
  for (int m : protected_set) {
    if (m < 0 || m >= mode_count) throw ConfigError(name + ": protected mode out of range");
  }
  if (shaped) {
    if (!(pulse_duration > 0.0)) throw ConfigError(name + ": shaped pulse needs T_P > 0");
    if (!(ramp_time > 0.0)) throw ConfigError(name + ": shaped pulse needs T_ud > 0");
    if (!(erf_width > 0.0)) throw ConfigError(name + ": sigma must be > 0");
  }
  if (beam_splitter_pair) {
    const auto [j, k] = *beam_splitter_pair;
    if (j < 0 || k < 0 || j >= mode_count || k >= mode_count || j == k) {
      throw ConfigError(name + ": beam-splitter pair must name two distinct modes");
    }
  }
  try {
    PropagatorConfig prop = propagator;
    prop.secular_frequency = secular_frequency;
    prop.validate();
  } catch (const std::exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

std::vector<int> ScenarioConfig::initial_occupations() const {
  return {initial_state.rbegin(), initial_state.rend()};
}

DDSpec ScenarioConfig::dd_spec() const {
  DDSpec spec;
  spec.mode_count = mode_count;
  spec.total_time = total_time > 0.0 ? total_time : fifty_fifty_time(*this);
  spec.repetitions = repetitions;
  spec.protected_set = protected_set;
  spec.truncation_distance = truncation_distance;
  spec.level_role_swap = level_role_swap;
  spec.pulse_duration = shaped ? pulse_duration : 0.0;
  return spec;
}

double fifty_fifty_time(const ScenarioConfig& config) {
  const double kappa = coupling_rate(config.spacing, config.ion_mass, config.secular_frequency);
  return std::numbers::pi / (2.0 * kappa);
}

std::vector<ScenarioConfig> scenario_catalog() {
  std::vector<ScenarioConfig> out;

  auto two_mode = [](std::string name, std::string desc, double spacing_um) {
    ScenarioConfig c;
    c.name = std::move(name);
    c.description = std::move(desc);
    c.mode_count = 2;
    c.spacing = spacing_um * 1e-6;
    c.initial_state = {2, 1};
    c.named_states = {"30", "21", "12", "03"};
    return c;
  };
  auto shaped = [](ScenarioConfig c, double tp_us, double tud_t0) {
    c.shaped = true;
    c.pulse_duration = tp_us * 1e-6;
    c.ramp_time = tud_t0 * kT0;
    return c;
  };

  out.push_back(two_mode("dd2_ideal", "two-mode ideal DD, d = 27.6 um, |2,1>", 27.6));
  out.push_back(shaped(two_mode("fig1a", "two-mode C3PO, d = 27.6 um, T_P = 4 us, |2,1>", 27.6),
                       4.0, 4.4));
  out.push_back(shaped(two_mode("fig1b", "two-mode C3PO, d = 27.6 um, T_P = 1 us, |2,1>", 27.6),
                       1.0, 1.0));
  out.push_back(shaped(two_mode("fig2", "two-mode C3PO, d = 43.8 um, T_P = 4 us, |2,1>", 43.8),
                       4.0, 4.4));

  auto three_mode = [](std::string name, std::string desc) {
    ScenarioConfig c;
    c.name = std::move(name);
    c.description = std::move(desc);
    c.mode_count = 3;
    c.spacing = 43.8e-6;
    c.initial_state = {2, 1, 0};
    c.named_states = {"210", "201", "120", "102", "021", "012"};
    return c;
  };

  {
    auto c = three_mode("fig3", "three-mode ideal DD, halves pulsed first, |2,1,0>");
    c.level_role_swap = std::vector<bool>{false, false};
    out.push_back(c);
  }
  for (int reps : {1, 5}) {
    const std::string tag = reps == 1 ? "fig4" : "fig5";
    const std::string r = ", n_r = " + std::to_string(reps);
    auto ideal = three_mode(tag + "a", "three-mode ideal DD, mode 0 never pulsed, |2,1,0>" + r);
    ideal.repetitions = reps;
    out.push_back(ideal);
    auto c3po = shaped(three_mode(tag + "b", "three-mode C3PO, T_P = 4 us, |2,1,0>" + r), 4.0, 4.4);
    c3po.repetitions = reps;
    out.push_back(c3po);
  }

  for (int reps : {1, 5}) {
    const std::string tag = reps == 1 ? "fig6" : "fig7";
    const std::string r = ", n_r = " + std::to_string(reps);
    auto bs = three_mode(tag + "a", "protected 50:50 beam splitter on modes 0,1, ideal DD, |1,1,1>" + r);
    bs.initial_state = {1, 1, 1};
    bs.protected_set = {0, 1};
    bs.repetitions = reps;
    bs.beam_splitter_pair = std::pair{1, 0};
    bs.named_states = {"111", "120", "102", "210", "201", "012", "021"};
    out.push_back(bs);
    auto c3po = shaped(bs, 4.0, 4.4);
    c3po.name = tag + "b";
    c3po.description = "protected 50:50 beam splitter on modes 0,1, C3PO T_P = 4 us, |1,1,1>" + r;
    out.push_back(c3po);
  }
  return out;
}

ScenarioConfig catalog_scenario(std::string_view name) {
  for (auto& c : scenario_catalog()) {
    if (c.name == name) return c;
  }
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

namespace {

using Setter = std::function<void(ScenarioConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& config_keys() {
  static const std::map<std::string, Setter, std::less<>> keys = [] {
    std::map<std::string, Setter, std::less<>> k;
    auto scaled = [](double ScenarioConfig::*field, double scale) {
      return [field, scale](ScenarioConfig& c, std::string_view v) {
        c.*field = to_double(v, "config") * scale;
      };
    };
    k["name"] = [](ScenarioConfig& c, std::string_view v) { c.name = std::string(v); };
    k["description"] = [](ScenarioConfig& c, std::string_view v) { c.description = std::string(v); };
    k["chain.modes"] = [](ScenarioConfig& c, std::string_view v) {
      c.mode_count = to_int(v, "chain.modes");
    };
    k["chain.spacing_m"] = scaled(&ScenarioConfig::spacing, 1.0);
    k["chain.spacing_um"] = scaled(&ScenarioConfig::spacing, 1e-6);
    k["chain.mass_kg"] = scaled(&ScenarioConfig::ion_mass, 1.0);
    k["chain.mass_u"] = scaled(&ScenarioConfig::ion_mass, PhysicalConstants::atomic_mass_unit);
    k["chain.omega0_rad_s"] = scaled(&ScenarioConfig::secular_frequency, 1.0);
    k["chain.omega0_mhz"] = scaled(&ScenarioConfig::secular_frequency, kTwoPi * 1e6);
    k["chain.eta"] = [](ScenarioConfig& c, std::string_view v) {
      if (trim(v) == "none") {
        c.truncation_distance.reset();
      } else {
        c.truncation_distance = to_int(v, "chain.eta");
      }
    };
    k["state.initial"] = [](ScenarioConfig& c, std::string_view v) {
      c.initial_state = to_int_list(v, "state.initial");
    };
    k["schedule.total_time_s"] = scaled(&ScenarioConfig::total_time, 1.0);
    k["schedule.total_time_us"] = scaled(&ScenarioConfig::total_time, 1e-6);
    k["schedule.repetitions"] = [](ScenarioConfig& c, std::string_view v) {
      c.repetitions = to_int(v, "schedule.repetitions");
    };
    k["schedule.protected"] = [](ScenarioConfig& c, std::string_view v) {
      c.protected_set = to_int_list(v, "schedule.protected");
    };
    k["schedule.role_swap"] = [](ScenarioConfig& c, std::string_view v) {
      if (trim(v) == "default") {
        c.level_role_swap.reset();
        return;
      }
      std::vector<bool> flags;
      for (int f : to_int_list(v, "schedule.role_swap")) {
        if (f != 0 && f != 1) throw ConfigError("schedule.role_swap: entries must be 0 or 1");
        flags.push_back(f == 1);
      }
      c.level_role_swap = flags;
    };
    k["pulse.model"] = [](ScenarioConfig& c, std::string_view v) {
      v = trim(v);
      if (v == "ideal") {
        c.shaped = false;
      } else if (v == "shaped") {
        c.shaped = true;
      } else {
        throw ConfigError("pulse.model must be 'ideal' or 'shaped'");
      }
    };
    k["pulse.tp_s"] = scaled(&ScenarioConfig::pulse_duration, 1.0);
    k["pulse.tp_us"] = scaled(&ScenarioConfig::pulse_duration, 1e-6);
    k["pulse.tud_s"] = scaled(&ScenarioConfig::ramp_time, 1.0);
    k["pulse.tud_us"] = scaled(&ScenarioConfig::ramp_time, 1e-6);
    k["pulse.sigma"] = scaled(&ScenarioConfig::erf_width, 1.0);
    k["pulse.target_phase"] = scaled(&ScenarioConfig::target_phase, 1.0);
    k["propagator.tolerance"] = [](ScenarioConfig& c, std::string_view v) {
      c.propagator.tolerance = to_double(v, "propagator.tolerance");
    };
    k["propagator.max_step_s"] = [](ScenarioConfig& c, std::string_view v) {
      c.propagator.max_step = to_double(v, "propagator.max_step_s");
    };
    k["propagator.record_samples"] = [](ScenarioConfig& c, std::string_view v) {
      c.propagator.record_samples = to_int(v, "propagator.record_samples");
    };
    k["propagator.leakage_threshold"] = [](ScenarioConfig& c, std::string_view v) {
      c.propagator.leakage_threshold = to_double(v, "propagator.leakage_threshold");
    };
    k["propagator.n_max"] = [](ScenarioConfig& c, std::string_view v) {
      c.n_max = trim(v) == "auto" ? 0 : to_int(v, "propagator.n_max");
    };
    k["metric.beam_splitter"] = [](ScenarioConfig& c, std::string_view v) {
      const auto pair = to_int_list(v, "metric.beam_splitter");
      if (pair.empty()) {
        c.beam_splitter_pair.reset();
      } else if (pair.size() == 2) {
        c.beam_splitter_pair = std::pair{pair[0], pair[1]};
      } else {
        throw ConfigError("metric.beam_splitter needs two modes or 'none'");
      }
    };
    k["output.named_states"] = [](ScenarioConfig& c, std::string_view v) {
      c.named_states.clear();
      if (trim(v).empty() || trim(v) == "none") return;
      for (auto s : split(v, ',')) c.named_states.emplace_back(s);
    };
    k["output.full_state"] = [](ScenarioConfig& c, std::string_view v) {
      c.full_state = to_bool(v, "output.full_state");
    };
    return k;
  }();
  return keys;
}

}  // namespace

ScenarioConfig parse_config(std::string_view text) {
  struct Entry {
    int line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::optional<std::string> base;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? end : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key == "base") {
      base = value;
    } else {
      entries.push_back({line_no, std::move(key), std::move(value)});
    }
  }

  ScenarioConfig config = base ? catalog_scenario(*base) : ScenarioConfig{};
  if (!base) config.name = "custom";
  const auto& keys = config_keys();
  for (const auto& e : entries) {
    const auto it = keys.find(e.key);
    if (it == keys.end()) {
      throw ConfigError("config line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
    try {
      it->second(config, e.value);
    } catch (const ConfigError& err) {
      throw ConfigError("config line " + std::to_string(e.line) + ": " + err.what());
    }
  }
  config.validate();
  return config;
}

std::string serialize_config(const ScenarioConfig& c) {
  std::ostringstream out;
  out << "name = " << c.name << '\n';
  if (!c.description.empty()) out << "description = " << c.description << '\n';
  out << "chain.modes = " << c.mode_count << '\n';
  out << "chain.spacing_m = " << format_double(c.spacing) << '\n';
  out << "chain.mass_kg = " << format_double(c.ion_mass) << '\n';
  out << "chain.omega0_rad_s = " << format_double(c.secular_frequency) << '\n';
  out << "chain.eta = " << (c.truncation_distance ? std::to_string(*c.truncation_distance) : "none")
      << '\n';
  out << "state.initial = " << join(c.initial_state) << '\n';
  out << "schedule.total_time_s = " << format_double(c.total_time) << '\n';
  out << "schedule.repetitions = " << c.repetitions << '\n';
  out << "schedule.protected = " << (c.protected_set.empty() ? "none" : join(c.protected_set))
      << '\n';
  if (c.level_role_swap) {
    std::vector<int> flags(c.level_role_swap->begin(), c.level_role_swap->end());
    out << "schedule.role_swap = " << (flags.empty() ? "none" : join(flags)) << '\n';
  } else {
    out << "schedule.role_swap = default\n";
  }
  out << "pulse.model = " << (c.shaped ? "shaped" : "ideal") << '\n';
  out << "pulse.tp_s = " << format_double(c.pulse_duration) << '\n';
  out << "pulse.tud_s = " << format_double(c.ramp_time) << '\n';
  out << "pulse.sigma = " << format_double(c.erf_width) << '\n';
  out << "pulse.target_phase = " << format_double(c.target_phase) << '\n';
  out << "propagator.tolerance = " << format_double(c.propagator.tolerance) << '\n';
  out << "propagator.max_step_s = " << format_double(c.propagator.max_step) << '\n';
  out << "propagator.record_samples = " << c.propagator.record_samples << '\n';
  out << "propagator.leakage_threshold = " << format_double(c.propagator.leakage_threshold)
      << '\n';
  out << "propagator.n_max = " << (c.n_max == 0 ? std::string("auto") : std::to_string(c.n_max))
      << '\n';
  out << "metric.beam_splitter = "
      << (c.beam_splitter_pair ? std::to_string(c.beam_splitter_pair->first) + "," +
                                     std::to_string(c.beam_splitter_pair->second)
                               : std::string("none"))
      << '\n';
  out << "output.named_states = " << (c.named_states.empty() ? "none" : join(c.named_states))
      << '\n';
  out << "output.full_state = " << (c.full_state ? "true" : "false") << '\n';
  return out.str();
}

// --- running -----------------------------------------------------------------

namespace {

struct Attempt {
  FockSpace space;
  SimulationResult simulation;
  double error_E;
  std::optional<double> error_EB;
};

Attempt attempt(const ScenarioConfig& c, int n_max, const PulseSchedule& schedule,
                const CouplingMatrix& couplings, const PropagatorConfig& prop,
                const ShapedPulse* pulse) {
  FockSpace space(c.mode_count, n_max);
  const PhononState psi0 = basis_state(space, c.initial_occupations());
  SimulationResult sim = run_schedule(space, psi0, schedule, couplings, prop, pulse);
  const double e = error_overlap(psi0, sim.final_state);
  std::optional<double> eb;
  if (c.beam_splitter_pair) {
    eb = error_beam_splitter(space, psi0, sim.final_state, c.beam_splitter_pair->first,
                             c.beam_splitter_pair->second);
  }
  return {space, std::move(sim), e, eb};
}

}  // namespace

ScenarioRun run_scenario(const ScenarioConfig& config) {
  try {
    config.validate();
    const IonChainConfig chain =
        equidistant_chain(config.mode_count, config.spacing, config.ion_mass,
                          config.secular_frequency, config.truncation_distance);
    const CouplingMatrix couplings = build_coupling_matrix(chain);
    const DDSpec spec = config.dd_spec();
    const PulseSchedule schedule = synthesize(spec);

    std::optional<ShapedPulse> pulse;
    if (config.shaped) {
      pulse = design_pulse(config.pulse_duration, config.ramp_time, config.erf_width,
                           config.secular_frequency, config.target_phase);
    }
    PropagatorConfig prop = config.propagator;
    prop.secular_frequency = config.secular_frequency;
    const ShapedPulse* pulse_ptr = pulse ? &*pulse : nullptr;

    ScenarioRun run;
    run.config = config;
    std::optional<Attempt> best;
    bool converged = false;
    if (config.n_max > 0) {
      best = attempt(config, config.n_max, schedule, couplings, prop, pulse_ptr);
      converged = true;
    } else {
      const int max_occ = *std::max_element(config.initial_state.begin(), config.initial_state.end());
      std::optional<double> previous;
      for (int n = std::max(8, max_occ); n <= 20; n += 2) {
        double dim = 1.0;
        for (int j = 0; j < config.mode_count; ++j) dim *= n + 1;
        if (dim > 4096.0 && best) break;
        Attempt a = attempt(config, n, schedule, couplings, prop, pulse_ptr);
        const double metric = a.error_EB.value_or(a.error_E);
        run.convergence.push_back({n, metric, a.simulation.boundary_leakage});
        best = std::move(a);
        if (previous) {
          const double change = std::abs(metric - *previous);
          if (change <= 0.05 * std::abs(metric) || change < 1e-12) {
            converged = true;
            break;
          }
        }
        previous = metric;
      }
    }

    run.space = best->space;
    run.simulation = std::move(best->simulation);
    ResultRecord& r = run.record;
    r.scenario = config.name;
    r.mode_count = config.mode_count;
    r.spacing = config.spacing;
    r.repetitions = config.repetitions;
    r.shaped = config.shaped;
    r.pulse_duration = config.shaped ? config.pulse_duration : 0.0;
    r.strength = pulse ? pulse->params.strength : 0.0;
    r.n_max = run.space.cutoff();
    r.converged = converged;
    r.error_E = best->error_E;
    r.error_EB = best->error_EB;
    r.norm_drift = run.simulation.norm_drift;
    r.boundary_leakage = run.simulation.boundary_leakage;
    r.leakage_flagged = run.simulation.leakage_flagged;
    r.sim_time = run.simulation.wall_time;
    return run;
  } catch (...) {
    rethrow_with_context(config.name);
  }
}

std::string populations_csv(const ScenarioRun& run) {
  const auto& sim = run.simulation;
  const auto& space = run.space;
  const auto dim = space.dimension();
  std::vector<bool> keep(static_cast<std::size_t>(dim), run.config.full_state);
  const std::set<std::string> named(run.config.named_states.begin(), run.config.named_states.end());
  const std::int64_t initial = space.index(run.config.initial_occupations());
  keep[static_cast<std::size_t>(initial)] = true;
  for (std::int64_t i = 0; i < dim; ++i) {
    if (named.count(space.label(i))) keep[static_cast<std::size_t>(i)] = true;
    for (const auto& p : sim.populations) {
      if (p(i) > 1e-4) {
        keep[static_cast<std::size_t>(i)] = true;
        break;
      }
    }
  }
  std::ostringstream out;
  out << "t_us";
  for (std::int64_t i = 0; i < dim; ++i) {
    if (keep[static_cast<std::size_t>(i)]) out << ",P" << space.label(i);
  }
  out << ",other\n";
  for (std::size_t r = 0; r < sim.times.size(); ++r) {
    const auto& p = sim.populations[r];
    double shown = 0.0;
    out << format_double(sim.times[r] * 1e6);
    for (std::int64_t i = 0; i < dim; ++i) {
      if (!keep[static_cast<std::size_t>(i)]) continue;
      shown += p(i);
      out << ',' << format_double(p(i));
    }
    out << ',' << format_double(p.sum() - shown) << '\n';
  }
  return out.str();
}

// --- results table -------------------------------------------------------------

std::string results_csv_header() {
  return "scenario,modes,spacing_um,repetitions,pulse_model,pulse_duration_us,strength,n_max,"
         "converged,error_E,error_EB,norm_drift,boundary_leakage,leakage_flagged,sim_time_us";
}

std::string results_csv_row(const ResultRecord& r) {
  std::ostringstream out;
  out << r.scenario << ',' << r.mode_count << ',' << format_double(r.spacing * 1e6) << ','
      << r.repetitions << ',' << (r.shaped ? "shaped" : "ideal") << ','
      << format_double(r.pulse_duration * 1e6) << ',' << format_double(r.strength) << ','
      << r.n_max << ',' << (r.converged ? "true" : "false") << ',' << format_double(r.error_E)
      << ',' << (r.error_EB ? format_double(*r.error_EB) : "") << ','
      << format_double(r.norm_drift) << ',' << format_double(r.boundary_leakage) << ','
      << (r.leakage_flagged ? "true" : "false") << ',' << format_double(r.sim_time * 1e6);
  return out.str();
}

std::string results_csv(std::vector<ResultRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return a.scenario < b.scenario; });
  std::string out = results_csv_header() + "\n";
  for (const auto& r : records) out += results_csv_row(r) + "\n";
  return out;
}

std::vector<ResultRecord> parse_results_csv(std::string_view text) {
  std::vector<ResultRecord> out;
  bool header = true;
  for (auto line : split(text, '\n')) {
    if (line.empty()) continue;
    if (header) {
      if (line != results_csv_header()) throw ConfigError("results table: unexpected header");
      header = false;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 15) throw ConfigError("results table: wrong column count");
    ResultRecord r;
    r.scenario = std::string(f[0]);
    r.mode_count = to_int(f[1], "modes");
    r.spacing = to_double(f[2], "spacing_um") * 1e-6;
    r.repetitions = to_int(f[3], "repetitions");
    r.shaped = f[4] == "shaped";
    r.pulse_duration = to_double(f[5], "pulse_duration_us") * 1e-6;
    r.strength = to_double(f[6], "strength");
    r.n_max = to_int(f[7], "n_max");
    r.converged = to_bool(f[8], "converged");
    r.error_E = to_double(f[9], "error_E");
    if (!f[10].empty()) r.error_EB = to_double(f[10], "error_EB");
    r.norm_drift = to_double(f[11], "norm_drift");
    r.boundary_leakage = to_double(f[12], "boundary_leakage");
    r.leakage_flagged = to_bool(f[13], "leakage_flagged");
    r.sim_time = to_double(f[14], "sim_time_us") * 1e-6;
    out.push_back(std::move(r));
  }
  return out;
}

// --- sweeps ------------------------------------------------------------------

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "n_r" || name == "repetitions") return SweepAxis::repetitions;
  if (name == "d" || name == "spacing") return SweepAxis::spacing;
  if (name == "T_P" || name == "tp" || name == "pulse_duration") return SweepAxis::pulse_duration;
  if (name == "n_max") return SweepAxis::n_max;
  throw ConfigError("unknown sweep axis '" + std::string(name) + "' (n_r, d, T_P, n_max)");
}

std::string sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::repetitions: return "n_r";
    case SweepAxis::spacing: return "d_um";
    case SweepAxis::pulse_duration: return "T_P_us";
    case SweepAxis::n_max: return "n_max";
  }
  return "";
}

ScenarioConfig apply_axis(const ScenarioConfig& base, SweepAxis axis, double value) {
  ScenarioConfig c = base;
  auto as_int = [&](const char* what) {
    if (value != std::round(value)) throw ConfigError(std::string(what) + " must be an integer");
    return static_cast<int>(value);
  };
  switch (axis) {
    case SweepAxis::repetitions: c.repetitions = as_int("n_r"); break;
    case SweepAxis::spacing: c.spacing = value * 1e-6; break;
    case SweepAxis::pulse_duration: {
      const double tp = value * 1e-6;
      // Keep the ramp-to-duration ratio of the base pulse.
      c.ramp_time = c.shaped && c.pulse_duration > 0.0 ? c.ramp_time * tp / c.pulse_duration
                                                       : 0.5 * tp;
      c.pulse_duration = tp;
      c.shaped = true;
      break;
    }
    case SweepAxis::n_max: c.n_max = as_int("n_max"); break;
  }
  c.name = base.name + "@" + sweep_axis_name(axis) + "=" + format_double(value);
  return c;
}

std::vector<SweepRow> sweep(const ScenarioConfig& base, SweepAxis axis,
                            const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<std::future<SweepRow>> jobs;
  jobs.reserve(values.size());
  for (double v : values) {
    jobs.push_back(std::async(std::launch::async, [&base, axis, v] {
      SweepRow row{v, std::nullopt, {}};
      try {
        row.record = run_scenario(apply_axis(base, axis, v)).record;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      return row;
    }));
  }
  std::vector<SweepRow> rows;
  rows.reserve(jobs.size());
  for (auto& j : jobs) rows.push_back(j.get());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.value < b.value; });
  return rows;
}

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::string out = sweep_axis_name(axis) + "," + results_csv_header() + ",error\n";
  for (const auto& row : rows) {
    out += format_double(row.value) + ",";
    if (row.record) {
      out += results_csv_row(*row.record) + ",";
    } else {
      out += std::string(14, ',') + ",";
    }
    std::string msg = row.error;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out += msg + "\n";
  }
  return out;
}

// --- reference values and reports --------------------------------------------

std::vector<ReferenceValue> parse_reference_values(std::string_view csv) {
  std::vector<ReferenceValue> out;
  bool header = true;
  for (auto line : split(csv, '\n')) {
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 5) throw ConfigError("reference values: expected 5 columns");
    ReferenceValue r;
    r.scenario = std::string(f[0]);
    r.metric = std::string(f[1]);
    if (r.metric != "E" && r.metric != "EB") throw ConfigError("reference values: bad metric");
    r.value = to_double(f[2], "reference_value");
    if (f[3] == "factor") {
      r.kind = ToleranceKind::factor;
    } else if (f[3] == "relative") {
      r.kind = ToleranceKind::relative;
    } else if (f[3] == "below") {
      r.kind = ToleranceKind::below;
    } else {
      throw ConfigError("reference values: unknown tolerance kind '" + std::string(f[3]) + "'");
    }
    r.tolerance = to_double(f[4], "tolerance");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ReferenceValue> load_reference_values() {
  std::string dir = PHONONDD_DATA_DIR;
  if (const char* env = std::getenv("PHONONDD_DATA"); env && *env) dir = env;
  const std::string path = dir + "/reference_values.csv";
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_reference_values(buf.str());
}

bool within_tolerance(double computed, const ReferenceValue& ref) {
  switch (ref.kind) {
    case ToleranceKind::below: return computed < ref.tolerance;
    case ToleranceKind::factor: {
      const double ratio = computed / ref.value;
      return ratio >= 1.0 / ref.tolerance && ratio <= ref.tolerance;
    }
    case ToleranceKind::relative: return std::abs(computed / ref.value - 1.0) <= ref.tolerance;
  }
  return false;
}

bool Report::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass.value_or(true); });
}

Report emit_report(const std::vector<ResultRecord>& records,
                   const std::vector<ReferenceValue>& references) {
  Report report;
  auto add = [&](const std::string& scenario, const std::string& metric, double value) {
    ReportRow row{scenario, metric, value, std::nullopt, std::nullopt, std::nullopt};
    for (const auto& ref : references) {
      if (ref.scenario == scenario && ref.metric == metric) {
        row.reference = ref;
        row.ratio = ref.value != 0.0 ? std::optional<double>(value / ref.value) : std::nullopt;
        row.pass = within_tolerance(value, ref);
        break;
      }
    }
    report.rows.push_back(std::move(row));
  };
  for (const auto& r : records) {
    add(r.scenario, "E", r.error_E);
    if (r.error_EB) add(r.scenario, "EB", *r.error_EB);
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.scenario, a.metric) < std::tie(b.scenario, b.metric);
  });
  return report;
}

namespace {

std::string tolerance_text(const ReferenceValue& ref) {
  switch (ref.kind) {
    case ToleranceKind::factor: return "x" + format_double(ref.tolerance);
    case ToleranceKind::relative: return "+-" + format_double(ref.tolerance * 100.0) + "%";
    case ToleranceKind::below: return "<" + format_double(ref.tolerance);
  }
  return "";
}

}  // namespace

std::string Report::csv() const {
  std::string out = "scenario,metric,computed,reference,tolerance,ratio,verdict\n";
  for (const auto& r : rows) {
    out += r.scenario + "," + r.metric + "," + format_double(r.computed) + ",";
    out += (r.reference ? format_double(r.reference->value) : "") + ",";
    out += (r.reference ? tolerance_text(*r.reference) : "") + ",";
    out += (r.ratio ? format_double(*r.ratio) : "") + ",";
    out += r.pass ? (*r.pass ? "PASS" : "FAIL") : "";
    out += "\n";
  }
  return out;
}

std::string Report::text() const {
  std::ostringstream out;
  out << std::left << std::setw(24) << "scenario" << std::setw(7) << "metric" << std::setw(13)
      << "computed" << std::setw(13) << "reference" << std::setw(10) << "tolerance"
      << std::setw(10) << "ratio" << "verdict\n";
  for (const auto& r : rows) {
    std::ostringstream computed, ref, ratio;
    computed << std::setprecision(3) << std::scientific << r.computed;
    if (r.reference) ref << std::setprecision(2) << std::scientific << r.reference->value;
    if (r.ratio) ratio << std::setprecision(3) << std::fixed << *r.ratio;
    out << std::setw(24) << r.scenario << std::setw(7) << r.metric << std::setw(13)
        << computed.str() << std::setw(13) << ref.str() << std::setw(10)
        << (r.reference ? tolerance_text(*r.reference) : "") << std::setw(10) << ratio.str()
        << (r.pass ? (*r.pass ? "PASS" : "FAIL") : "-") << '\n';
  }
  return out.str();
}

}  // namespace phonondd
