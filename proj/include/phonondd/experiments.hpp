// experiments.hpp: scenario catalog, config files, sweeps and reports.

#pragma once

#include "phonondd/propagator.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phonondd {

struct ScenarioConfig {
  std::string name;
  std::string description;

  // chain
  int mode_count = 2;
  double spacing = 27.6e-6;  // m
  double ion_mass = 40.0 * PhysicalConstants::atomic_mass_unit;
  double secular_frequency = kTwoPi * 2.2e6;
  std::optional<int> truncation_distance;

  // Occupations in label order n_{M-1}, ..., n_0.
  std::vector<int> initial_state{2, 1};

  // schedule; total_time 0 selects the 50:50 time pi / (2 kappa_{1,0})
  double total_time = 0.0;
  int repetitions = 1;
  std::vector<int> protected_set;
  std::optional<std::vector<bool>> level_role_swap;

  // pulse
  bool shaped = false;
  double pulse_duration = 0.0;  // s
  double ramp_time = 0.0;       // s
  double erf_width = 6.0;
  double target_phase = std::numbers::pi;

  PropagatorConfig propagator;
  int n_max = 0;  // 0: convergence protocol

  // E_B target pair (j, k); when absent only E is reported.
  std::optional<std::pair<int, int>> beam_splitter_pair;
  std::vector<std::string> named_states;  // labels always written to the populations CSV
  bool full_state = false;

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
  /// Occupations mode 0 first.
  std::vector<int> initial_occupations() const;
  DDSpec dd_spec() const;
};

/// pi / (2 kappa_{1,0}) for the configured chain.
double fifty_fifty_time(const ScenarioConfig& config);

std::vector<ScenarioConfig> scenario_catalog();
/// Throws ConfigError for unknown names.
ScenarioConfig catalog_scenario(std::string_view name);

/// `key = value` lines, '#' comments. `base = <catalog name>` starts from a
/// catalog entry; other keys override it. Throws ConfigError.
ScenarioConfig parse_config(std::string_view text);
std::string serialize_config(const ScenarioConfig& config);

struct ConvergenceStep {
  int n_max;
  double metric;
  double boundary_leakage;
};

struct ResultRecord {
  std::string scenario;
  int mode_count = 0;
  double spacing = 0.0;
  int repetitions = 1;
  bool shaped = false;
  double pulse_duration = 0.0;
  double strength = 0.0;  // k of the shaped pulse, 0 for ideal
  int n_max = 0;
  bool converged = false;
  double error_E = 0.0;
  std::optional<double> error_EB;
  double norm_drift = 0.0;
  double boundary_leakage = 0.0;
  bool leakage_flagged = false;
  double sim_time = 0.0;  // schedule wall time, s
};

struct ScenarioRun {
  ScenarioConfig config;
  ResultRecord record;
  std::vector<ConvergenceStep> convergence;
  FockSpace space{1, 0};
  SimulationResult simulation;
};

/// Builds the model, synthesizes the schedule, designs the pulse and runs the
/// propagator. With n_max == 0 the cutoff starts at 8 and grows by 2 until the
/// primary metric changes by less than 5% (capped at cutoff 20 or dimension
/// 4096). Errors from sub-modules are rethrown with the scenario name.
ScenarioRun run_scenario(const ScenarioConfig& config);

/// t_us, one column per retained basis label, and `other` (remaining norm).
std::string populations_csv(const ScenarioRun& run);

std::string results_csv_header();
std::string results_csv_row(const ResultRecord& record);
std::string results_csv(std::vector<ResultRecord> records);
std::vector<ResultRecord> parse_results_csv(std::string_view text);

enum class SweepAxis { repetitions, spacing, pulse_duration, n_max };

SweepAxis parse_sweep_axis(std::string_view name);
std::string sweep_axis_name(SweepAxis axis);
/// Units: n_r and n_max are integers, spacing in um, pulse duration in us.
ScenarioConfig apply_axis(const ScenarioConfig& base, SweepAxis axis, double value);

struct SweepRow {
  double value;
  std::optional<ResultRecord> record;
  std::string error;
};

/// Runs every variant (concurrently) and returns rows sorted by value.
std::vector<SweepRow> sweep(const ScenarioConfig& base, SweepAxis axis,
                            const std::vector<double>& values);
std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows);

enum class ToleranceKind { factor, relative, below };

struct ReferenceValue {
  std::string scenario;
  std::string metric;  // "E" or "EB"
  double value;
  ToleranceKind kind;
  double tolerance;
};

std::vector<ReferenceValue> parse_reference_values(std::string_view csv);
/// Reads reference_values.csv from $PHONONDD_DATA or the installed data dir.
std::vector<ReferenceValue> load_reference_values();

/// ratio = computed / reference. factor: 1/t <= ratio <= t; relative:
/// |ratio - 1| <= t; below: computed < t.
bool within_tolerance(double computed, const ReferenceValue& reference);

struct ReportRow {
  std::string scenario;
  std::string metric;
  double computed;
  std::optional<ReferenceValue> reference;
  std::optional<double> ratio;
  std::optional<bool> pass;
};

struct Report {
  std::vector<ReportRow> rows;
  bool all_pass() const;
  std::string csv() const;
  std::string text() const;
};

Report emit_report(const std::vector<ResultRecord>& records,
                   const std::vector<ReferenceValue>& references);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace phonondd
