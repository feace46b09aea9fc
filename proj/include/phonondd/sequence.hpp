// sequence.hpp: dynamical-decoupling schedules built by recursive
// concatenation, with protected-subset, truncated and repeated variants, and
// the coupling-sign bookkeeping used to verify them.
//
// Schedules are stored in execution (time) order. A PhaseShift is a pi phase
// applied simultaneously to every listed mode.

#pragma once

#include "phonondd/phonon_model.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace phonondd {

struct Evolve {
  double duration;  // s

  bool operator==(const Evolve&) const = default;
};

struct PhaseShift {
  std::vector<int> modes;  // sorted, non-empty

  bool operator==(const PhaseShift&) const = default;
};

using ScheduleEvent = std::variant<Evolve, PhaseShift>;

struct PulseSchedule {
  int mode_count = 0;
  double total_time = 0.0;    // nominal T covered by the whole schedule
  int repetitions = 1;
  double pulse_duration = 0;  // 0: instantaneous (ideal) pulses
  bool nothing_to_decouple = false;
  std::vector<ScheduleEvent> events;

  bool shaped() const { return pulse_duration > 0.0; }
  /// Sum of Evolve durations.
  double evolve_time() const;
  /// Evolve time plus one pulse window per PhaseShift.
  double wall_time() const;
  std::size_t phase_shift_count() const;

  bool operator==(const PulseSchedule&) const = default;
};

struct DDSpec {
  int mode_count = 2;
  double total_time = 0.0;  // T, s
  int repetitions = 1;      // n_r
  std::vector<int> protected_set;
  std::optional<int> truncation_distance;
  // Per concatenation level (index 0 = first split): pulse the "0" half
  // instead of the "1" half. nullopt selects the default ordering.
  std::optional<std::vector<bool>> level_role_swap;
  double pulse_duration = 0.0;  // T_P of a shaped pulse; 0 = ideal

  void validate() const;
};

/// Default role flags: for three modes the lower-error ordering that pulses
/// the "0"-labelled half at the second level, otherwise no swaps.
std::vector<bool> default_role_swap(int mode_count);

/// ceil(log2(M)) for M >= 1.
int concatenation_levels(int mode_count);

PulseSchedule synthesize_concatenated(const DDSpec& spec);
PulseSchedule synthesize_protected(const DDSpec& spec);
PulseSchedule synthesize_truncated(const DDSpec& spec);
/// Dispatches on protected_set / truncation_distance.
PulseSchedule synthesize(const DDSpec& spec);

/// Divides every Evolve by n_r and concatenates n_r copies. Shaped schedules
/// are re-windowed after the subdivision.
PulseSchedule repeat_schedule(const PulseSchedule& base, int repetitions);

/// Places a pulse window of length T_P in front of every PhaseShift by
/// shortening the preceding Evolve, so each pulse ends at its nominal time.
/// Throws InfeasiblePulseError when a segment is not longer than T_P.
PulseSchedule with_pulse_windows(const PulseSchedule& ideal, double pulse_duration);

/// Inverse of with_pulse_windows.
PulseSchedule without_pulse_windows(const PulseSchedule& shaped);

enum class PairRole { decouple, protect, ignore };

struct PairDwell {
  int j;
  int k;
  PairRole role;
  double signed_dwell;   // integral of s_jk(t) over the schedule
  bool sign_flipped;     // s_jk was -1 somewhere
  bool ok;
};

struct DwellReport {
  std::vector<PairDwell> pairs;
  std::vector<int> pulse_counts;  // per mode
  double total_time = 0.0;
  bool parity_ok = false;
  bool passed = false;

  const PairDwell& pair(int j, int k) const;
};

/// Tracks s_jk(t) in {+1,-1} through the schedule. A PhaseShift toggles s_jk
/// iff exactly one of j, k is pulsed; with pulse windows the toggle sits at the
/// window midpoint. Pairs with zero coupling are ignored, pairs inside the
/// protected set must never flip, all others must integrate to zero.
DwellReport signed_dwell_check(const PulseSchedule& schedule, const CouplingMatrix& couplings,
                               const std::vector<int>& protected_set = {});

struct FeasibilityBounds {
  int max_modes = 0;  // exclusive: M < max_modes
  int max_eta = 0;    // exclusive: eta < max_eta
  int max_reps = 0;   // exclusive: n_r < max_reps for the given M
};

FeasibilityBounds feasibility_bounds(double total_time, double pulse_duration, int repetitions,
                                     int mode_count);

/// Text format:
///   M <modes>
///   T <seconds>
///   n_r <repetitions>
///   model ideal | model shaped <T_P seconds>
///   EVOLVE <seconds>
///   PULSE <mode,mode,...>
std::string serialize_schedule(const PulseSchedule& schedule);
PulseSchedule parse_schedule(std::string_view text);

}  // namespace phonondd
