#include "phonondd/sequence.hpp"

#include "phonondd/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace phonondd {

namespace {

// Pulse toggles on the dyadic grid t = u * T / 2^levels, u = 1..2^levels.
struct PulsePlan {
  int mode_count = 0;
  int levels = 0;
  std::vector<std::vector<bool>> toggles;  // [u][mode], u = 0 unused

  PulsePlan(int modes, int lv)
      : mode_count(modes),
        levels(lv),
        toggles((std::size_t{1} << lv) + 1, std::vector<bool>(static_cast<std::size_t>(modes))) {}

  std::size_t slots() const { return toggles.size() - 1; }

  void toggle_level(int level, const std::vector<int>& modes) {
    const std::size_t step = std::size_t{1} << (levels - level);
    const std::size_t count = std::size_t{1} << (level - 1);
    for (std::size_t p = 1; p <= count; ++p) {
      auto& row = toggles[(2 * p - 1) * step];
      for (int m : modes) row[static_cast<std::size_t>(m)] = !row[static_cast<std::size_t>(m)];
    }
  }

  std::vector<int> pulse_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(mode_count), 0);
    for (const auto& row : toggles) {
      for (std::size_t m = 0; m < row.size(); ++m) counts[m] += row[m] ? 1 : 0;
    }
    return counts;
  }

  // Final pulse at t = T on every mode with an odd count.
  void compensate() {
    const auto counts = pulse_counts();
    auto& last = toggles.back();
    for (std::size_t m = 0; m < counts.size(); ++m) {
      if (counts[m] % 2 == 1) last[m] = !last[m];
    }
  }
};

bool swapped(const std::vector<bool>& flags, int level) {
  const auto i = static_cast<std::size_t>(level - 1);
  return i < flags.size() && flags[i];
}

// Recursive halving from `first_level` to `last_level`; singletons are carried
// unchanged and never pulsed.
void split_levels(std::vector<std::vector<int>> groups, int first_level, int last_level,
                  const std::vector<bool>& flags, PulsePlan& plan) {
  for (int level = first_level; level <= last_level; ++level) {
    std::vector<std::vector<int>> next;
    std::vector<int> pulsed;
    for (auto& g : groups) {
      if (g.size() <= 1) {
        next.push_back(std::move(g));
        continue;
      }
      const auto half = static_cast<std::ptrdiff_t>(g.size() / 2);
      std::vector<int> zero(g.begin(), g.begin() + half);
      std::vector<int> one(g.begin() + half, g.end());
      const auto& target = swapped(flags, level) ? zero : one;
      pulsed.insert(pulsed.end(), target.begin(), target.end());
      next.push_back(std::move(zero));
      next.push_back(std::move(one));
    }
    plan.toggle_level(level, pulsed);
    groups = std::move(next);
  }
}

PulseSchedule emit(const PulsePlan& plan, const DDSpec& spec) {
  PulseSchedule s;
  s.mode_count = spec.mode_count;
  s.total_time = spec.total_time;
  s.repetitions = 1;
  const double slot = std::ldexp(spec.total_time, -plan.levels);
  std::size_t pending = 0;
  for (std::size_t u = 1; u <= plan.slots(); ++u) {
    ++pending;
    std::vector<int> modes;
    for (std::size_t m = 0; m < plan.toggles[u].size(); ++m) {
      if (plan.toggles[u][m]) modes.push_back(static_cast<int>(m));
    }
    if (modes.empty()) continue;
    s.events.emplace_back(Evolve{slot * static_cast<double>(pending)});
    s.events.emplace_back(PhaseShift{std::move(modes)});
    pending = 0;
  }
  if (pending > 0) s.events.emplace_back(Evolve{slot * static_cast<double>(pending)});
  return s;
}

PulseSchedule single_segment(const DDSpec& spec) {
  PulseSchedule s;
  s.mode_count = spec.mode_count;
  s.total_time = spec.total_time;
  s.nothing_to_decouple = true;
  s.events.emplace_back(Evolve{spec.total_time});
  return s;
}

// Repetition and pulse windows shared by every synthesizer.
PulseSchedule finish(PulseSchedule cycle, const DDSpec& spec) {
  const bool flag = cycle.nothing_to_decouple;
  PulseSchedule out = repeat_schedule(cycle, spec.repetitions);
  out.nothing_to_decouple = flag;
  if (spec.pulse_duration > 0.0) out = with_pulse_windows(out, spec.pulse_duration);
  return out;
}

std::vector<bool> flags_for(const DDSpec& spec, int mode_count) {
  return spec.level_role_swap ? *spec.level_role_swap : default_role_swap(mode_count);
}

PulsePlan concatenation_plan(int mode_count, const std::vector<bool>& flags) {
  PulsePlan plan(mode_count, concatenation_levels(mode_count));
  std::vector<int> all(static_cast<std::size_t>(mode_count));
  for (int m = 0; m < mode_count; ++m) all[static_cast<std::size_t>(m)] = m;
  split_levels({all}, 1, plan.levels, flags, plan);
  plan.compensate();
  return plan;
}

bool in_set(const std::vector<int>& set, int m) {
  return std::find(set.begin(), set.end(), m) != set.end();
}

}  // namespace

double PulseSchedule::evolve_time() const {
  double t = 0.0;
  for (const auto& e : events) {
    if (const auto* ev = std::get_if<Evolve>(&e)) t += ev->duration;
  }
  return t;
}

double PulseSchedule::wall_time() const {
  return evolve_time() + pulse_duration * static_cast<double>(phase_shift_count());
}

std::size_t PulseSchedule::phase_shift_count() const {
  return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [](const auto& e) {
    return std::holds_alternative<PhaseShift>(e);
  }));
}

void DDSpec::validate() const {
  if (mode_count < 1) throw std::invalid_argument("DDSpec: mode_count must be >= 1");
  if (!(total_time > 0.0)) throw std::invalid_argument("DDSpec: total_time must be > 0");
  if (repetitions < 1) throw std::domain_error("DDSpec: repetitions must be >= 1");
  if (pulse_duration < 0.0) throw std::invalid_argument("DDSpec: pulse_duration must be >= 0");
  for (int m : protected_set) {
    if (m < 0 || m >= mode_count) throw std::out_of_range("DDSpec: protected mode out of range");
  }
  if (truncation_distance && *truncation_distance < 1) {
    throw std::invalid_argument("DDSpec: truncation_distance must be >= 1");
  }
}

std::vector<bool> default_role_swap(int mode_count) {
  if (mode_count == 3) return {false, true};
  return std::vector<bool>(static_cast<std::size_t>(concatenation_levels(mode_count)), false);
}

int concatenation_levels(int mode_count) {
  if (mode_count < 1) throw std::invalid_argument("mode_count must be >= 1");
  int levels = 0;
  while ((1 << levels) < mode_count) ++levels;
  return levels;
}

PulseSchedule synthesize_concatenated(const DDSpec& spec) {
  spec.validate();
  if (spec.mode_count < 2) return finish(single_segment(spec), spec);
  const auto plan = concatenation_plan(spec.mode_count, flags_for(spec, spec.mode_count));
  return finish(emit(plan, spec), spec);
}

PulseSchedule synthesize_protected(const DDSpec& spec) {
  spec.validate();
  std::set<int> prot(spec.protected_set.begin(), spec.protected_set.end());
  if (prot.empty()) return synthesize_concatenated(spec);
  std::vector<int> complement;
  for (int m = 0; m < spec.mode_count; ++m) {
    if (!prot.count(m)) complement.push_back(m);
  }
  if (complement.empty()) return finish(single_segment(spec), spec);

  // The DD runs over {q'} u S^c with q' = min(S) in the never-pulsed slot.
  const int virtual_modes = static_cast<int>(complement.size()) + 1;
  const auto plan = concatenation_plan(virtual_modes, flags_for(spec, virtual_modes));
  const auto counts = plan.pulse_counts();
  const auto quiet = std::find(counts.begin(), counts.end(), 0);
  if (quiet == counts.end()) {
    throw std::logic_error("concatenation left no never-pulsed mode");
  }
  const auto quiet_slot = static_cast<std::size_t>(quiet - counts.begin());
  std::vector<int> physical(static_cast<std::size_t>(virtual_modes));
  physical[quiet_slot] = *prot.begin();
  std::size_t next = 0;
  for (std::size_t v = 0; v < physical.size(); ++v) {
    if (v != quiet_slot) physical[v] = complement[next++];
  }

  PulsePlan mapped(spec.mode_count, plan.levels);
  for (std::size_t u = 0; u < plan.toggles.size(); ++u) {
    for (std::size_t v = 0; v < physical.size(); ++v) {
      if (plan.toggles[u][v]) mapped.toggles[u][static_cast<std::size_t>(physical[v])] = true;
    }
  }
  return finish(emit(mapped, spec), spec);
}

PulseSchedule synthesize_truncated(const DDSpec& spec) {
  spec.validate();
  if (!spec.truncation_distance) return synthesize_concatenated(spec);
  const int eta = *spec.truncation_distance;
  const int m = spec.mode_count;
  const int beta = concatenation_levels(eta) + 1;
  if (eta >= m || concatenation_levels(m) <= beta) return synthesize_concatenated(spec);

  // Blocks of eta consecutive modes; a ragged last block is kept short.
  std::vector<std::vector<int>> blocks;
  for (int start = 0; start < m; start += eta) {
    std::vector<int> block;
    for (int q = start; q < std::min(start + eta, m); ++q) block.push_back(q);
    blocks.push_back(std::move(block));
  }
  const auto flags = spec.level_role_swap.value_or(std::vector<bool>{});
  PulsePlan plan(m, beta);
  std::vector<int> first_level;
  const std::size_t parity = swapped(flags, 1) ? 0 : 1;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b % 2 == parity) first_level.insert(first_level.end(), blocks[b].begin(), blocks[b].end());
  }
  plan.toggle_level(1, first_level);
  split_levels(blocks, 2, beta, flags, plan);
  plan.compensate();
  return finish(emit(plan, spec), spec);
}

PulseSchedule synthesize(const DDSpec& spec) {
  if (!spec.protected_set.empty()) return synthesize_protected(spec);
  if (spec.truncation_distance) return synthesize_truncated(spec);
  return synthesize_concatenated(spec);
}

PulseSchedule repeat_schedule(const PulseSchedule& base, int repetitions) {
  if (repetitions < 1) throw std::domain_error("repeat_schedule: repetitions must be >= 1");
  if (base.shaped()) {
    return with_pulse_windows(repeat_schedule(without_pulse_windows(base), repetitions),
                              base.pulse_duration);
  }
  PulseSchedule out = base;
  out.repetitions = base.repetitions * repetitions;
  out.events.clear();
  out.events.reserve(base.events.size() * static_cast<std::size_t>(repetitions));
  for (int r = 0; r < repetitions; ++r) {
    for (const auto& e : base.events) {
      if (const auto* ev = std::get_if<Evolve>(&e)) {
        out.events.emplace_back(Evolve{ev->duration / repetitions});
      } else {
        out.events.push_back(e);
      }
    }
  }
  return out;
}

PulseSchedule with_pulse_windows(const PulseSchedule& ideal, double pulse_duration) {
  if (ideal.shaped()) throw std::invalid_argument("schedule already has pulse windows");
  if (!(pulse_duration > 0.0)) throw std::invalid_argument("pulse_duration must be > 0");
  PulseSchedule out = ideal;
  out.pulse_duration = pulse_duration;
  for (std::size_t i = 0; i < out.events.size(); ++i) {
    if (!std::holds_alternative<PhaseShift>(out.events[i])) continue;
    Evolve* before = i > 0 ? std::get_if<Evolve>(&out.events[i - 1]) : nullptr;
    if (before == nullptr || !(before->duration > pulse_duration)) {
      throw InfeasiblePulseError(
          "pulse window does not fit: free segment before pulse is not longer than T_P");
    }
    before->duration -= pulse_duration;
  }
  return out;
}

PulseSchedule without_pulse_windows(const PulseSchedule& shaped) {
  PulseSchedule out = shaped;
  if (!shaped.shaped()) return out;
  for (std::size_t i = 1; i < out.events.size(); ++i) {
    if (!std::holds_alternative<PhaseShift>(out.events[i])) continue;
    if (auto* before = std::get_if<Evolve>(&out.events[i - 1])) before->duration += shaped.pulse_duration;
  }
  out.pulse_duration = 0.0;
  return out;
}

const PairDwell& DwellReport::pair(int j, int k) const {
  if (j < k) std::swap(j, k);
  for (const auto& p : pairs) {
    if (p.j == j && p.k == k) return p;
  }
  throw std::out_of_range("pair not present in dwell report");
}

DwellReport signed_dwell_check(const PulseSchedule& schedule, const CouplingMatrix& couplings,
                               const std::vector<int>& protected_set) {
  const int m = schedule.mode_count;
  if (couplings.mode_count() != m) {
    throw std::invalid_argument("coupling matrix and schedule disagree on mode count");
  }
  DwellReport report;
  report.pulse_counts.assign(static_cast<std::size_t>(m), 0);
  std::vector<int> parity(static_cast<std::size_t>(m), 0);  // pulses so far mod 2
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < j; ++k) {
      PairRole role = PairRole::decouple;
      if (in_set(protected_set, j) && in_set(protected_set, k)) {
        role = PairRole::protect;
      } else if (couplings(j, k) == 0.0) {
        role = PairRole::ignore;
      }
      report.pairs.push_back({j, k, role, 0.0, false, false});
    }
  }
  auto accumulate = [&](double dt) {
    for (auto& p : report.pairs) {
      const bool negative = parity[static_cast<std::size_t>(p.j)] != parity[static_cast<std::size_t>(p.k)];
      p.signed_dwell += negative ? -dt : dt;
      p.sign_flipped = p.sign_flipped || (negative && dt > 0.0);
    }
  };
  double t = 0.0;
  for (const auto& e : schedule.events) {
    if (const auto* ev = std::get_if<Evolve>(&e)) {
      accumulate(ev->duration);
      t += ev->duration;
      continue;
    }
    const auto& shift = std::get<PhaseShift>(e);
    const double half = 0.5 * schedule.pulse_duration;
    accumulate(half);
    for (int q : shift.modes) {
      if (q < 0 || q >= m) throw std::out_of_range("pulse on mode outside the schedule");
      parity[static_cast<std::size_t>(q)] ^= 1;
      ++report.pulse_counts[static_cast<std::size_t>(q)];
    }
    // Coincident window halves straddle the toggle.
    for (auto& p : report.pairs) {
      const bool negative = parity[static_cast<std::size_t>(p.j)] != parity[static_cast<std::size_t>(p.k)];
      if (negative && half > 0.0) p.sign_flipped = true;
    }
    accumulate(half);
    t += schedule.pulse_duration;
  }
  report.total_time = t;
  const double tol = 1e-12 * std::max(t, 1e-300);
  bool all_ok = true;
  for (auto& p : report.pairs) {
    switch (p.role) {
      case PairRole::decouple: p.ok = std::abs(p.signed_dwell) <= tol; break;
      case PairRole::protect: p.ok = !p.sign_flipped; break;
      case PairRole::ignore: p.ok = true; break;
    }
    all_ok = all_ok && p.ok;
  }
  report.parity_ok = std::all_of(report.pulse_counts.begin(), report.pulse_counts.end(),
                                 [](int c) { return c % 2 == 0; });
  report.passed = all_ok && report.parity_ok;
  return report;
}

FeasibilityBounds feasibility_bounds(double total_time, double pulse_duration, int repetitions,
                                     int mode_count) {
  if (!(total_time > 0.0) || !(pulse_duration > 0.0)) {
    throw std::invalid_argument("feasibility_bounds needs positive T and T_P");
  }
  if (repetitions < 1) throw std::domain_error("feasibility_bounds: repetitions must be >= 1");
  FeasibilityBounds out;
  if (pulse_duration >= total_time) return out;
  const double ratio = total_time / (pulse_duration * repetitions);
  if (ratio >= 1.0) {
    const int floor_log2 = std::ilogb(ratio);
    out.max_modes = 1 << floor_log2;
    out.max_eta = floor_log2 >= 1 ? 1 << (floor_log2 - 1) : 0;
  }
  const double n_bp = std::ldexp(1.0, concatenation_levels(mode_count));
  out.max_reps = static_cast<int>(std::ceil(total_time / (n_bp * pulse_duration)));
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("schedule: bad number '" + std::string(s) + "'");
  }
  return v;
}

int parse_int(std::string_view s) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("schedule: bad integer '" + std::string(s) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string serialize_schedule(const PulseSchedule& schedule) {
  std::ostringstream out;
  out << "M " << schedule.mode_count << '\n';
  out << "T " << format_double(schedule.total_time) << '\n';
  out << "n_r " << schedule.repetitions << '\n';
  if (schedule.shaped()) {
    out << "model shaped " << format_double(schedule.pulse_duration) << '\n';
  } else {
    out << "model ideal\n";
  }
  if (schedule.nothing_to_decouple) out << "flag nothing_to_decouple\n";
  for (const auto& e : schedule.events) {
    if (const auto* ev = std::get_if<Evolve>(&e)) {
      out << "EVOLVE " << format_double(ev->duration) << '\n';
    } else {
      const auto& modes = std::get<PhaseShift>(e).modes;
      out << "PULSE ";
      for (std::size_t i = 0; i < modes.size(); ++i) out << (i ? "," : "") << modes[i];
      out << '\n';
    }
  }
  return out.str();
}

PulseSchedule parse_schedule(std::string_view text) {
  PulseSchedule s;
  bool have_m = false, have_t = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto sp = line.find(' ');
    const auto key = line.substr(0, sp);
    const auto value = sp == std::string_view::npos ? std::string_view{} : trim(line.substr(sp + 1));
    if (key == "M") {
      s.mode_count = parse_int(value);
      have_m = true;
    } else if (key == "T") {
      s.total_time = parse_double(value);
      have_t = true;
    } else if (key == "n_r") {
      s.repetitions = parse_int(value);
    } else if (key == "model") {
      if (value == "ideal") {
        s.pulse_duration = 0.0;
      } else if (value.starts_with("shaped")) {
        s.pulse_duration = parse_double(trim(value.substr(6)));
      } else {
        throw ConfigError("schedule: unknown model '" + std::string(value) + "'");
      }
    } else if (key == "flag" && value == "nothing_to_decouple") {
      s.nothing_to_decouple = true;
    } else if (key == "EVOLVE") {
      const double d = parse_double(value);
      if (!(d > 0.0)) throw ConfigError("schedule: EVOLVE duration must be > 0");
      s.events.emplace_back(Evolve{d});
    } else if (key == "PULSE") {
      PhaseShift shift;
      std::string_view rest = value;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        shift.modes.push_back(parse_int(trim(rest.substr(0, comma))));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
      }
      if (shift.modes.empty()) throw ConfigError("schedule: PULSE needs at least one mode");
      std::sort(shift.modes.begin(), shift.modes.end());
      s.events.emplace_back(std::move(shift));
    } else {
      throw ConfigError("schedule: unknown line '" + std::string(line) + "'");
    }
  }
  if (!have_m || !have_t) throw ConfigError("schedule: header needs M and T");
  for (const auto& e : s.events) {
    if (const auto* p = std::get_if<PhaseShift>(&e)) {
      for (int q : p->modes) {
        if (q < 0 || q >= s.mode_count) throw ConfigError("schedule: pulsed mode out of range");
      }
    }
  }
  return s;
}

}  // namespace phonondd
