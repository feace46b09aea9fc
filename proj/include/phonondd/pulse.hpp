// pulse.hpp: trap-modulation phase-shift pulses.
//
// A pulse is parameterised by a smooth scaling function b(t) solving the
// Ermakov equation b'' + w(t)^2 b = w0^2 / b^3 with b = 1 outside [0, T_P].
// The frequency follows from b, and the phase imprinted on |n> is
// (n + 1/2) * w0 * (int_0^T_P dt / b^2 - T_P).

#pragma once

#include <string>
#include <vector>

namespace phonondd {

struct BFunctionParams {
  double pulse_duration = 0.0;  // T_P, s
  double ramp_time = 0.0;       // T_u = T_d, s
  double erf_width = 6.0;       // sigma
  double strength = 0.0;        // k, 0 <= k < 1

  void validate() const;
};

struct BValue {
  double b;
  double db;   // s^-1
  double d2b;  // s^-2
};

/// b(t) = 1 - (k/2){erf[(t/T_u - 1/2)s] - erf[((t - (T_P - T_d))/T_d - 1/2)s]}
/// with analytic derivatives. Throws std::domain_error outside [0, T_P].
BValue b_value(const BFunctionParams& params, double t);

/// Same expression without the domain check; used by integrators that may
/// probe the window edges.
BValue b_value_unchecked(const BFunctionParams& params, double t);

struct OmegaValue {
  double omega;            // rad/s
  double omega_sq_excess;  // omega^2 - w0^2, rad^2/s^2
};

/// omega = sqrt((w0^2/b^3 - b'')/b). Throws PulseInvalidError (carrying t)
/// on a negative radicand.
OmegaValue omega_of_t(const BValue& value, double secular_frequency, double t = 0.0);

/// w0 * (int_0^T_P dt / b^2 - T_P), adaptive Gauss-Kronrod, ~1e-9 relative.
double phase_integral(const BFunctionParams& params, double secular_frequency);

/// Smallest value of the omega^2 radicand on a dense grid, in units of w0^2.
double min_radicand(const BFunctionParams& params, double secular_frequency,
                    int grid_points = 4001);

struct StrengthSolution {
  double strength;
  double achieved_phase;
  double max_valid_strength;
  int iterations;
};

/// Bracketed (TOMS 748) solve for k such that phase_integral == target.
/// Throws InfeasiblePulseError when the valid range of k cannot reach it.
StrengthSolution solve_strength_detailed(double pulse_duration, double ramp_time, double erf_width,
                                         double secular_frequency, double target_phase);

double solve_strength(double pulse_duration, double ramp_time, double erf_width,
                      double secular_frequency, double target_phase);

struct PulseSample {
  double t;
  double b;
  double db;
  double d2b;
  double omega;
  double omega_sq_excess;
};

struct ShapedPulse {
  BFunctionParams params;
  double secular_frequency = 0.0;
  std::vector<PulseSample> samples;
  double achieved_phase = 0.0;
  double boundary_mismatch = 0.0;  // max(|b(0)-1|, |b(T_P)-1|)

  double duration() const { return params.pulse_duration; }
  /// Analytic Omega^2(t) for local time t, zero outside the window.
  double omega_sq_excess_at(double t) const;
};

/// Samples b, its derivatives, omega and Omega^2 on a uniform grid (spacing
/// at most `sample_spacing`, endpoints included) and validates the pulse.
ShapedPulse make_shaped_pulse(const BFunctionParams& params, double secular_frequency,
                              double sample_spacing = 1e-9);

/// Solves k for the target phase and samples the result.
ShapedPulse design_pulse(double pulse_duration, double ramp_time, double erf_width,
                         double secular_frequency, double target_phase,
                         double sample_spacing = 1e-9);

// --- Linear-trap electrode waveforms -------------------------------------

struct TrapParams {
  double rf_frequency = 0.0;        // Omega_r, rad/s
  double electrode_distance = 0.0;  // r0, m
  double axial_frequency = 0.0;     // w_z, rad/s
  double dc_amplitude = 0.0;        // U0, V
  double rf_amplitude = 0.0;        // V0, V
  double charge = 0.0;              // C
  double mass = 0.0;                // kg

  void validate() const;
};

struct StabilityParams {
  double a_x, a_y, q_x, q_y;
  double pseudo_x, pseudo_y;  // w_{0alpha} = sqrt(a + q^2/2) Omega_r / 2
  double radial_x, radial_y;  // sqrt(w_{0alpha}^2 - w_z^2/2)
};

/// Throws StabilityError when a radial mode is unconfined.
StabilityParams stability_params(const TrapParams& trap);

struct Waveform {
  std::vector<double> values;
  std::vector<std::string> warnings;
};

/// U0(t) = (m r0^2/e)(w^2 + w_z^2/2 - q^2 Omega_r^2/8) at fixed V0.
Waveform dc_waveform(const std::vector<double>& omega, const TrapParams& trap);
Waveform dc_waveform(const ShapedPulse& pulse, const TrapParams& trap);

/// V0(t) = (sqrt(2) m Omega_r r0^2/e) sqrt(w^2 + w_z^2/2 - a Omega_r^2/4) at fixed U0.
Waveform rf_waveform(const std::vector<double>& omega, const TrapParams& trap);
Waveform rf_waveform(const ShapedPulse& pulse, const TrapParams& trap);

/// Radial x secular frequency produced by DC amplitude U0 (trap's V0 fixed).
double omega_from_dc(double dc_amplitude, const TrapParams& trap);
/// Radial x secular frequency produced by RF amplitude V0 (trap's U0 fixed).
double omega_from_rf(double rf_amplitude, const TrapParams& trap);

/// Writes t_s,b,omega_rad_s,omega_sq_excess[,U0_V,V0_V].
std::string waveform_csv(const ShapedPulse& pulse, const TrapParams* trap = nullptr);

}  // namespace phonondd
