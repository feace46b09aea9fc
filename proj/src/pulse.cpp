#include "phonondd/pulse.hpp"

#include "phonondd/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace phonondd {

namespace {

constexpr double kBoundaryTolerance = 1e-4;
constexpr double kStrengthCeiling = 0.999;

// erf'(x)
double gauss(double x) { return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-x * x); }

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double radicand(const BValue& v, double w0) {
  return (w0 * w0 / (v.b * v.b * v.b) - v.d2b) / v.b;
}

}  // namespace

void BFunctionParams::validate() const {
  if (!(pulse_duration > 0.0)) throw std::invalid_argument("pulse_duration must be > 0");
  if (!(ramp_time > 0.0)) throw std::invalid_argument("ramp_time must be > 0");
  if (!(erf_width > 0.0)) throw std::invalid_argument("erf_width must be > 0");
  if (!(strength >= 0.0 && strength < 1.0)) {
    throw std::invalid_argument("strength must satisfy 0 <= k < 1");
  }
}

BValue b_value_unchecked(const BFunctionParams& p, double t) {
  const double s = p.erf_width;
  const double tu = p.ramp_time;
  const double rate = s / tu;
  const double x1 = (t / tu - 0.5) * s;
  const double x2 = ((t - (p.pulse_duration - tu)) / tu - 0.5) * s;
  const double half_k = 0.5 * p.strength;
  const double g1 = gauss(x1);
  const double g2 = gauss(x2);
  BValue v;
  v.b = 1.0 - half_k * (std::erf(x1) - std::erf(x2));
  v.db = -half_k * rate * (g1 - g2);
  v.d2b = -half_k * rate * rate * (-2.0 * x1 * g1 + 2.0 * x2 * g2);
  return v;
}

BValue b_value(const BFunctionParams& params, double t) {
  params.validate();
  const double slack = 1e-12 * params.pulse_duration;
  if (!(t >= -slack && t <= params.pulse_duration + slack)) {
    throw std::domain_error("b_value: t = " + fmt_double(t) + " s outside [0, T_P]");
  }
  return b_value_unchecked(params, t);
}

OmegaValue omega_of_t(const BValue& value, double w0, double t) {
  if (!(value.b > 0.0)) {
    throw PulseInvalidError("b(t) <= 0 at t = " + fmt_double(t) + " s", t);
  }
  const double r = radicand(value, w0);
  if (r < 0.0) {
    throw PulseInvalidError("negative omega^2 radicand at t = " + fmt_double(t) + " s", t);
  }
  return {std::sqrt(r), r - w0 * w0};
}

double phase_integral(const BFunctionParams& params, double w0) {
  params.validate();
  if (params.strength == 0.0) return 0.0;
  const double tp = params.pulse_duration;
  const double tu = params.ramp_time;
  std::vector<double> cuts{0.0, tp};
  for (double c : {tu, tp - tu, 0.5 * tp}) {
    if (c > 0.0 && c < tp) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  // Integrate 1/b^2 - 1 directly so the plateau-free part does not cancel.
  auto integrand = [&](double t) {
    const double b = b_value_unchecked(params, t).b;
    return 1.0 / (b * b) - 1.0;
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, cuts[i],
                                                                           cuts[i + 1], 10, 1e-9);
  }
  return w0 * total;
}

double min_radicand(const BFunctionParams& params, double w0, int grid_points) {
  params.validate();
  if (grid_points < 2) throw std::invalid_argument("min_radicand needs >= 2 grid points");
  double lowest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    const double t = params.pulse_duration * i / (grid_points - 1);
    const BValue v = b_value_unchecked(params, t);
    const double r = v.b > 0.0 ? radicand(v, w0) : -std::numeric_limits<double>::infinity();
    lowest = std::min(lowest, r / (w0 * w0));
  }
  return lowest;
}

StrengthSolution solve_strength_detailed(double tp, double tud, double sigma, double w0,
                                         double target) {
  BFunctionParams p{tp, tud, sigma, 0.0};
  p.validate();
  if (!(w0 > 0.0)) throw std::invalid_argument("secular_frequency must be > 0");
  if (!std::isfinite(target) || target < 0.0) {
    throw InfeasiblePulseError("target phase must be finite and >= 0");
  }

  auto valid = [&](double k) {
    BFunctionParams q = p;
    q.strength = k;
    return min_radicand(q, w0) >= 0.0;
  };
  auto phase = [&](double k) {
    BFunctionParams q = p;
    q.strength = k;
    return phase_integral(q, w0);
  };

  // Largest valid k: coarse scan, then bisection on the first failure.
  double k_max = kStrengthCeiling;
  double prev = 0.0;
  for (double k = 0.01; k <= kStrengthCeiling + 1e-12; k += 0.01) {
    const double kk = std::min(k, kStrengthCeiling);
    if (!valid(kk)) {
      double lo = prev, hi = kk;
      while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        (valid(mid) ? lo : hi) = mid;
      }
      k_max = lo;
      break;
    }
    prev = kk;
  }

  if (target == 0.0) return {0.0, 0.0, k_max, 0};

  double lo = 0.0, hi = k_max;
  double f_lo = -target;
  double f_hi = phase(hi) - target;
  if (f_hi < 0.0) {
    throw InfeasiblePulseError("target phase " + fmt_double(target) +
                               " rad not reachable: phase at largest valid k = " +
                               fmt_double(k_max) + " is " + fmt_double(f_hi + target) +
                               " rad; use a longer pulse duration");
  }

  std::uintmax_t max_iter = 100;
  const auto residual = [&](double kk) { return phase(kk) - target; };
  const auto stop = [](double a, double b) { return std::abs(b - a) < 1e-13; };
  const auto [a, b] = boost::math::tools::toms748_solve(residual, lo, hi, f_lo, f_hi, stop, max_iter);
  const double k = 0.5 * (a + b);
  const double f = residual(k);
  const int iterations = static_cast<int>(max_iter);
  if (std::abs(f) > 1e-6) {
    throw InfeasiblePulseError("strength solve did not converge (residual " + fmt_double(f) +
                               " rad)");
  }
  BFunctionParams sol = p;
  sol.strength = k;
  if (min_radicand(sol, w0, 20001) < 0.0) {
    throw InfeasiblePulseError("solution k = " + fmt_double(k) + " violates omega^2 >= 0");
  }
  return {k, f + target, k_max, iterations};
}

double solve_strength(double tp, double tud, double sigma, double w0, double target) {
  return solve_strength_detailed(tp, tud, sigma, w0, target).strength;
}

double ShapedPulse::omega_sq_excess_at(double t) const {
  if (t < 0.0 || t > params.pulse_duration) return 0.0;
  const BValue v = b_value_unchecked(params, t);
  return radicand(v, secular_frequency) - secular_frequency * secular_frequency;
}

ShapedPulse make_shaped_pulse(const BFunctionParams& params, double w0, double spacing) {
  params.validate();
  if (!(w0 > 0.0)) throw std::invalid_argument("secular_frequency must be > 0");
  if (!(spacing > 0.0)) throw std::invalid_argument("sample spacing must be > 0");
  ShapedPulse pulse;
  pulse.params = params;
  pulse.secular_frequency = w0;
  const auto intervals =
      static_cast<std::size_t>(std::max(1.0, std::ceil(params.pulse_duration / spacing - 1e-9)));
  pulse.samples.reserve(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) {
    const double t = params.pulse_duration * static_cast<double>(i) / static_cast<double>(intervals);
    const BValue v = b_value_unchecked(params, t);
    const OmegaValue w = omega_of_t(v, w0, t);
    pulse.samples.push_back({t, v.b, v.db, v.d2b, w.omega, w.omega_sq_excess});
  }
  const auto& first = pulse.samples.front();
  const auto& last = pulse.samples.back();
  pulse.boundary_mismatch = std::max(std::abs(first.b - 1.0), std::abs(last.b - 1.0));
  const double omega_mismatch =
      std::max(std::abs(first.omega - w0), std::abs(last.omega - w0)) / w0;
  if (pulse.boundary_mismatch > kBoundaryTolerance || omega_mismatch > kBoundaryTolerance) {
    throw PulseInvalidError("pulse does not return to b = 1, omega = w0 at its edges (|b-1| = " +
                                fmt_double(pulse.boundary_mismatch) + ")",
                            pulse.boundary_mismatch > kBoundaryTolerance ? 0.0 : last.t);
  }
  pulse.achieved_phase = phase_integral(params, w0);
  return pulse;
}

ShapedPulse design_pulse(double tp, double tud, double sigma, double w0, double target,
                         double spacing) {
  const double k = solve_strength(tp, tud, sigma, w0, target);
  return make_shaped_pulse(BFunctionParams{tp, tud, sigma, k}, w0, spacing);
}

// --- trap waveforms --------------------------------------------------------

void TrapParams::validate() const {
  if (!(rf_frequency > 0.0)) throw std::invalid_argument("rf_frequency must be > 0");
  if (!(electrode_distance > 0.0)) throw std::invalid_argument("electrode_distance must be > 0");
  if (!(axial_frequency >= 0.0)) throw std::invalid_argument("axial_frequency must be >= 0");
  if (!(charge > 0.0)) throw std::invalid_argument("charge must be > 0");
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be > 0");
  if (!std::isfinite(dc_amplitude) || !std::isfinite(rf_amplitude)) {
    throw std::invalid_argument("trap amplitudes must be finite");
  }
}

namespace {

double a_of(double u0, const TrapParams& t) {
  return 4.0 * t.charge * u0 / (t.mass * t.rf_frequency * t.rf_frequency *
                                t.electrode_distance * t.electrode_distance);
}

double q_of(double v0, const TrapParams& t) {
  return 2.0 * t.charge * v0 / (t.mass * t.rf_frequency * t.rf_frequency *
                                t.electrode_distance * t.electrode_distance);
}

// Error above (0.1, 0.9); a warning string above (0.05, 0.5).
void check_regime(double a, double q, std::size_t sample, std::vector<std::string>& warnings,
                  bool& warned) {
  if (std::abs(a) > 0.1 || std::abs(q) > 0.9) {
    throw StabilityError("Mathieu parameters out of range at sample " + std::to_string(sample) +
                         " (a = " + fmt_double(a) + ", q = " + fmt_double(q) + ")");
  }
  if (!warned && (std::abs(a) > 0.05 || std::abs(q) > 0.5)) {
    warnings.push_back("Mathieu parameters leave |a| < 0.05, |q| < 0.5 at sample " + std::to_string(sample) +
                       " (a = " + fmt_double(a) + ", q = " + fmt_double(q) + ")");
    warned = true;
  }
}

std::vector<double> omegas(const ShapedPulse& pulse) {
  std::vector<double> out;
  out.reserve(pulse.samples.size());
  for (const auto& s : pulse.samples) out.push_back(s.omega);
  return out;
}

double radial(double a, double q, const TrapParams& trap) {
  const double pseudo_sq = (a + 0.5 * q * q) * trap.rf_frequency * trap.rf_frequency / 4.0;
  const double r = pseudo_sq - 0.5 * trap.axial_frequency * trap.axial_frequency;
  if (r < 0.0) throw StabilityError("radial mode unconfined (w0a^2 < wz^2/2)");
  return std::sqrt(r);
}

}  // namespace

StabilityParams stability_params(const TrapParams& trap) {
  trap.validate();
  StabilityParams s{};
  s.a_x = a_of(trap.dc_amplitude, trap);
  s.a_y = -s.a_x;
  s.q_x = q_of(trap.rf_amplitude, trap);
  s.q_y = -s.q_x;
  const double half_rf = 0.5 * trap.rf_frequency;
  const double px = s.a_x + 0.5 * s.q_x * s.q_x;
  const double py = s.a_y + 0.5 * s.q_y * s.q_y;
  if (px < 0.0 || py < 0.0) throw StabilityError("pseudo-potential is anti-confining");
  s.pseudo_x = std::sqrt(px) * half_rf;
  s.pseudo_y = std::sqrt(py) * half_rf;
  const double wz2 = 0.5 * trap.axial_frequency * trap.axial_frequency;
  if (s.pseudo_x * s.pseudo_x < wz2 || s.pseudo_y * s.pseudo_y < wz2) {
    throw StabilityError("radial mode unconfined (w0a^2 < wz^2/2)");
  }
  s.radial_x = std::sqrt(s.pseudo_x * s.pseudo_x - wz2);
  s.radial_y = std::sqrt(s.pseudo_y * s.pseudo_y - wz2);
  return s;
}

Waveform dc_waveform(const std::vector<double>& omega, const TrapParams& trap) {
  trap.validate();
  const double q = q_of(trap.rf_amplitude, trap);
  const double rf2 = trap.rf_frequency * trap.rf_frequency;
  const double wz2 = trap.axial_frequency * trap.axial_frequency;
  const double scale = trap.mass * trap.electrode_distance * trap.electrode_distance / trap.charge;
  Waveform out;
  out.values.reserve(omega.size());
  bool warned = false;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const double w = omega[i];
    const double u0 = scale * (w * w + 0.5 * wz2 - q * q * rf2 / 8.0);
    check_regime(a_of(u0, trap), q, i, out.warnings, warned);
    out.values.push_back(u0);
  }
  return out;
}

Waveform dc_waveform(const ShapedPulse& pulse, const TrapParams& trap) {
  return dc_waveform(omegas(pulse), trap);
}

Waveform rf_waveform(const std::vector<double>& omega, const TrapParams& trap) {
  trap.validate();
  const double a = a_of(trap.dc_amplitude, trap);
  const double rf2 = trap.rf_frequency * trap.rf_frequency;
  const double wz2 = trap.axial_frequency * trap.axial_frequency;
  const double scale = std::sqrt(2.0) * trap.mass * trap.rf_frequency * trap.electrode_distance *
                       trap.electrode_distance / trap.charge;
  Waveform out;
  out.values.reserve(omega.size());
  bool warned = false;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const double w = omega[i];
    const double r = w * w + 0.5 * wz2 - a * rf2 / 4.0;
    if (r < 0.0) {
      throw InfeasiblePulseError("RF waveform radicand negative at sample " + std::to_string(i));
    }
    const double v0 = scale * std::sqrt(r);
    check_regime(a, q_of(v0, trap), i, out.warnings, warned);
    out.values.push_back(v0);
  }
  return out;
}

Waveform rf_waveform(const ShapedPulse& pulse, const TrapParams& trap) {
  return rf_waveform(omegas(pulse), trap);
}

double omega_from_dc(double dc_amplitude, const TrapParams& trap) {
  trap.validate();
  return radial(a_of(dc_amplitude, trap), q_of(trap.rf_amplitude, trap), trap);
}

double omega_from_rf(double rf_amplitude, const TrapParams& trap) {
  trap.validate();
  return radial(a_of(trap.dc_amplitude, trap), q_of(rf_amplitude, trap), trap);
}

std::string waveform_csv(const ShapedPulse& pulse, const TrapParams* trap) {
  std::vector<double> u0, v0;
  if (trap) {
    u0 = dc_waveform(pulse, *trap).values;
    v0 = rf_waveform(pulse, *trap).values;
  }
  std::ostringstream out;
  out << "t_s,b,omega_rad_s,omega_sq_excess";
  if (trap) out << ",U0_V,V0_V";
  out << '\n';
  for (std::size_t i = 0; i < pulse.samples.size(); ++i) {
    const auto& s = pulse.samples[i];
    out << fmt_double(s.t) << ',' << fmt_double(s.b) << ',' << fmt_double(s.omega) << ','
        << fmt_double(s.omega_sq_excess);
    if (trap) out << ',' << fmt_double(u0[i]) << ',' << fmt_double(v0[i]);
    out << '\n';
  }
  return out.str();
}

}  // namespace phonondd
