#include "phonondd/propagator.hpp"

#include "phonondd/errors.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace phonondd {

namespace {

using Complex = std::complex<double>;
using OdeState = std::vector<Complex>;

void check_dimension(const PhononState& state, std::int64_t dimension) {
  if (state.dimension() != dimension) {
    throw std::invalid_argument("state dimension " + std::to_string(state.dimension()) +
                                " does not match operator dimension " +
                                std::to_string(dimension));
  }
}

std::int64_t find_root(std::vector<std::int64_t>& parent, std::int64_t i) {
  while (parent[static_cast<std::size_t>(i)] != i) {
    auto& p = parent[static_cast<std::size_t>(i)];
    p = parent[static_cast<std::size_t>(p)];
    i = p;
  }
  return i;
}

}  // namespace

void PropagatorConfig::validate() const {
  if (!(tolerance > 0.0)) throw std::invalid_argument("propagator tolerance must be > 0");
  if (!(secular_frequency > 0.0)) throw std::invalid_argument("secular_frequency must be > 0");
  if (max_step < 0.0) throw std::invalid_argument("max_step must be >= 0");
  if (max_step > std::numbers::pi / (20.0 * secular_frequency) * (1.0 + 1e-12)) {
    throw std::invalid_argument("max_step must not exceed pi / (20 w0)");
  }
  if (record_samples < 0 || record_samples == 1) {
    throw std::invalid_argument("record_samples must be 0 or >= 2");
  }
}

double PropagatorConfig::effective_max_step() const {
  return max_step > 0.0 ? max_step : std::numbers::pi / (20.0 * secular_frequency);
}

FreeEvolution::FreeEvolution(const SparseOperator& h) : dimension_(h.rows()) {
  if (h.rows() != h.cols()) throw std::invalid_argument("Hamiltonian must be square");
  std::vector<std::int64_t> parent(static_cast<std::size_t>(dimension_));
  std::iota(parent.begin(), parent.end(), std::int64_t{0});
  for (int col = 0; col < h.outerSize(); ++col) {
    for (SparseOperator::InnerIterator it(h, col); it; ++it) {
      if (it.value() == 0.0) continue;
      const auto a = find_root(parent, it.row());
      const auto b = find_root(parent, it.col());
      if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
  }
  std::vector<std::int64_t> block_of(static_cast<std::size_t>(dimension_), -1);
  for (std::int64_t i = 0; i < dimension_; ++i) {
    const auto root = find_root(parent, i);
    auto& id = block_of[static_cast<std::size_t>(root)];
    if (id < 0) {
      id = static_cast<std::int64_t>(blocks_.size());
      blocks_.emplace_back();
    }
    blocks_[static_cast<std::size_t>(id)].indices.push_back(i);
  }

  std::vector<Eigen::Index> local(static_cast<std::size_t>(dimension_));
  for (const auto& block : blocks_) {
    for (std::size_t r = 0; r < block.indices.size(); ++r) {
      local[static_cast<std::size_t>(block.indices[r])] = static_cast<Eigen::Index>(r);
    }
  }
  for (auto& block : blocks_) {
    const auto n = static_cast<Eigen::Index>(block.indices.size());
    Eigen::MatrixXd sub = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto col = block.indices[static_cast<std::size_t>(c)];
      for (SparseOperator::InnerIterator it(h, col); it; ++it) {
        sub(local[static_cast<std::size_t>(it.row())], c) = it.value();
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sub);
    if (solver.info() != Eigen::Success) {
      throw PropagationError("eigendecomposition of a Hamiltonian block failed");
    }
    block.values = solver.eigenvalues();
    block.vectors = solver.eigenvectors();
  }
}

void FreeEvolution::apply(Eigen::VectorXcd& psi, double duration) const {
  if (psi.size() != dimension_) throw std::invalid_argument("state dimension mismatch");
  if (duration < 0.0) throw std::invalid_argument("evolution duration must be >= 0");
  if (duration == 0.0) return;
  for (const auto& block : blocks_) {
    const auto n = static_cast<Eigen::Index>(block.indices.size());
    Eigen::VectorXcd x(n);
    for (Eigen::Index r = 0; r < n; ++r) x(r) = psi(block.indices[static_cast<std::size_t>(r)]);
    Eigen::VectorXcd c = block.vectors.transpose() * x;
    for (Eigen::Index r = 0; r < n; ++r) c(r) *= std::polar(1.0, -block.values(r) * duration);
    x = block.vectors * c;
    for (Eigen::Index r = 0; r < n; ++r) psi(block.indices[static_cast<std::size_t>(r)]) = x(r);
  }
}

PhononState evolve_constant(const PhononState& state, const SparseOperator& hamiltonian,
                            double duration) {
  check_dimension(state, hamiltonian.rows());
  if (duration < 0.0) throw std::invalid_argument("evolution duration must be >= 0");
  PhononState out = state;
  FreeEvolution(hamiltonian).apply(out.amplitudes, duration);
  return out;
}

PhononState apply_ideal_phase(const FockSpace& space, const PhononState& state,
                              const std::vector<int>& modes) {
  check_dimension(state, space.dimension());
  for (int m : modes) {
    if (m < 0 || m >= space.mode_count()) throw std::out_of_range("phase-shift mode out of range");
  }
  PhononState out = state;
  for (std::int64_t i = 0; i < space.dimension(); ++i) {
    int parity = 0;
    for (int m : modes) parity += space.occupation(i, m);
    if (parity % 2 != 0) out.amplitudes(i) = -out.amplitudes(i);
  }
  return out;
}

DriveOperators drive_operators(const FockSpace& space, const std::vector<int>& modes) {
  const auto dim = space.dimension();
  DriveOperators d{SparseOperator(dim, dim), SparseOperator(dim, dim), SparseOperator(dim, dim)};
  for (int m : modes) {
    const SparseOperator a = ladder_operator(space, m, LadderKind::lower);
    const SparseOperator ad = ladder_operator(space, m, LadderKind::raise);
    d.raise2 += SparseOperator(ad * ad);
    d.lower2 += SparseOperator(a * a);
    d.number2 += SparseOperator(ad * a) + SparseOperator(a * ad);
  }
  d.raise2.makeCompressed();
  d.lower2.makeCompressed();
  d.number2.makeCompressed();
  return d;
}

PhononState evolve_driven(const PhononState& state, const SparseOperator& background,
                          const DriveOperators& drive,
                          const std::function<double(double)>& omega_sq_excess,
                          double pulse_start, double t_begin, double t_end,
                          const PropagatorConfig& config) {
  config.validate();
  check_dimension(state, background.rows());
  if (t_end < t_begin) throw std::invalid_argument("evolve_driven: t_end < t_begin");
  if (t_end == t_begin) return state;
  const double w0 = config.secular_frequency;
  const auto n = state.dimension();

  Eigen::VectorXcd scratch(n);
  auto rhs = [&](const OdeState& y, OdeState& dy, double t) {
    Eigen::Map<const Eigen::VectorXcd> yv(y.data(), n);
    Eigen::Map<Eigen::VectorXcd> dv(dy.data(), n);
    dv.noalias() = background * yv;
    const double f = omega_sq_excess(t - pulse_start) / (4.0 * w0);
    if (f != 0.0) {
      const Complex rot = std::polar(1.0, 2.0 * w0 * t);
      scratch.noalias() = drive.raise2 * yv;
      dv += (f * rot) * scratch;
      scratch.noalias() = drive.lower2 * yv;
      dv += (f * std::conj(rot)) * scratch;
      scratch.noalias() = drive.number2 * yv;
      dv += f * scratch;
    }
    dv *= Complex(0.0, -1.0);
  };

  namespace odeint = boost::numeric::odeint;
  using Stepper = odeint::runge_kutta_fehlberg78<OdeState>;
  const double max_dt = config.effective_max_step();
  OdeState y(state.amplitudes.data(), state.amplitudes.data() + n);
  try {
    auto stepper = odeint::make_controlled(config.tolerance, config.tolerance, max_dt, Stepper());
    odeint::integrate_adaptive(stepper, rhs, y, t_begin, t_end, std::min(max_dt, t_end - t_begin));
  } catch (const std::exception& e) {
    throw PropagationError(std::string("shaped-pulse integration failed: ") + e.what());
  }
  PhononState out{Eigen::Map<const Eigen::VectorXcd>(y.data(), n)};
  if (!out.amplitudes.allFinite()) throw PropagationError("state became non-finite");
  return out;
}

PhononState evolve_shaped(const FockSpace& space, const PhononState& state,
                          const ShapedPulse& pulse, const std::vector<int>& modes,
                          const SparseOperator& background, double t_start,
                          const PropagatorConfig& config) {
  check_dimension(state, space.dimension());
  const DriveOperators drive = drive_operators(space, modes);
  return evolve_driven(
      state, background, drive, [&](double t) { return pulse.omega_sq_excess_at(t); }, t_start,
      t_start, t_start + pulse.duration(), config);
}

namespace {

// Walks a uniform time grid, capturing populations as the state advances.
class Recorder {
 public:
  Recorder(const FockSpace& space, double wall_time, int samples, SimulationResult& result)
      : space_(space), result_(result) {
    if (samples >= 2) {
      grid_.reserve(static_cast<std::size_t>(samples));
      for (int r = 0; r < samples; ++r) grid_.push_back(wall_time * r / (samples - 1));
    }
  }

  // Next grid time not yet recorded, or +inf.
  double next() const {
    return cursor_ < grid_.size() ? grid_[cursor_] : std::numeric_limits<double>::infinity();
  }

  void record(const Eigen::VectorXcd& psi) {
    result_.times.push_back(grid_[cursor_++]);
    result_.populations.push_back(psi.cwiseAbs2());
    observe(psi);
  }

  void observe(const Eigen::VectorXcd& psi) {
    result_.norm_drift = std::max(result_.norm_drift, std::abs(psi.norm() - 1.0));
    const PhononState view{psi};
    result_.boundary_leakage =
        std::max(result_.boundary_leakage, boundary_population(space_, view));
  }

  void flush(const Eigen::VectorXcd& psi) {
    while (cursor_ < grid_.size()) record(psi);
  }

 private:
  const FockSpace& space_;
  SimulationResult& result_;
  std::vector<double> grid_;
  std::size_t cursor_ = 0;
};

}  // namespace

SimulationResult run_schedule(const FockSpace& space, const PhononState& initial,
                              const PulseSchedule& schedule, const CouplingMatrix& couplings,
                              const PropagatorConfig& config, const ShapedPulse* pulse) {
  config.validate();
  check_dimension(initial, space.dimension());
  if (schedule.mode_count != space.mode_count() || couplings.mode_count() != space.mode_count()) {
    throw std::invalid_argument("schedule, couplings and Fock space disagree on mode count");
  }
  if (schedule.shaped()) {
    if (pulse == nullptr) throw std::invalid_argument("shaped schedule requires a pulse");
    if (std::abs(pulse->duration() - schedule.pulse_duration) >
        1e-12 * schedule.pulse_duration) {
      throw std::invalid_argument("pulse duration does not match the schedule's pulse windows");
    }
    if (std::abs(pulse->secular_frequency - config.secular_frequency) >
        1e-12 * config.secular_frequency) {
      throw std::invalid_argument("pulse and propagator disagree on w0");
    }
  }

  const SparseOperator h = hopping_hamiltonian(space, couplings, HoppingForm::rwa);
  const FreeEvolution free(h);

  SimulationResult result;
  result.wall_time = schedule.wall_time();
  Recorder recorder(space, result.wall_time, config.record_samples, result);
  Eigen::VectorXcd psi = initial.amplitudes;
  double t = 0.0;
  recorder.observe(psi);

  // Grid points falling inside (t, t_end] are recorded during the segment;
  // a point exactly at an instantaneous pulse sees the pre-pulse state.
  for (const auto& event : schedule.events) {
    if (const auto* ev = std::get_if<Evolve>(&event)) {
      const double t_end = t + ev->duration;
      while (recorder.next() <= t_end) {
        const double tr = recorder.next();
        free.apply(psi, tr - t);
        t = tr;
        recorder.record(psi);
      }
      free.apply(psi, t_end - t);
      t = t_end;
      recorder.observe(psi);
      continue;
    }
    const auto& shift = std::get<PhaseShift>(event);
    if (!schedule.shaped()) {
      psi = apply_ideal_phase(space, PhononState{psi}, shift.modes).amplitudes;
      continue;
    }
    const DriveOperators drive = drive_operators(space, shift.modes);
    const auto omega_sq = [pulse](double local) { return pulse->omega_sq_excess_at(local); };
    const double start = t;
    const double t_end = t + pulse->duration();
    while (recorder.next() <= t_end) {
      const double tr = recorder.next();
      psi = evolve_driven(PhononState{psi}, h, drive, omega_sq, start, t, tr, config).amplitudes;
      t = tr;
      recorder.record(psi);
    }
    psi = evolve_driven(PhononState{psi}, h, drive, omega_sq, start, t, t_end, config).amplitudes;
    t = t_end;
    recorder.observe(psi);
  }
  recorder.flush(psi);

  result.final_state = PhononState{psi};
  result.leakage_flagged = result.boundary_leakage > config.leakage_threshold;
  return result;
}

double error_overlap(const PhononState& initial, const PhononState& final_state) {
  check_dimension(final_state, initial.dimension());
  return 1.0 - std::abs(initial.amplitudes.dot(final_state.amplitudes));
}

PhononState beam_splitter_target(const FockSpace& space, const PhononState& initial, int j, int k,
                                 double theta) {
  check_dimension(initial, space.dimension());
  const SparseOperator g = beam_splitter_generator(space, j, k);
  if (theta >= 0.0) return evolve_constant(initial, g, theta);
  return evolve_constant(initial, SparseOperator(-g), -theta);
}

double error_beam_splitter(const FockSpace& space, const PhononState& initial,
                           const PhononState& final_state, int j, int k, double theta) {
  return error_overlap(beam_splitter_target(space, initial, j, k, theta), final_state);
}

}  // namespace phonondd
