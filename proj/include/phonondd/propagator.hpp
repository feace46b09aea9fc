// propagator.hpp: interaction-picture state propagation for pulse schedules.
//
// Free segments under a time-independent Hamiltonian are exact (block
// eigendecomposition). Shaped pulses are integrated with an adaptive
// embedded Runge-Kutta-Fehlberg 7(8) scheme.

#pragma once

#include "phonondd/phonon_model.hpp"
#include "phonondd/pulse.hpp"
#include "phonondd/sequence.hpp"

#include <functional>
#include <numbers>
#include <vector>

namespace phonondd {

struct PropagatorConfig {
  double tolerance = 1e-12;                    // absolute and relative local error
  double max_step = 0.0;                       // s; 0 selects pi / (20 w0)
  double secular_frequency = kTwoPi * 2.2e6;   // w0 of the interaction picture
  int record_samples = 512;                    // uniform samples over the wall time
  double leakage_threshold = 1e-6;

  void validate() const;
  double effective_max_step() const;
};

/// exp(-i H t) for a fixed real symmetric H, split into its connected blocks.
class FreeEvolution {
 public:
  explicit FreeEvolution(const SparseOperator& hamiltonian);

  std::int64_t dimension() const { return dimension_; }
  std::size_t block_count() const { return blocks_.size(); }
  void apply(Eigen::VectorXcd& psi, double duration) const;

 private:
  struct Block {
    std::vector<std::int64_t> indices;
    Eigen::MatrixXd vectors;
    Eigen::VectorXd values;
  };
  std::int64_t dimension_;
  std::vector<Block> blocks_;
};

/// exp(-i duration H) psi. Throws std::invalid_argument on a dimension mismatch
/// or a negative duration.
PhononState evolve_constant(const PhononState& state, const SparseOperator& hamiltonian,
                            double duration);

/// Multiplies each amplitude by (-1)^{sum_{j in modes} n_j}.
PhononState apply_ideal_phase(const FockSpace& space, const PhononState& state,
                              const std::vector<int>& modes);

/// Drive operators for a set of pulsed modes, summed over the modes:
/// raise2 = a^+a^+, lower2 = a a, number2 = a^+a + a a^+ (truncated products).
struct DriveOperators {
  SparseOperator raise2;
  SparseOperator lower2;
  SparseOperator number2;
};

DriveOperators drive_operators(const FockSpace& space, const std::vector<int>& modes);

/// Integrates from t_begin to t_end under H_C + (Omega^2(t - pulse_start) / 4 w0) D(t),
/// D(t) = e^{2 i w0 t} raise2 + e^{-2 i w0 t} lower2 + number2, with t the
/// absolute interaction-picture time. Throws PropagationError when the
/// step control fails or the state stops being finite.
PhononState evolve_driven(const PhononState& state, const SparseOperator& background,
                          const DriveOperators& drive,
                          const std::function<double(double)>& omega_sq_excess,
                          double pulse_start, double t_begin, double t_end,
                          const PropagatorConfig& config);

/// Propagates through one shaped pulse on `modes` starting at absolute time t_start.
PhononState evolve_shaped(const FockSpace& space, const PhononState& state,
                          const ShapedPulse& pulse, const std::vector<int>& modes,
                          const SparseOperator& background, double t_start,
                          const PropagatorConfig& config);

struct SimulationResult {
  std::vector<double> times;                    // s, wall-clock
  std::vector<Eigen::VectorXd> populations;     // |amplitude|^2 per basis state
  PhononState final_state;
  double norm_drift = 0.0;                      // max | ||psi|| - 1 |
  double boundary_leakage = 0.0;                // max population with some n_j = cutoff
  bool leakage_flagged = false;
  double wall_time = 0.0;
};

/// Executes the schedule event by event. Evolve segments use the RWA
/// hopping Hamiltonian of `couplings`; PhaseShift events are instantaneous
/// for ideal schedules and integrated through `pulse` for shaped ones.
SimulationResult run_schedule(const FockSpace& space, const PhononState& initial,
                              const PulseSchedule& schedule, const CouplingMatrix& couplings,
                              const PropagatorConfig& config,
                              const ShapedPulse* pulse = nullptr);

/// 1 - |<psi0|psi>|.
double error_overlap(const PhononState& initial, const PhononState& final_state);

/// exp(-i theta (a_j^+ a_k + a_j a_k^+)) psi0.
PhononState beam_splitter_target(const FockSpace& space, const PhononState& initial, int j, int k,
                                 double theta = std::numbers::pi / 4.0);

/// 1 - |<psi_f|psi>| with psi_f = beam_splitter_target(initial, j, k, theta).
double error_beam_splitter(const FockSpace& space, const PhononState& initial,
                           const PhononState& final_state, int j, int k,
                           double theta = std::numbers::pi / 4.0);

}  // namespace phonondd
