// phonon_model.hpp: ion chain couplings, truncated Fock space and the
// operators (ladder, hopping, trap modulation) acting on it.
//
// All operators are expressed in units of hbar, i.e. H/hbar in rad/s, and are
// real symmetric sparse matrices.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace phonondd {

// CODATA 2018.
struct PhysicalConstants {
  static constexpr double elementary_charge = 1.602176634e-19;     // C
  static constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
  static constexpr double atomic_mass_unit = 1.66053906660e-27;    // kg
  static constexpr double hbar = 1.054571817e-34;                  // J s
};

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// e^2 / (4 pi eps0), the Coulomb prefactor in J m.
inline constexpr double coulomb_constant() {
  return PhysicalConstants::elementary_charge * PhysicalConstants::elementary_charge /
         (4.0 * std::numbers::pi * PhysicalConstants::vacuum_permittivity);
}

struct IonChainConfig {
  int mode_count = 2;
  double ion_mass = 40.0 * PhysicalConstants::atomic_mass_unit;  // kg
  double secular_frequency = kTwoPi * 2.2e6;                     // rad/s
  std::vector<double> positions;                                 // m, strictly increasing
  std::optional<int> truncation_distance;                        // eta; nullopt = none

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

IonChainConfig equidistant_chain(int mode_count, double spacing,
                                 double ion_mass = 40.0 * PhysicalConstants::atomic_mass_unit,
                                 double secular_frequency = kTwoPi * 2.2e6,
                                 std::optional<int> truncation_distance = std::nullopt);

/// Symmetric hopping rates kappa_{j,k} in rad/s with zero diagonal.
struct CouplingMatrix {
  Eigen::MatrixXd kappa;

  int mode_count() const { return static_cast<int>(kappa.rows()); }
  double operator()(int j, int k) const { return kappa(j, k); }
};

/// e^2 / (4 pi eps0 d^3 m w0). Throws std::domain_error on non-positive input.
double coupling_rate(double spacing, double ion_mass, double secular_frequency);

CouplingMatrix build_coupling_matrix(const IonChainConfig& config);

/// Bare per-ion frequencies that make the Coulomb-shifted frequency equal w0
/// for every ion.
std::vector<double> compute_bare_frequencies(const IonChainConfig& config);

/// Occupation-number basis |n_{M-1},...,n_0> with n_j <= cutoff.
/// index = sum_j n_j (cutoff+1)^j.
class FockSpace {
 public:
  FockSpace(int mode_count, int cutoff);

  int mode_count() const { return mode_count_; }
  int cutoff() const { return cutoff_; }
  std::int64_t dimension() const { return dimension_; }
  std::int64_t stride(int mode) const { return strides_.at(static_cast<std::size_t>(mode)); }

  /// occupations[j] = n_j (mode 0 first).
  std::int64_t index(const std::vector<int>& occupations) const;
  std::vector<int> occupations(std::int64_t index) const;
  int occupation(std::int64_t index, int mode) const;
  int total_number(std::int64_t index) const;

  /// Label in the n_{M-1}...n_0 order, e.g. "210". Occupations are separated
  /// by '_' when any of them exceeds 9, e.g. "10_1".
  std::string label(std::int64_t index) const;

  bool operator==(const FockSpace& other) const {
    return mode_count_ == other.mode_count_ && cutoff_ == other.cutoff_;
  }

 private:
  int mode_count_;
  int cutoff_;
  std::int64_t dimension_;
  std::vector<std::int64_t> strides_;
};

using SparseOperator = Eigen::SparseMatrix<double>;

enum class LadderKind { lower, raise };
enum class HoppingForm { rwa, full };

SparseOperator ladder_operator(const FockSpace& space, int mode, LadderKind kind);
SparseOperator number_operator(const FockSpace& space, int mode);
SparseOperator total_number_operator(const FockSpace& space);

/// rwa:  sum_{j>k} (kappa_jk/2)(a_j^+ a_k + a_j a_k^+)
/// full: sum_{j>k} (kappa_jk/2)(a_j^+ + a_j)(a_k^+ + a_k)
SparseOperator hopping_hamiltonian(const FockSpace& space, const CouplingMatrix& couplings,
                                   HoppingForm form = HoppingForm::rwa);

/// (Omega^2 / (4 w0)) (a^+ + a)^2 on one mode.
SparseOperator modulation_hamiltonian(const FockSpace& space, int mode, double omega_sq_excess,
                                      double secular_frequency);

/// Two-mode beam-splitter generator a_j^+ a_k + a_j a_k^+ (dimensionless).
SparseOperator beam_splitter_generator(const FockSpace& space, int j, int k);

struct PhononState {
  Eigen::VectorXcd amplitudes;

  double norm() const { return amplitudes.norm(); }
  std::int64_t dimension() const { return amplitudes.size(); }
};

/// |n_{M-1},...,n_0>; `occupations` is given mode 0 first.
PhononState basis_state(const FockSpace& space, const std::vector<int>& occupations);

/// Total population in basis states with some n_j == cutoff.
double boundary_population(const FockSpace& space, const PhononState& state);

/// sum_j <n_j>.
double mean_total_number(const FockSpace& space, const PhononState& state);

}  // namespace phonondd
