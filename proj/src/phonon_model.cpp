#include "phonondd/phonon_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace phonondd {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseOperator from_triplets(std::int64_t dim, const std::vector<Triplet>& triplets) {
  SparseOperator op(dim, dim);
  op.setFromTriplets(triplets.begin(), triplets.end());
  op.makeCompressed();
  return op;
}

// Exact symmetrization; a no-op when the product is already symmetric bit-for-bit.
SparseOperator symmetrized(const SparseOperator& op) {
  SparseOperator transposed = op.transpose();
  SparseOperator sym = 0.5 * (op + transposed);
  sym.prune(0.0);
  sym.makeCompressed();
  return sym;
}

void check_mode(const FockSpace& space, int mode) {
  if (mode < 0 || mode >= space.mode_count()) {
    throw std::out_of_range("mode index " + std::to_string(mode) + " out of range for " +
                            std::to_string(space.mode_count()) + " modes");
  }
}

}  // namespace

void IonChainConfig::validate() const {
  if (mode_count < 1) throw std::invalid_argument("mode_count must be >= 1");
  if (!(secular_frequency > 0.0)) throw std::invalid_argument("secular_frequency must be > 0");
  if (!(ion_mass > 0.0)) throw std::invalid_argument("ion_mass must be > 0");
  if (static_cast<int>(positions.size()) != mode_count) {
    throw std::invalid_argument("positions must list one coordinate per mode");
  }
  for (std::size_t i = 1; i < positions.size(); ++i) {
    if (!(positions[i] > positions[i - 1])) {
      throw std::invalid_argument("positions must be strictly increasing");
    }
  }
  if (truncation_distance && *truncation_distance < 1) {
    throw std::invalid_argument("truncation_distance must be >= 1");
  }
}

IonChainConfig equidistant_chain(int mode_count, double spacing, double ion_mass,
                                 double secular_frequency, std::optional<int> truncation_distance) {
  if (!(spacing > 0.0)) throw std::invalid_argument("spacing must be > 0");
  IonChainConfig config;
  config.mode_count = mode_count;
  config.ion_mass = ion_mass;
  config.secular_frequency = secular_frequency;
  config.truncation_distance = truncation_distance;
  config.positions.resize(static_cast<std::size_t>(std::max(mode_count, 0)));
  for (int j = 0; j < mode_count; ++j) config.positions[static_cast<std::size_t>(j)] = j * spacing;
  config.validate();
  return config;
}

double coupling_rate(double spacing, double ion_mass, double secular_frequency) {
  if (!(spacing > 0.0) || !(ion_mass > 0.0) || !(secular_frequency > 0.0)) {
    throw std::domain_error("coupling_rate requires positive spacing, mass and frequency");
  }
  return coulomb_constant() / (spacing * spacing * spacing * ion_mass * secular_frequency);
}

CouplingMatrix build_coupling_matrix(const IonChainConfig& config) {
  config.validate();
  const int m = config.mode_count;
  CouplingMatrix c{Eigen::MatrixXd::Zero(m, m)};
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < j; ++k) {
      if (config.truncation_distance && j - k > *config.truncation_distance) continue;
      const double d = config.positions[static_cast<std::size_t>(j)] -
                       config.positions[static_cast<std::size_t>(k)];
      const double rate = coupling_rate(d, config.ion_mass, config.secular_frequency);
      c.kappa(j, k) = rate;
      c.kappa(k, j) = rate;
    }
  }
  return c;
}

std::vector<double> compute_bare_frequencies(const IonChainConfig& config) {
  config.validate();
  std::vector<double> out;
  out.reserve(config.positions.size());
  const double w0sq = config.secular_frequency * config.secular_frequency;
  for (std::size_t j = 0; j < config.positions.size(); ++j) {
    double shift = 0.0;
    for (std::size_t k = 0; k < config.positions.size(); ++k) {
      if (k == j) continue;
      const double d = std::abs(config.positions[j] - config.positions[k]);
      shift += coulomb_constant() / (d * d * d * config.ion_mass);
    }
    out.push_back(std::sqrt(w0sq + shift));
  }
  return out;
}

FockSpace::FockSpace(int mode_count, int cutoff) : mode_count_(mode_count), cutoff_(cutoff) {
  if (mode_count < 1) throw std::invalid_argument("FockSpace needs at least one mode");
  if (cutoff < 0) throw std::invalid_argument("FockSpace cutoff must be >= 0");
  dimension_ = 1;
  strides_.reserve(static_cast<std::size_t>(mode_count));
  for (int j = 0; j < mode_count; ++j) {
    strides_.push_back(dimension_);
    if (dimension_ > std::numeric_limits<std::int32_t>::max() / (cutoff + 1)) {
      throw std::invalid_argument("FockSpace dimension too large");
    }
    dimension_ *= (cutoff + 1);
  }
}

std::int64_t FockSpace::index(const std::vector<int>& occupations) const {
  if (static_cast<int>(occupations.size()) != mode_count_) {
    throw std::invalid_argument("occupation tuple has wrong length");
  }
  std::int64_t idx = 0;
  for (int j = 0; j < mode_count_; ++j) {
    const int n = occupations[static_cast<std::size_t>(j)];
    if (n < 0 || n > cutoff_) throw std::out_of_range("occupation outside [0, cutoff]");
    idx += n * strides_[static_cast<std::size_t>(j)];
  }
  return idx;
}

std::vector<int> FockSpace::occupations(std::int64_t index) const {
  if (index < 0 || index >= dimension_) throw std::out_of_range("basis index out of range");
  std::vector<int> occ(static_cast<std::size_t>(mode_count_));
  for (int j = 0; j < mode_count_; ++j) {
    occ[static_cast<std::size_t>(j)] = static_cast<int>(index % (cutoff_ + 1));
    index /= (cutoff_ + 1);
  }
  return occ;
}

int FockSpace::occupation(std::int64_t index, int mode) const {
  return static_cast<int>((index / strides_.at(static_cast<std::size_t>(mode))) % (cutoff_ + 1));
}

int FockSpace::total_number(std::int64_t index) const {
  int total = 0;
  for (int j = 0; j < mode_count_; ++j) {
    total += static_cast<int>(index % (cutoff_ + 1));
    index /= (cutoff_ + 1);
  }
  return total;
}

std::string FockSpace::label(std::int64_t index) const {
  const auto occ = occupations(index);
  const bool wide = std::any_of(occ.begin(), occ.end(), [](int n) { return n > 9; });
  std::string out;
  for (int j = mode_count_ - 1; j >= 0; --j) {
    out += std::to_string(occ[static_cast<std::size_t>(j)]);
    if (wide && j > 0) out += '_';
  }
  return out;
}

SparseOperator ladder_operator(const FockSpace& space, int mode, LadderKind kind) {
  check_mode(space, mode);
  const std::int64_t stride = space.stride(mode);
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(space.dimension()));
  for (std::int64_t i = 0; i < space.dimension(); ++i) {
    const int n = space.occupation(i, mode);
    if (n == 0) continue;
    // a|n> = sqrt(n)|n-1>: row (lowered index), column i.
    const auto lowered = i - stride;
    if (kind == LadderKind::lower) {
      triplets.emplace_back(lowered, i, std::sqrt(static_cast<double>(n)));
    } else {
      triplets.emplace_back(i, lowered, std::sqrt(static_cast<double>(n)));
    }
  }
  return from_triplets(space.dimension(), triplets);
}

SparseOperator number_operator(const FockSpace& space, int mode) {
  check_mode(space, mode);
  std::vector<Triplet> triplets;
  for (std::int64_t i = 0; i < space.dimension(); ++i) {
    const int n = space.occupation(i, mode);
    if (n != 0) triplets.emplace_back(i, i, static_cast<double>(n));
  }
  return from_triplets(space.dimension(), triplets);
}

SparseOperator total_number_operator(const FockSpace& space) {
  std::vector<Triplet> triplets;
  for (std::int64_t i = 0; i < space.dimension(); ++i) {
    const int n = space.total_number(i);
    if (n != 0) triplets.emplace_back(i, i, static_cast<double>(n));
  }
  return from_triplets(space.dimension(), triplets);
}

SparseOperator hopping_hamiltonian(const FockSpace& space, const CouplingMatrix& couplings,
                                   HoppingForm form) {
  if (couplings.mode_count() != space.mode_count()) {
    throw std::invalid_argument("coupling matrix and Fock space disagree on mode count");
  }
  const int m = space.mode_count();
  std::vector<SparseOperator> lower;
  lower.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) lower.push_back(ladder_operator(space, j, LadderKind::lower));

  SparseOperator h(space.dimension(), space.dimension());
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < j; ++k) {
      const double half_kappa = 0.5 * couplings(j, k);
      if (half_kappa == 0.0) continue;
      const auto& aj = lower[static_cast<std::size_t>(j)];
      const auto& ak = lower[static_cast<std::size_t>(k)];
      if (form == HoppingForm::rwa) {
        SparseOperator hop = SparseOperator(aj.transpose()) * ak;
        SparseOperator hop_t = hop.transpose();
        h += half_kappa * (hop + hop_t);
      } else {
        SparseOperator xj = aj + SparseOperator(aj.transpose());
        SparseOperator xk = ak + SparseOperator(ak.transpose());
        h += half_kappa * (xj * xk);
      }
    }
  }
  return symmetrized(h);
}

SparseOperator modulation_hamiltonian(const FockSpace& space, int mode, double omega_sq_excess,
                                      double secular_frequency) {
  check_mode(space, mode);
  if (!(secular_frequency > 0.0)) throw std::invalid_argument("secular_frequency must be > 0");
  const SparseOperator a = ladder_operator(space, mode, LadderKind::lower);
  const SparseOperator x = a + SparseOperator(a.transpose());
  SparseOperator x2 = x * x;
  SparseOperator h = (omega_sq_excess / (4.0 * secular_frequency)) * x2;
  return symmetrized(h);
}

SparseOperator beam_splitter_generator(const FockSpace& space, int j, int k) {
  check_mode(space, j);
  check_mode(space, k);
  if (j == k) throw std::invalid_argument("beam splitter needs two distinct modes");
  const SparseOperator aj = ladder_operator(space, j, LadderKind::lower);
  const SparseOperator ak = ladder_operator(space, k, LadderKind::lower);
  SparseOperator hop = SparseOperator(aj.transpose()) * ak;
  SparseOperator hop_t = hop.transpose();
  return symmetrized(hop + hop_t);
}

PhononState basis_state(const FockSpace& space, const std::vector<int>& occupations) {
  PhononState state{Eigen::VectorXcd::Zero(space.dimension())};
  state.amplitudes(space.index(occupations)) = 1.0;
  return state;
}

double boundary_population(const FockSpace& space, const PhononState& state) {
  double total = 0.0;
  for (std::int64_t i = 0; i < space.dimension(); ++i) {
    bool at_edge = false;
    for (int j = 0; j < space.mode_count() && !at_edge; ++j) {
      at_edge = space.occupation(i, j) == space.cutoff();
    }
    if (at_edge) total += std::norm(state.amplitudes(i));
  }
  return total;
}

double mean_total_number(const FockSpace& space, const PhononState& state) {
  double total = 0.0;
  for (std::int64_t i = 0; i < space.dimension(); ++i) {
    total += space.total_number(i) * std::norm(state.amplitudes(i));
  }
  return total;
}

}  // namespace phonondd
