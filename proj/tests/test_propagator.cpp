#include "doctest.h"

#include "phonondd/errors.hpp"
#include "phonondd/propagator.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

using namespace phonondd;
using cd = std::complex<double>;

namespace {

constexpr double kW0 = kTwoPi * 2.2e6;
constexpr double kT0 = 1.0 / 2.2e6;
const cd kI{0.0, 1.0};

Eigen::VectorXcd dense_evolve(const SparseOperator& h, const Eigen::VectorXcd& psi, double t) {
  const Eigen::MatrixXcd hd = Eigen::MatrixXd(h).cast<cd>();
  const Eigen::MatrixXcd u = (-kI * t * hd).exp();
  return u * psi;
}

CouplingMatrix random_couplings(int modes, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  CouplingMatrix c{Eigen::MatrixXd::Zero(modes, modes)};
  for (int j = 0; j < modes; ++j)
    for (int k = 0; k < j; ++k) c.kappa(j, k) = c.kappa(k, j) = 1e4 * dist(rng);
  return c;
}

PhononState random_state(const FockSpace& space, std::mt19937& rng) {
  std::normal_distribution<double> dist;
  PhononState s{Eigen::VectorXcd(space.dimension())};
  for (auto& a : s.amplitudes) a = cd(dist(rng), dist(rng));
  s.amplitudes.normalize();
  return s;
}

}  // namespace

TEST_CASE("config validation") {
  PropagatorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.effective_max_step() == doctest::Approx(std::numbers::pi / (20 * kW0)));
  cfg.max_step = 1.01 * std::numbers::pi / (20 * kW0);
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.max_step = 0.0;
  cfg.record_samples = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.record_samples = 512;
  cfg.tolerance = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("two-mode single-excitation block: cos/sin oracle") {
  FockSpace space(2, 4);
  CouplingMatrix c{Eigen::MatrixXd::Zero(2, 2)};
  const double kappa = kTwoPi * 1.9e3;
  c.kappa(0, 1) = c.kappa(1, 0) = kappa;
  const auto h = hopping_hamiltonian(space, c);
  const auto psi0 = basis_state(space, {1, 0});
  for (double t : {0.0, 13e-6, 100e-6, 377e-6}) {
    const auto psi = evolve_constant(psi0, h, t);
    CHECK(std::abs(psi.amplitudes(space.index({1, 0})) - std::cos(kappa * t / 2)) < 1e-12);
    CHECK(std::abs(psi.amplitudes(space.index({0, 1})) - (-kI * std::sin(kappa * t / 2))) < 1e-12);
  }
}

TEST_CASE("Hong-Ou-Mandel on |1,1>") {
  FockSpace space(2, 4);
  CouplingMatrix c{Eigen::MatrixXd::Zero(2, 2)};
  const double kappa = kTwoPi * 1.9e3;
  c.kappa(0, 1) = c.kappa(1, 0) = kappa;
  const auto h = hopping_hamiltonian(space, c);
  const auto psi0 = basis_state(space, {1, 1});
  const double t = std::numbers::pi / (2 * kappa);
  const auto psi = evolve_constant(psi0, h, t);
  CHECK(std::norm(psi.amplitudes(space.index({1, 1}))) < 1e-20);
  CHECK(std::norm(psi.amplitudes(space.index({2, 0}))) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::norm(psi.amplitudes(space.index({0, 2}))) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(error_beam_splitter(space, psi0, psi, 1, 0) < 1e-12);
}

TEST_CASE("free evolution matches the dense matrix exponential") {
  std::mt19937 rng(7);
  for (int modes : {2, 3}) {
    FockSpace space(modes, 3);
    const auto c = random_couplings(modes, rng);
    for (auto form : {HoppingForm::rwa, HoppingForm::full}) {
      const auto h = hopping_hamiltonian(space, c, form);
      const auto psi0 = random_state(space, rng);
      FreeEvolution fe(h);
      if (form == HoppingForm::rwa) CHECK(fe.block_count() > 1);
      for (double t : {1e-5, 3e-4}) {
        Eigen::VectorXcd psi = psi0.amplitudes;
        fe.apply(psi, t);
        CHECK((psi - dense_evolve(h, psi0.amplitudes, t)).norm() < 1e-10);
        CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("phase conjugation flips the couplings of the pulsed mode") {
  std::mt19937 rng(11);
  FockSpace space(3, 3);
  const auto c = random_couplings(3, rng);
  auto flipped = c;
  for (int k : {0, 2}) {
    flipped.kappa(1, k) = -flipped.kappa(1, k);
    flipped.kappa(k, 1) = -flipped.kappa(k, 1);
  }
  const auto psi0 = random_state(space, rng);
  const double t = 2e-4;
  auto lhs = apply_ideal_phase(space, psi0, {1});
  lhs = evolve_constant(lhs, hopping_hamiltonian(space, c), t);
  lhs = apply_ideal_phase(space, lhs, {1});
  const auto rhs = evolve_constant(psi0, hopping_hamiltonian(space, flipped), t);
  CHECK((lhs.amplitudes - rhs.amplitudes).norm() < 1e-12);
}

TEST_CASE("RWA free evolution conserves the phonon number") {
  std::mt19937 rng(3);
  FockSpace space(3, 4);
  const auto h = hopping_hamiltonian(space, random_couplings(3, rng));
  const auto psi0 = random_state(space, rng);
  const auto psi = evolve_constant(psi0, h, 1e-3);
  CHECK(mean_total_number(space, psi) == doctest::Approx(mean_total_number(space, psi0)).epsilon(1e-12));
}

TEST_CASE("ideal two-mode DD refocuses exactly") {
  FockSpace space(2, 5);
  const auto c = build_coupling_matrix(equidistant_chain(2, 27.6e-6));
  DDSpec spec{2, std::numbers::pi / (2 * c(1, 0))};
  const auto schedule = synthesize(spec);
  const auto psi0 = basis_state(space, {1, 2});
  PropagatorConfig cfg;
  cfg.record_samples = 64;
  const auto result = run_schedule(space, psi0, schedule, c, cfg);
  CHECK(error_overlap(psi0, result.final_state) < 1e-12);
  REQUIRE(result.times.size() == 64);
  CHECK(result.times.front() == 0.0);
  CHECK(result.times.back() == doctest::Approx(spec.total_time));
  for (const auto& p : result.populations) CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(result.norm_drift < 1e-12);
  CHECK_FALSE(result.leakage_flagged);
}

TEST_CASE("driven evolution agrees with a fine staircase of exponentials") {
  FockSpace space(1, 6);
  const auto drive = drive_operators(space, {0});
  const SparseOperator background(space.dimension(), space.dimension());
  const double om2 = 0.05 * kW0 * kW0;
  const auto omega_sq = [&](double) { return om2; };
  PhononState psi0{Eigen::VectorXcd::Zero(space.dimension())};
  psi0.amplitudes(1) = std::sqrt(0.5);
  psi0.amplitudes(2) = kI * std::sqrt(0.5);
  const double t0 = 0.3e-6, t1 = 0.3e-6 + 0.5 * kT0;

  PropagatorConfig cfg;
  const auto out = evolve_driven(psi0, background, drive, omega_sq, 0.0, t0, t1, cfg);

  const Eigen::MatrixXcd up = Eigen::MatrixXd(drive.raise2).cast<cd>();
  const Eigen::MatrixXcd down = Eigen::MatrixXd(drive.lower2).cast<cd>();
  const Eigen::MatrixXcd num = Eigen::MatrixXd(drive.number2).cast<cd>();
  const int steps = 20000;
  const double dt = (t1 - t0) / steps;
  Eigen::VectorXcd psi = psi0.amplitudes;
  for (int s = 0; s < steps; ++s) {
    const double t = t0 + (s + 0.5) * dt;
    const Eigen::MatrixXcd h = om2 / (4 * kW0) *
                               (std::exp(2.0 * kI * kW0 * t) * up + std::exp(-2.0 * kI * kW0 * t) * down + num);
    psi = (-kI * dt * h).exp() * psi;
  }
  CHECK((out.amplitudes - psi).norm() < 1e-6);
  CHECK(out.norm() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("shaped pi pulse imprints (-1)^n on a single mode") {
  FockSpace space(1, 14);
  const auto pulse = design_pulse(4e-6, 4.4 * kT0, 6.0, kW0, std::numbers::pi);
  const SparseOperator background(space.dimension(), space.dimension());
  PropagatorConfig cfg;
  for (int n = 0; n <= 4; ++n) {
    const auto psi0 = basis_state(space, {n});
    const auto psi = evolve_shaped(space, psi0, pulse, {0}, background, 0.0, cfg);
    CAPTURE(n);
    CHECK(error_overlap(psi0, psi) < 1e-3);
  }
  // Relative phases on a superposition: amplitude_n / amplitude_0 = (-1)^n.
  PhononState sup{Eigen::VectorXcd::Zero(space.dimension())};
  for (int n = 0; n <= 4; ++n) sup.amplitudes(n) = 1.0;
  sup.amplitudes.normalize();
  const auto psi = evolve_shaped(space, sup, pulse, {0}, background, 0.0, cfg);
  for (int n = 1; n <= 4; ++n) {
    const cd ratio = psi.amplitudes(n) / psi.amplitudes(0);
    CHECK(std::abs(ratio - std::pow(-1.0, n)) < 0.05);
  }
  const auto ideal = apply_ideal_phase(space, sup, {0});
  const cd overlap = ideal.amplitudes.dot(psi.amplitudes);
  CHECK(1.0 - std::abs(overlap) < 1e-3);
}

TEST_CASE("shaped pulse phase follows (n + 1/2) phi for a half-pi target") {
  FockSpace space(1, 12);
  const double phi = std::numbers::pi / 2;
  const auto pulse = design_pulse(4e-6, 4.4 * kT0, 6.0, kW0, phi);
  const SparseOperator background(space.dimension(), space.dimension());
  PhononState sup{Eigen::VectorXcd::Zero(space.dimension())};
  sup.amplitudes(0) = sup.amplitudes(1) = sup.amplitudes(2) = 1.0;
  sup.amplitudes.normalize();
  const auto psi = evolve_shaped(space, sup, pulse, {0}, background, 0.0, PropagatorConfig{});
  for (int n = 1; n <= 2; ++n) {
    const cd ratio = psi.amplitudes(n) / psi.amplitudes(0);
    CHECK(std::abs(ratio - std::exp(-kI * (n * phi))) < 0.05);
  }
}

TEST_CASE("shaped two-mode DD: norm, tolerance stability, sampling") {
  FockSpace space(2, 8);
  const auto c = build_coupling_matrix(equidistant_chain(2, 27.6e-6));
  DDSpec spec{2, std::numbers::pi / (2 * c(1, 0))};
  spec.pulse_duration = 4e-6;
  const auto schedule = synthesize(spec);
  const auto pulse = design_pulse(4e-6, 4.4 * kT0, 6.0, kW0, std::numbers::pi);
  const auto psi0 = basis_state(space, {1, 2});

  PropagatorConfig coarse;
  coarse.tolerance = 1e-11;
  coarse.record_samples = 0;
  PropagatorConfig fine = coarse;
  fine.tolerance = 5e-12;
  const auto a = run_schedule(space, psi0, schedule, c, coarse, &pulse);
  const auto b = run_schedule(space, psi0, schedule, c, fine, &pulse);
  const double ea = error_overlap(psi0, a.final_state);
  const double eb = error_overlap(psi0, b.final_state);
  CHECK(ea > 0.0);
  CHECK(ea < 1e-3);
  CHECK(std::abs(ea - eb) / eb < 0.01);
  CHECK(b.norm_drift < 1e-9);
  CHECK(b.wall_time == doctest::Approx(spec.total_time).epsilon(1e-12));

  CHECK_THROWS_AS(run_schedule(space, psi0, schedule, c, coarse), std::invalid_argument);
  const auto other = design_pulse(3e-6, 3.3 * kT0, 6.0, kW0, std::numbers::pi);
  CHECK_THROWS_AS(run_schedule(space, psi0, schedule, c, coarse, &other), std::invalid_argument);
}

TEST_CASE("overlap errors") {
  FockSpace space(2, 3);
  const auto a = basis_state(space, {1, 0});
  CHECK(error_overlap(a, a) == doctest::Approx(0.0));
  CHECK(error_overlap(a, basis_state(space, {0, 1})) == doctest::Approx(1.0));
  PhononState phased{a.amplitudes * std::exp(kI * 0.7)};
  CHECK(error_overlap(a, phased) < 1e-15);
  const auto target = beam_splitter_target(space, a, 1, 0);
  CHECK(std::norm(target.amplitudes(space.index({1, 0}))) == doctest::Approx(0.5));
  CHECK(std::norm(target.amplitudes(space.index({0, 1}))) == doctest::Approx(0.5));
}
