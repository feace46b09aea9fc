#pragma once

#include <stdexcept>
#include <string>

namespace phonondd {

// b(t) produced a negative radicand in omega(t) = sqrt((w0^2/b^3 - b'')/b).
class PulseInvalidError : public std::runtime_error {
 public:
  PulseInvalidError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

// No modulation strength in the valid range reaches the requested phase.
class InfeasiblePulseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Trap voltages leave the |a| << 1, |q| << 1 regime or lose radial confinement.
class StabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PropagationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace phonondd
