"""Python bindings for the phonon dynamical-decoupling simulator."""

from ._phonondd import (  # noqa: F401
    ATOMIC_MASS_UNIT,
    ConfigError,
    InfeasiblePulseError,
    PropagationError,
    PulseInvalidError,
    StabilityError,
    catalog,
    coupling_rate,
    design_pulse,
    run,
    scenario_config,
    solve_strength,
    synthesize_schedule,
)
