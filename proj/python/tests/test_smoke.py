import math

import pytest

import phonondd

W0 = 2 * math.pi * 2.2e6
T0 = 1 / 2.2e6


def test_coupling_rate():
    k = phonondd.coupling_rate(27.6e-6, 40 * phonondd.ATOMIC_MASS_UNIT, W0)
    assert k / (2 * math.pi) == pytest.approx(1.9e3, rel=0.01)


def test_pulse_design():
    k = phonondd.solve_strength(8.8 * T0, 4.4 * T0, 6.0, W0, math.pi)
    assert k == pytest.approx(0.0529, rel=0.02)
    pulse = phonondd.design_pulse(8.8 * T0, 4.4 * T0, sample_spacing=10e-9)
    assert len(pulse["t"]) == len(pulse["omega"])
    assert pulse["achieved_phase"] == pytest.approx(math.pi, rel=1e-8)


def test_infeasible_pulse_raises():
    with pytest.raises(phonondd.InfeasiblePulseError):
        phonondd.solve_strength(0.3e-6, 0.07e-6, 6.0, W0, 40.0)


def test_schedule_text():
    text = phonondd.synthesize_schedule(3, 1.0)
    assert text.startswith("M 3\n")
    assert text.count("PULSE") == 4


def test_catalog_and_run():
    names = phonondd.catalog()
    assert "fig1a" in names and "dd2_ideal" in names
    result = phonondd.run("dd2_ideal", n_max=6)
    assert result["error_E"] < 1e-12
    pops = result["populations"]
    assert pops.shape == (len(result["times"]), len(result["labels"]))
    assert abs(pops[-1].sum() - 1.0) < 1e-10


def test_config_errors():
    with pytest.raises(phonondd.ConfigError):
        phonondd.run("base = fig1a\nbogus = 1\n")
    with pytest.raises(phonondd.ConfigError):
        phonondd.run("no_such_scenario")
