"""Scenario physics tests."""
import numpy as np
import pytest

from vpop.detect import (
    Candidate,
    InvalidScenario,
    Psychometric,
    R_GAS,
    Scenario,
    UnitMismatch,
    c_air,
    p_detect,
    rank_detectability,
)


def test_pure_liquid_saturated_concentration():
    s = Scenario(temperature_k=298.15)
    c = c_air(101325.0, s)
    assert c == pytest.approx(101325.0 / (8.314 * 298.15), abs=1e-9)
    assert c == pytest.approx(40.87, abs=0.01)


def test_c_air_linear_in_x_and_p_star():
    s1 = Scenario(temperature_k=300.0, x=1.0)
    s2 = Scenario(temperature_k=300.0, x=0.25)
    assert c_air(2000.0, s2) == pytest.approx(0.25 * c_air(2000.0, s1))
    assert c_air(4000.0, s1) == pytest.approx(2 * c_air(2000.0, s1))


def test_c_air_inverse_in_temperature():
    lo = c_air(5000.0, Scenario(temperature_k=250.0))
    hi = c_air(5000.0, Scenario(temperature_k=500.0))
    assert hi == pytest.approx(lo / 2)


def test_c_air_zero_pressure():
    assert c_air(0.0, Scenario(temperature_k=298.15)) == 0.0


def test_c_air_vectorized():
    s = Scenario(temperature_k=298.15)
    out = c_air(np.array([0.0, 101325.0]), s)
    assert out[0] == 0.0
    assert out[1] == pytest.approx(40.87, abs=0.01)


def test_henry_mode_ignores_p_star():
    s = Scenario(temperature_k=298.15, mode="henry", activity=1.0,
                 henry_pa=101325.0, p_tot_pa=101325.0)
    expect = 1.0 / (R_GAS * 298.15)
    assert c_air(10.0, s) == pytest.approx(expect)
    assert c_air(1e6, s) == pytest.approx(expect)


def test_scenario_validation():
    with pytest.raises(InvalidScenario):
        Scenario(temperature_k=0.0)
    with pytest.raises(InvalidScenario):
        Scenario(temperature_k=300.0, p_tot_pa=-1.0)
    with pytest.raises(InvalidScenario):
        Scenario(temperature_k=300.0, x=1.5)
    with pytest.raises(InvalidScenario):
        Scenario(temperature_k=300.0, mode="fick")
    with pytest.raises(InvalidScenario):
        Scenario(temperature_k=300.0, mode="henry")
    with pytest.raises(InvalidScenario):
        Scenario(temperature_k=300.0, mode="henry", henry_pa=-5.0)
    with pytest.raises(InvalidScenario):
        c_air(-1.0, Scenario(temperature_k=300.0))


def test_p_detect_midpoint_and_limits():
    psych = Psychometric(c50=0.02, gamma=1.7)
    assert p_detect(0.02, psych) == 0.5
    assert p_detect(0.0, psych) == 0.0
    assert p_detect(1e9, psych) > 0.999
    assert p_detect(0.04, Psychometric(0.02, 2.0)) == pytest.approx(0.8)


def test_p_detect_monotone():
    psych = Psychometric(c50=1.0, gamma=2.0)
    cs = np.linspace(0.0, 5.0, 40)
    ps = p_detect(cs, psych)
    assert (np.diff(ps) > 0).all()
    # steeper slope above the midpoint
    assert p_detect(2.0, Psychometric(1.0, 3.0)) > p_detect(
        2.0, Psychometric(1.0, 2.0))


def test_psychometric_validation():
    with pytest.raises(InvalidScenario):
        Psychometric(c50=0.0, gamma=1.0)
    with pytest.raises(InvalidScenario):
        Psychometric(c50=1.0, gamma=0.0)


def test_rank_equal_threshold_follows_pressure():
    s = Scenario(temperature_k=298.15)
    rows = rank_detectability(
        [Candidate("weak", 100.0, 2.0, 1.0),
         Candidate("strong", 100.0, 3.0, 1.0)], s, gamma=2.0)
    assert [r["key"] for r in rows] == ["strong", "weak"]
    assert rows[0]["ratio"] == pytest.approx(10 * rows[1]["ratio"])


def test_rank_ratio_can_flip_pressure_order():
    # the more volatile compound has a much duller threshold
    s = Scenario(temperature_k=298.15)
    rows = rank_detectability(
        [Candidate("volatile_dull", 100.0, 4.0, 3.0),
         Candidate("faint_potent", 100.0, 2.0, -2.0)], s, gamma=2.0)
    assert [r["key"] for r in rows] == ["faint_potent", "volatile_dull"]


def test_rank_reports_fields_and_singleton():
    s = Scenario(temperature_k=298.15)
    rows = rank_detectability([Candidate("only", 50.0, 1.0, 0.0)], s, 1.5)
    assert len(rows) == 1
    row = rows[0]
    assert set(row) == {"key", "c_air_mol_m3", "c50_mol_m3", "ratio",
                        "p_detect"}
    # 1 mg/m3 at 50 g/mol -> 2e-5 mol/m3
    assert row["c50_mol_m3"] == pytest.approx(2e-5)
    assert 0.0 < row["p_detect"] < 1.0


def test_rank_water_basis_rejected():
    s = Scenario(temperature_k=298.15)
    with pytest.raises(UnitMismatch):
        rank_detectability(
            [Candidate("aq", 100.0, 2.0, 1.0, medium="water")], s, 2.0)


def test_rank_tie_breaks_deterministic():
    s = Scenario(temperature_k=298.15)
    rows = rank_detectability(
        [Candidate("b", 100.0, 2.0, 1.0),
         Candidate("a", 100.0, 2.0, 1.0)], s, 2.0)
    assert [r["key"] for r in rows] == ["a", "b"]
