"""Scenario physics: vapor pressure to airborne concentration, detection
probability, and composite detectability ranking.

Concentrations are mol per cubic meter.  Potency predictions arrive as
log10 of a mass concentration in the air basis (mg/m3) and are converted
with the molar mass before being compared against the gas-phase value.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .preprocess import ATM_PA

R_GAS = 8.314


class InvalidScenario(ValueError):
    """Scenario or psychometric parameters outside their domain."""


class UnitMismatch(ValueError):
    """Ranking needs air-basis potency values."""


@dataclass(frozen=True)
class Scenario:
    """Near-source release model.

    raoult mode: ideal liquid with mole fraction x, partial pressure
    x * P*.  henry mode: dissolved solute with activity a and Henry
    constant H in Pa, mole fraction in the gas phase a / H.
    """
    temperature_k: float
    p_tot_pa: float = ATM_PA
    mode: str = "raoult"
    x: float = 1.0
    activity: float = 1.0
    henry_pa: float | None = None

    def __post_init__(self):
        if self.temperature_k <= 0:
            raise InvalidScenario(f"temperature {self.temperature_k} K")
        if self.p_tot_pa <= 0:
            raise InvalidScenario(f"total pressure {self.p_tot_pa} Pa")
        if self.mode not in ("raoult", "henry"):
            raise InvalidScenario(f"mode {self.mode!r}")
        if self.mode == "raoult" and not 0.0 <= self.x <= 1.0:
            raise InvalidScenario(f"mole fraction {self.x}")
        if self.mode == "henry":
            if self.henry_pa is None or self.henry_pa <= 0:
                raise InvalidScenario("henry mode needs a positive constant")
            if self.activity < 0:
                raise InvalidScenario(f"activity {self.activity}")


def c_air(p_star_pa, scenario: Scenario):
    """Gas-phase concentration y * P_tot / (R T) in mol/m3."""
    p_star = np.asarray(p_star_pa, dtype=np.float64)
    if np.any(p_star < 0):
        raise InvalidScenario("vapor pressure must be non-negative")
    rt = R_GAS * scenario.temperature_k
    if scenario.mode == "raoult":
        out = scenario.x * p_star / rt
    else:
        # the gas fraction a/H does not involve the pure vapor pressure
        out = (scenario.activity * scenario.p_tot_pa
               / (scenario.henry_pa * rt)) * np.ones_like(p_star)
    return float(out) if np.isscalar(p_star_pa) else out


@dataclass(frozen=True)
class Psychometric:
    c50: float
    gamma: float

    def __post_init__(self):
        if self.c50 <= 0:
            raise InvalidScenario(f"C50 {self.c50}")
        if self.gamma <= 0:
            raise InvalidScenario(f"slope {self.gamma}")


def p_detect(concentration, psych: Psychometric):
    """1 / (1 + (C50/C)^gamma); zero concentration gives zero."""
    c = np.asarray(concentration, dtype=np.float64)
    if np.any(c < 0):
        raise InvalidScenario("concentration must be non-negative")
    out = np.zeros_like(c)
    pos = c > 0
    out[pos] = 1.0 / (1.0 + (psych.c50 / c[pos]) ** psych.gamma)
    return float(out) if np.isscalar(concentration) else out


@dataclass(frozen=True)
class Candidate:
    """One compound's predictions ready for ranking."""
    key: str
    molar_mass: float
    log10_vp_pa: float
    log10_op: float
    medium: str = "air"


def rank_detectability(candidates: list[Candidate], scenario: Scenario,
                       gamma: float) -> list[dict]:
    """Descending by C_air / C50 with p_detect as tie-break, then key.

    A compound can out-rank a more volatile one when its threshold is low
    enough, and vice versa: high vapor pressure with a high threshold may
    be less noticeable.
    """
    rows = []
    for cand in candidates:
        if cand.medium != "air":
            raise UnitMismatch(
                f"{cand.key}: potency basis {cand.medium!r}, need air")
        if cand.molar_mass <= 0:
            raise InvalidScenario(f"{cand.key}: molar mass {cand.molar_mass}")
        conc = c_air(10.0 ** cand.log10_vp_pa, scenario)
        c50_mg_m3 = 10.0 ** cand.log10_op
        c50_mol_m3 = c50_mg_m3 / (1000.0 * cand.molar_mass)
        psych = Psychometric(c50_mol_m3, gamma)
        rows.append({"key": cand.key,
                     "c_air_mol_m3": conc,
                     "c50_mol_m3": c50_mol_m3,
                     "ratio": conc / c50_mol_m3,
                     "p_detect": p_detect(conc, psych)})
    rows.sort(key=lambda r: (-r["ratio"], -r["p_detect"], r["key"]))
    return rows
