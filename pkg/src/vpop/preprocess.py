"""Raw measurement records to model-ready molecule-level targets.

Vapor pressures are converted to Pa (1 mmHg = 133.322 Pa exactly,
1 atm = 101325 Pa) and kept as log10 Pa at their measurement temperature.
Odor thresholds are converted to a fixed basis per medium, mg/m3 in air and
ug/L in water, and kept as log10; gas-phase ppm/ppb use the 24.45 L/mol
molar volume (25 C, 101325 Pa) and the molecular weight.  Replicates are
aggregated by the log-space median with count and IQR retained.
Winsorization bounds and scalers are always fitted on train-fold values
only; callers apply them elsewhere.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .chem import parse_smiles
from .chem.canon import canonical_key
from .chem.mol import Molecule

MMHG_PA = 133.322
ATM_PA = 101325.0
BAR_PA = 1.0e5
MOLAR_VOLUME_L = 24.45  # L/mol at 25 C, 101325 Pa
EPS_SCALE = 1e-8

_VP_FACTORS = {"pa": 1.0, "kpa": 1.0e3, "mmhg": MMHG_PA, "atm": ATM_PA,
               "bar": BAR_PA}

# multiplicative factors to the medium basis; None marks molar-mass units
_AIR_FACTORS = {"mg/m3": 1.0, "ug/m3": 1.0e-3, "g/m3": 1.0e3,
                "ppm": None, "ppb": None}
_WATER_FACTORS = {"ug/l": 1.0, "ng/l": 1.0e-3, "mg/l": 1.0e3, "g/l": 1.0e6,
                  "ppm": 1.0e3, "ppb": 1.0}


class UnknownUnit(ValueError):
    """Unit string not in the conversion table for the endpoint/medium."""


class NonPositiveValue(ValueError):
    """Pressures and concentrations must be positive to take logs."""


class MissingMedium(ValueError):
    """Odor records need medium 'air' or 'water'."""


class TooFewSamples(ValueError):
    """Winsorization needs at least 1/alpha samples."""


class DegenerateScale(ValueError):
    """Standardization target has (near-)zero spread."""


@dataclass
class RawRecord:
    smiles: str
    endpoint: str                    # "vp" | "op"
    value: float
    unit: str
    temperature_k: float | None = None
    medium: str | None = None


def harmonize_vp(record: RawRecord) -> tuple[float, float]:
    """(temperature K, log10 Pa) for one vapor-pressure record."""
    factor = _VP_FACTORS.get(record.unit.strip().lower())
    if factor is None:
        raise UnknownUnit(f"vapor pressure unit {record.unit!r}")
    if record.value <= 0:
        raise NonPositiveValue(f"pressure {record.value} must be > 0")
    if record.temperature_k is None or record.temperature_k <= 0:
        raise ValueError("vapor-pressure record needs a positive temperature_k")
    return float(record.temperature_k), math.log10(record.value * factor)


def harmonize_op(record: RawRecord, molar_mass: float) -> float:
    """log10 threshold in the medium basis (air mg/m3, water ug/L)."""
    if record.medium not in ("air", "water"):
        raise MissingMedium(f"medium {record.medium!r}")
    if record.value <= 0:
        raise NonPositiveValue(f"threshold {record.value} must be > 0")
    unit = record.unit.strip().lower()
    if record.medium == "air":
        factor = _AIR_FACTORS.get(unit, "missing")
        if factor == "missing":
            raise UnknownUnit(f"air threshold unit {record.unit!r}")
        if factor is None:  # ppm/ppb via molar mass
            mg_per_m3 = record.value * molar_mass / MOLAR_VOLUME_L
            if unit == "ppb":
                mg_per_m3 /= 1000.0
            return math.log10(mg_per_m3)
        return math.log10(record.value * factor)
    factor = _WATER_FACTORS.get(unit)
    if factor is None:
        raise UnknownUnit(f"water threshold unit {record.unit!r}")
    return math.log10(record.value * factor)


def aggregate_duplicates(log_values) -> tuple[float, int, float]:
    """(median, n, IQR) of log-space replicate values."""
    arr = np.asarray(log_values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("nothing to aggregate")
    q1, med, q3 = np.percentile(arr, [25, 50, 75])
    return float(med), int(arr.size), float(q3 - q1)


def winsorize(train_values, alpha: float = 0.025):
    """Clip train values at the (alpha, 1-alpha) quantiles.

    Returns (clipped array, (lo, hi)).  The bounds come from the values
    passed in, so only pass train-fold targets.
    """
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must be in (0, 0.5)")
    arr = np.asarray(train_values, dtype=np.float64)
    if arr.size < 1.0 / alpha:
        raise TooFewSamples(
            f"winsorizing at alpha={alpha} needs >= {math.ceil(1 / alpha)} "
            f"samples, got {arr.size}")
    lo, hi = np.percentile(arr, [100 * alpha, 100 * (1 - alpha)])
    return np.clip(arr, lo, hi), (float(lo), float(hi))


@dataclass
class TargetScaler:
    """Affine target transform y -> (y - center) / scale, invertible."""
    kind: str  # "meanstd" | "medianmad"
    center: float
    scale: float

    def transform(self, values):
        return (np.asarray(values, dtype=np.float64) - self.center) / self.scale

    def inverse(self, values):
        return np.asarray(values, dtype=np.float64) * self.scale + self.center

    def to_dict(self) -> dict:
        return {"kind": self.kind, "center": self.center, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict) -> "TargetScaler":
        return cls(d["kind"], d["center"], d["scale"])


def fit_meanstd(train_values) -> TargetScaler:
    arr = np.asarray(train_values, dtype=np.float64)
    std = float(arr.std())
    if std < EPS_SCALE:
        raise DegenerateScale(f"target spread {std} below {EPS_SCALE}")
    return TargetScaler("meanstd", float(arr.mean()), std)


def fit_medianmad(train_values) -> TargetScaler:
    """Robust alternative; the MAD is floored at EPS_SCALE, never raises."""
    arr = np.asarray(train_values, dtype=np.float64)
    center = float(np.median(arr))
    mad = float(np.median(np.abs(arr - center)))
    return TargetScaler("medianmad", center, max(mad, EPS_SCALE))


def uncertainty_weight(sigma, alpha: float = 0.1):
    """Down-weight noisy replicates: w = alpha / (alpha + sigma)."""
    sig = np.asarray(sigma, dtype=np.float64)
    if np.any(sig < 0):
        raise ValueError("sigma must be nonnegative")
    return alpha / (alpha + sig)


@dataclass
class MoleculeRecord:
    """All targets for one canonical molecule."""
    key: str
    smiles: str
    mol: Molecule
    vp: list = field(default_factory=list)      # (T_K, log10 Pa), T ascending
    op_air: tuple | None = None                 # (log10 mg/m3, n, iqr)
    op_water: tuple | None = None               # (log10 ug/L, n, iqr)


def build_molecule_table(records: list[RawRecord]) -> dict[str, MoleculeRecord]:
    """Parse, deduplicate by canonical key and aggregate replicates.

    VP rows sharing a temperature are median-aggregated; OP rows are
    aggregated per medium.  Parse failures propagate.
    """
    mols: dict[str, MoleculeRecord] = {}
    key_cache: dict[str, str] = {}
    vp_acc: dict[tuple[str, float], list[float]] = {}
    op_acc: dict[tuple[str, str], list[float]] = {}

    for rec in records:
        if rec.smiles in key_cache:
            key = key_cache[rec.smiles]
        else:
            mol = parse_smiles(rec.smiles)
            key = canonical_key(mol)
            key_cache[rec.smiles] = key
            if key not in mols:
                mols[key] = MoleculeRecord(key, rec.smiles, mol)
        entry = mols[key]
        if rec.endpoint == "vp":
            t_k, log_pa = harmonize_vp(rec)
            vp_acc.setdefault((key, t_k), []).append(log_pa)
        elif rec.endpoint == "op":
            log_c = harmonize_op(rec, entry.mol.molar_mass())
            op_acc.setdefault((key, rec.medium), []).append(log_c)
        else:
            raise ValueError(f"unknown endpoint {rec.endpoint!r}")

    for (key, t_k), vals in vp_acc.items():
        med, _, _ = aggregate_duplicates(vals)
        mols[key].vp.append((t_k, med))
    for entry in mols.values():
        entry.vp.sort()
    for (key, medium), vals in op_acc.items():
        agg = aggregate_duplicates(vals)
        if medium == "air":
            mols[key].op_air = agg
        else:
            mols[key].op_water = agg
    return mols


RAW_CSV_HEADER = ["smiles", "endpoint", "value", "unit", "temperature_k",
                  "medium"]


def write_raw_csv(path, records: list[RawRecord]) -> None:
    """One measurement per row; None fields become empty cells."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RAW_CSV_HEADER)
        for rec in records:
            t = "" if rec.temperature_k is None else repr(float(rec.temperature_k))
            writer.writerow([rec.smiles, rec.endpoint, repr(float(rec.value)),
                             rec.unit, t, rec.medium or ""])


def read_raw_csv(path) -> list[RawRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RAW_CSV_HEADER:
            raise ValueError(f"bad header {header!r}, want {RAW_CSV_HEADER}")
        out = []
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RAW_CSV_HEADER):
                raise ValueError(f"line {i}: expected {len(RAW_CSV_HEADER)} "
                                 f"fields, got {len(row)}")
            smiles, endpoint, value, unit, t, medium = row
            out.append(RawRecord(
                smiles=smiles, endpoint=endpoint, value=float(value),
                unit=unit,
                temperature_k=float(t) if t else None,
                medium=medium or None))
    return out
