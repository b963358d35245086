"""Synthetic measurement corpus with planted structure-property rules.

Molecules come from four families (decorated chains, branched alkanes,
substituted aromatic rings, plain ring cores) so a scaffold split has many
real groups to place.  log10 vapor pressure is linear in heavy-atom count
and a standardized temperature; log10 odor threshold is linear in carbon
count, which tracks heavy-atom count closely, so the auxiliary signal is
genuinely related to the primary one but carries much more noise.  Units
are mixed on purpose to exercise harmonization end to end, and a corruption
knob plants gross outliers in a chosen fraction of the air thresholds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chem import parse_smiles
from .chem.canon import canonical_key
from .hashutil import stable_hash64
from .preprocess import ATM_PA, MMHG_PA, MOLAR_VOLUME_L, RawRecord

VP_INTERCEPT = 6.0
VP_HEAVY_SLOPE = -0.45
VP_TEMP_SLOPE = 0.9
OP_INTERCEPT = 3.0
OP_CARBON_SLOPE = -0.4
OW_INTERCEPT = 2.0
OW_CARBON_SLOPE = -0.35
CORRUPT_SHIFT = 4.0  # log10 units, sign drawn per molecule

_VP_UNIT_FACTORS = {"pa": 1.0, "kpa": 1.0e3, "mmhg": MMHG_PA, "atm": ATM_PA}
_VP_UNITS = tuple(_VP_UNIT_FACTORS)
_OP_AIR_UNITS = ("mg/m3", "ug/m3", "ppm")

# Aromatic templates are segment lists; only bare "c" positions accept a
# substituent, so ring heteroatoms and fusion carbons stay untouched.
_AROMATIC_TEMPLATES = (
    ("c1", "c", "c", "c", "c", "c1"),       # benzene
    ("n1", "c", "c", "c", "c", "c1"),       # pyridine
    ("o1", "c", "c", "c", "c1"),            # furan
    ("s1", "c", "c", "c", "c1"),            # thiophene
    ("n1(C)", "c", "c", "c", "c1"),         # 1-methylpyrrole
)

_PLAIN_CORES = (
    "C1CC1", "C1CCC1", "C1CCCC1", "C1CCCCC1",
    "C1=CCCCC1", "C1CCOC1", "C1CCNCC1",
    "c1ccc2ccccc2c1", "c1ccc(cc1)c1ccccc1", "C1CCC2CCCCC2C1",
)

_SUBSTITUENTS = ("C", "CC", "CCC", "CC(C)C", "O", "OC", "N",
                 "F", "Cl", "Br", "CCO", "C=O")


@dataclass(frozen=True)
class SynthConfig:
    n_molecules: int = 500
    seed: int = 0
    op_coverage: float = 0.56     # fraction of molecules with an air threshold
    water_fraction: float = 0.2   # fraction of those that also get a water row
    sigma_vp: float = 0.05        # log10 Pa noise
    sigma_op: float = 0.25        # log10 threshold noise, both media
    corrupt_fraction: float = 0.0  # fraction of air thresholds shifted grossly
    t_center: float = 298.15
    t_scale: float = 30.0

    def __post_init__(self):
        if self.n_molecules < 50:
            raise ValueError("corpus needs at least 50 molecules")
        for name in ("op_coverage", "water_fraction", "corrupt_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.sigma_vp < 0 or self.sigma_op < 0:
            raise ValueError("noise levels must be nonnegative")


@dataclass(frozen=True)
class MolInfo:
    key: str
    smiles: str
    heavy_atoms: int
    carbons: int
    has_op: bool
    has_water: bool
    corrupted: bool


@dataclass
class SynthCorpus:
    records: list
    molecules: list


def _chain(rng) -> str:
    k = int(rng.integers(1, 9))
    body = "C" * k
    roll = rng.random()
    if roll < 0.35:
        return body
    if roll < 0.6:
        return body + "O"
    if roll < 0.8 and k >= 2:
        cut = int(rng.integers(1, k))
        return "C" * cut + "O" + "C" * (k - cut)
    return body + "C=O"


def _branched_fragment(rng, budget: int) -> tuple[str, int]:
    """Random alkyl tree, at most two branches per carbon."""
    used = 1
    parts = ["C"]
    for _ in range(2):
        room = budget - used
        if room >= 1 and rng.random() < 0.5:
            frag, k = _branched_fragment(rng, room)
            parts.append(f"({frag})")
            used += k
    return "".join(parts), used


def _branched(rng) -> str:
    budget = int(rng.integers(4, 10))
    smiles, _ = _branched_fragment(rng, budget)
    return smiles


def _substituted_ring(rng) -> str:
    template = _AROMATIC_TEMPLATES[int(rng.integers(0, len(_AROMATIC_TEMPLATES)))]
    open_pos = [i for i, seg in enumerate(template) if seg == "c"]
    n_subs = int(rng.integers(0, 3))
    segs = list(template)
    if n_subs:
        chosen = rng.choice(len(open_pos), size=min(n_subs, len(open_pos)),
                            replace=False)
        for slot in chosen:
            sub = _SUBSTITUENTS[int(rng.integers(0, len(_SUBSTITUENTS)))]
            segs[open_pos[int(slot)]] = f"c({sub})"
    return "".join(segs)


def _draw_smiles(rng) -> str:
    roll = rng.random()
    if roll < 0.06:
        return _chain(rng)
    if roll < 0.12:
        return _branched(rng)
    if roll < 0.67:
        return _substituted_ring(rng)
    return _PLAIN_CORES[int(rng.integers(0, len(_PLAIN_CORES)))]


def generate(cfg: SynthConfig) -> SynthCorpus:
    """Draw molecules, plant targets, and emit raw measurement records.

    Deterministic for a given config.  Molecules are deduplicated by
    canonical key; if random draws stall, ever-longer plain chains fill the
    remainder so the requested count is always reached.
    """
    rng = np.random.default_rng(stable_hash64(cfg.seed, "synth"))
    n = cfg.n_molecules
    seen: set[str] = set()
    drawn: list[tuple[str, str, object]] = []
    attempts = 0
    while len(drawn) < n and attempts < 80 * n:
        attempts += 1
        smiles = _draw_smiles(rng)
        mol = parse_smiles(smiles)
        key = canonical_key(mol)
        if key in seen:
            continue
        seen.add(key)
        drawn.append((key, smiles, mol))
    fill = 9
    while len(drawn) < n:
        smiles = "C" * fill
        fill += 1
        mol = parse_smiles(smiles)
        key = canonical_key(mol)
        if key not in seen:
            seen.add(key)
            drawn.append((key, smiles, mol))

    n_op = round(cfg.op_coverage * n)
    order = rng.permutation(n)
    op_idx = set(int(i) for i in order[:n_op])
    water_idx = set(int(i) for i in order[:round(cfg.water_fraction * n_op)])
    bad_order = rng.permutation(sorted(op_idx)) if op_idx else np.empty(0, int)
    bad_idx = set(int(i) for i in bad_order[:round(cfg.corrupt_fraction * n_op)])

    records: list[RawRecord] = []
    infos: list[MolInfo] = []
    for i, (key, smiles, mol) in enumerate(drawn):
        heavy = len(mol.atoms)
        carbons = sum(1 for a in mol.atoms if a.element == "C")
        for _ in range(int(rng.integers(1, 4))):
            t_std = float(rng.uniform(-1.5, 1.5))
            log_pa = (VP_INTERCEPT + VP_HEAVY_SLOPE * heavy
                      + VP_TEMP_SLOPE * t_std
                      + rng.normal(0.0, cfg.sigma_vp))
            unit = _VP_UNITS[int(rng.integers(0, len(_VP_UNITS)))]
            records.append(RawRecord(
                smiles, "vp", 10.0 ** log_pa / _VP_UNIT_FACTORS[unit], unit,
                temperature_k=cfg.t_center + cfg.t_scale * t_std))
        has_op = i in op_idx
        has_water = has_op and i in water_idx
        corrupted = i in bad_idx
        if has_op:
            log_mg = (OP_INTERCEPT + OP_CARBON_SLOPE * carbons
                      + rng.normal(0.0, cfg.sigma_op))
            if corrupted:
                log_mg += CORRUPT_SHIFT if rng.random() < 0.5 else -CORRUPT_SHIFT
            unit = _OP_AIR_UNITS[int(rng.integers(0, len(_OP_AIR_UNITS)))]
            mg = 10.0 ** log_mg
            if unit == "mg/m3":
                value = mg
            elif unit == "ug/m3":
                value = mg * 1000.0
            else:
                value = mg * MOLAR_VOLUME_L / mol.molar_mass()
            records.append(RawRecord(smiles, "op", value, unit, medium="air"))
            if has_water:
                log_ug = (OW_INTERCEPT + OW_CARBON_SLOPE * carbons
                          + rng.normal(0.0, cfg.sigma_op))
                records.append(RawRecord(smiles, "op", 10.0 ** log_ug, "ug/l",
                                         medium="water"))
        infos.append(MolInfo(key, smiles, heavy, carbons,
                             has_op, has_water, corrupted))
    return SynthCorpus(records, infos)
