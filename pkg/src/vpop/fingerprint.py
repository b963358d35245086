"""Circular fingerprints and similarity diagnostics.

Radius-2 environments over 2048 bits by default.  Atom environments start
from (element, degree, charge, H count, aromatic, in-ring) and are expanded
by hashing the sorted (bond order, neighbor hash) multiset per round; every
round's hash of every atom sets one bit modulo the width.  The hash is a
fixed 64-bit mixer, so bit positions are reproducible across runs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chem.mol import Molecule
from .hashutil import hash_ints, stable_hash64

SIM_BIN_EDGES = (0.0, 0.3, 0.5, 0.7, 1.0)


class WidthMismatch(ValueError):
    """Fingerprints of different widths cannot be compared."""


class EmptyTrainSet(ValueError):
    """Similarity-to-train requires at least one train fingerprint."""


@dataclass(frozen=True)
class Fingerprint:
    bits: int
    nbits: int

    def popcount(self) -> int:
        return self.bits.bit_count()

    def to_array(self) -> np.ndarray:
        out = np.zeros(self.nbits, dtype=np.float64)
        bits = self.bits
        while bits:
            low = bits & -bits
            out[low.bit_length() - 1] = 1.0
            bits ^= low
        return out


def _initial_invariants(mol: Molecule) -> list[int]:
    invs = []
    for i, atom in enumerate(mol.atoms):
        invs.append(stable_hash64(
            (atom.element, mol.degree(i), atom.charge, atom.h_count,
             atom.aromatic, atom.in_ring)))
    return invs


def ecfp(mol: Molecule, radius: int = 2, nbits: int = 2048) -> Fingerprint:
    """Circular fingerprint; all environments of radius 0..radius set bits."""
    if radius < 0 or nbits <= 0:
        raise ValueError("radius must be >= 0 and nbits positive")
    current = _initial_invariants(mol)
    hashes = list(current)
    for r in range(1, radius + 1):
        following = []
        for i in range(len(mol.atoms)):
            nbr = sorted((bond.order.value, current[j])
                         for j, bond in mol.neighbors(i))
            flat = [r, current[i]]
            for order, h in nbr:
                flat.extend((order, h))
            following.append(hash_ints(flat))
        current = following
        hashes.extend(current)
    bits = 0
    for h in hashes:
        bits |= 1 << (h % nbits)
    return Fingerprint(bits, nbits)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """Intersection over union of set bits; two empty prints count as 1.0."""
    if a.nbits != b.nbits:
        raise WidthMismatch(f"widths differ: {a.nbits} vs {b.nbits}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union


def max_similarity_to_train(fp: Fingerprint, train: list[Fingerprint]) -> float:
    if not train:
        raise EmptyTrainSet("no train fingerprints to compare against")
    return max(tanimoto(fp, t) for t in train)


def similarity_histogram(sims) -> list[dict]:
    """Counts per bin over SIM_BIN_EDGES; the last bin includes 1.0."""
    edges = SIM_BIN_EDGES
    rows = []
    for k in range(len(edges) - 1):
        lo, hi = edges[k], edges[k + 1]
        last = k == len(edges) - 2
        n = sum(1 for s in sims if (lo <= s < hi) or (last and lo <= s <= hi))
        rows.append({"lo": lo, "hi": hi, "count": n})
    return rows


def similarity_report(train: list[Fingerprint],
                      folds: dict[str, list[Fingerprint]]) -> dict:
    """Max-similarity-to-train stats per evaluation fold.

    Returns {fold: {n, median, iqr, p95, histogram}}, JSON-ready.
    """
    report = {}
    for name, fps in folds.items():
        sims = np.array([max_similarity_to_train(fp, train) for fp in fps])
        if sims.size == 0:
            report[name] = {"n": 0, "median": None, "iqr": None,
                            "p95": None, "histogram": similarity_histogram([])}
            continue
        q1, med, q3, p95 = np.percentile(sims, [25, 50, 75, 95])
        report[name] = {
            "n": int(sims.size),
            "median": float(med),
            "iqr": float(q3 - q1),
            "p95": float(p95),
            "histogram": similarity_histogram(sims.tolist()),
        }
    return report
