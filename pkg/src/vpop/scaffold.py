"""Scaffold extraction and scaffold-disjoint splitting.

The scaffold is the ring-and-linker framework: iteratively deleting
degree-1 atoms leaves rings plus the paths between them, then atoms
double- or triple-bonded to that core (a carbonyl O sitting on a ring) are
pulled back in.  Acyclic molecules prune to nothing and share the single
ACYCLIC_SCAFFOLD group.  Scaffold identity is the canonical key of the
framework subgraph with hydrogens recounted.

Splitting is greedy by capacity: groups ordered largest first (ties
shuffled by a seed-keyed hash) each go to the fold with the largest
remaining capacity, ties resolved train > val > test.  Fold files are
frozen to CSV with a content hash so a changed file fails loudly.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .chem.canon import canonical_key
from .chem.mol import BondOrder, Molecule
from .chem.rings import perceive_rings
from .hashutil import stable_hash64

FOLDS = ("train", "val", "test")
ACYCLIC_SCAFFOLD = ""


class LeakageDetected(ValueError):
    """A molecule or scaffold group spans more than one fold."""


class ChecksumMismatch(ValueError):
    """Frozen split file content does not match its recorded hash."""


class MissingKey(KeyError):
    """Frozen split lacks an expected molecule key."""


def murcko_scaffold(mol: Molecule) -> str:
    """Canonical key of the ring/linker framework, ACYCLIC_SCAFFOLD if none."""
    keep = set(range(len(mol.atoms)))
    while True:
        drop = []
        for i in keep:
            deg = sum(1 for j, _ in mol.neighbors(i) if j in keep)
            if deg <= 1:
                drop.append(i)
        if not drop:
            break
        keep.difference_update(drop)
    if not keep:
        return ACYCLIC_SCAFFOLD
    readd = set()
    for bond in mol.bonds:
        if bond.order in (BondOrder.DOUBLE, BondOrder.TRIPLE):
            if (bond.a in keep) != (bond.b in keep):
                readd.add(bond.b if bond.a in keep else bond.a)
    sub = mol.copy_subgraph(sorted(keep | readd))
    perceive_rings(sub)
    return canonical_key(sub)


def scaffold_groups(mols: dict[str, Molecule]) -> dict[str, list[str]]:
    """Map scaffold key -> sorted molecule keys."""
    groups: dict[str, list[str]] = {}
    for key in sorted(mols):
        groups.setdefault(murcko_scaffold(mols[key]), []).append(key)
    return groups


@dataclass
class FoldAssignment:
    folds: dict[str, str]  # molecule key -> fold name
    group_fold: dict[str, str] = field(default_factory=dict)

    def counts(self) -> dict[str, int]:
        out = {f: 0 for f in FOLDS}
        for fold in self.folds.values():
            out[fold] += 1
        return out

    def keys_in(self, fold: str) -> list[str]:
        return sorted(k for k, f in self.folds.items() if f == fold)

    def rows(self) -> list[tuple[str, str]]:
        return sorted(self.folds.items())


def capacity_split(groups: dict[str, list[str]],
                   ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
                   seed: int = 0) -> FoldAssignment:
    """Assign whole scaffold groups to train/val/test by remaining capacity."""
    if len(ratios) != len(FOLDS):
        raise ValueError(f"need {len(FOLDS)} ratios")
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must be positive and sum to 1")
    n = sum(len(members) for members in groups.values())
    targets = [r * n for r in ratios]

    ordered = sorted(groups,
                     key=lambda g: (-len(groups[g]), stable_hash64(seed, g)))
    counts = [0, 0, 0]
    folds: dict[str, str] = {}
    group_fold: dict[str, str] = {}
    for g in ordered:
        remaining = [targets[f] - counts[f] for f in range(len(FOLDS))]
        f = max(range(len(FOLDS)), key=lambda k: (remaining[k], -k))
        group_fold[g] = FOLDS[f]
        counts[f] += len(groups[g])
        for key in groups[g]:
            folds[key] = FOLDS[f]
    return FoldAssignment(folds, group_fold)


def verify_no_leakage(rows: list[tuple[str, str]],
                      scaffolds: dict[str, str]) -> dict:
    """Check identity and scaffold disjointness of (molecule, fold) rows.

    Raises LeakageDetected naming the first offenders; returns diagnostics
    with per-fold counts otherwise.
    """
    seen: dict[str, str] = {}
    for key, fold in rows:
        if fold not in FOLDS:
            raise ValueError(f"unknown fold {fold!r} for {key!r}")
        if key in seen and seen[key] != fold:
            raise LeakageDetected(f"molecule {key!r} appears in "
                                  f"{seen[key]!r} and {fold!r}")
        seen[key] = fold

    scaffold_folds: dict[str, set[str]] = {}
    for key, fold in seen.items():
        if key not in scaffolds:
            raise MissingKey(f"no scaffold recorded for {key!r}")
        scaffold_folds.setdefault(scaffolds[key], set()).add(fold)
    crossing = {s for s, fs in scaffold_folds.items() if len(fs) > 1}
    if crossing:
        sample = sorted(crossing)[0]
        raise LeakageDetected(
            f"{len(crossing)} scaffold group(s) span folds, e.g. {sample!r} "
            f"in {sorted(scaffold_folds[sample])}")

    counts = {f: 0 for f in FOLDS}
    for fold in seen.values():
        counts[fold] += 1
    return {"n": len(seen), "counts": counts,
            "n_scaffolds": len(scaffold_folds)}


def _payload(rows: list[tuple[str, str]]) -> str:
    lines = ["molecule_key,fold"]
    lines.extend(f"{key},{fold}" for key, fold in rows)
    return "\n".join(lines) + "\n"


def freeze_split(path, assignment: FoldAssignment) -> None:
    """Write the assignment as CSV prefixed with a sha256 content line."""
    payload = _payload(assignment.rows())
    digest = hashlib.sha256(payload.encode()).hexdigest()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# sha256:{digest}\n")
        fh.write(payload)


def load_split(path, expected_keys=None) -> FoldAssignment:
    """Read a frozen split, verifying the content hash and key coverage."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        payload = fh.read()
    if not first.startswith("# sha256:"):
        raise ChecksumMismatch("missing content hash line")
    recorded = first[len("# sha256:"):].strip()
    actual = hashlib.sha256(payload.encode()).hexdigest()
    if recorded != actual:
        raise ChecksumMismatch(f"hash {actual} != recorded {recorded}")
    lines = payload.splitlines()
    if not lines or lines[0] != "molecule_key,fold":
        raise ValueError("malformed split file header")
    folds: dict[str, str] = {}
    for line in lines[1:]:
        if not line:
            continue
        key, _, fold = line.rpartition(",")
        if fold not in FOLDS:
            raise ValueError(f"unknown fold {fold!r} in split file")
        folds[key] = fold
    if expected_keys is not None:
        missing = sorted(set(expected_keys) - set(folds))
        if missing:
            raise MissingKey(f"{len(missing)} key(s) absent from split, "
                             f"e.g. {missing[0]!r}")
    return FoldAssignment(folds)
