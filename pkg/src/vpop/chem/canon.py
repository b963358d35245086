"""Canonical atom ranking and SMILES writing.

Ranks come from iterative neighborhood refinement (element, degree, charge,
hydrogen count, aromaticity and smallest ring size seeded, then neighbor
rank multisets until the partition stops splitting).  Remaining ties are
resolved by backtracking: each tied atom of the first ambiguous class is
bumped in turn, refinement re-run, and the lexicographically smallest
serialization wins.  The search is capped; molecules at the scale handled
here stay far below the cap.

The canonical key is the winning serialization itself, so it doubles as a
canonical SMILES for the supported subset.  Keys cover constitution and
aromaticity only: tetrahedral flags and cis/trans marks are dropped, so
stereoisomers share a key.
"""
from __future__ import annotations

import heapq

from .mol import (ORGANIC_SUBSET, Atom, Bond, BondOrder, Molecule,
                  implied_h_count)

_SEARCH_CAP = 2000  # leaf serializations per molecule


def _dense_ranks(keys: list) -> list[int]:
    ordered = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [ordered[k] for k in keys]


def _initial_keys(mol: Molecule) -> list[tuple]:
    keys = []
    for i, atom in enumerate(mol.atoms):
        min_ring = min(atom.ring_sizes) if atom.ring_sizes else 0
        keys.append((atom.element, mol.degree(i), atom.charge, atom.h_count,
                     atom.aromatic, min_ring))
    return keys


def _refine(mol: Molecule, ranks: list[int]) -> list[int]:
    n = len(mol.atoms)
    for _ in range(n):
        sigs = []
        for i in range(n):
            nbr = sorted((bond.order.value, ranks[j]) for j, bond in mol.neighbors(i))
            sigs.append((ranks[i], tuple(nbr)))
        new = _dense_ranks(sigs)
        if new == ranks:
            return ranks
        ranks = new
    return ranks


def _first_ambiguous_class(ranks: list[int]) -> list[int] | None:
    members: dict[int, list[int]] = {}
    for i, r in enumerate(ranks):
        members.setdefault(r, []).append(i)
    for r in sorted(members):
        if len(members[r]) > 1:
            return members[r]
    return None


def canonical_ranks(mol: Molecule) -> list[int]:
    """Canonical priority per atom (0 = root); ties broken by min string."""
    _, ranks = _canonical_string_and_ranks(mol)
    return ranks


def canonical_key(mol: Molecule) -> str:
    """Canonical serialization; equal for isomorphic parses, stereo-blind."""
    key, _ = _canonical_string_and_ranks(mol)
    return key


def _canonical_string_and_ranks(mol: Molecule) -> tuple[str, list[int]]:
    if not mol.atoms:
        return "", []
    base = _refine(mol, _dense_ranks(_initial_keys(mol)))
    best: list = [None, None]  # string, ranks
    budget = [_SEARCH_CAP]

    def descend(ranks: list[int]) -> None:
        tied = _first_ambiguous_class(ranks)
        if tied is None:
            s = write_smiles(mol, ranks)
            if best[0] is None or s < best[0]:
                best[0], best[1] = s, ranks
            return
        for a in tied:
            if budget[0] <= 0 and best[0] is not None:
                return
            budget[0] -= 1
            keys = [(ranks[i], 1 if (ranks[i] == ranks[a] and i != a) else 0)
                    for i in range(len(ranks))]
            descend(_refine(mol, _dense_ranks(keys)))

    descend(base)
    return best[0], best[1]


def _charge_suffix(charge: int) -> str:
    if charge == 0:
        return ""
    sign = "+" if charge > 0 else "-"
    mag = abs(charge)
    return sign if mag == 1 else f"{sign}{mag}"


def _atom_token(mol: Molecule, i: int) -> str:
    atom = mol.atoms[i]
    el = atom.element
    writable_bare = el in ORGANIC_SUBSET and \
        (not atom.aromatic or el.lower() in {"b", "c", "n", "o", "p", "s"})
    if writable_bare and atom.charge == 0 and implied_h_count(mol, i) == atom.h_count:
        return el.lower() if atom.aromatic else el
    sym = el.lower() if atom.aromatic else el
    if atom.h_count == 0:
        h = ""
    elif atom.h_count == 1:
        h = "H"
    else:
        h = f"H{atom.h_count}"
    return f"[{sym}{h}{_charge_suffix(atom.charge)}]"


def _bond_symbol(mol: Molecule, bond: Bond) -> str:
    both_aromatic = mol.atoms[bond.a].aromatic and mol.atoms[bond.b].aromatic
    if bond.order is BondOrder.SINGLE:
        return "-" if both_aromatic else ""
    if bond.order is BondOrder.DOUBLE:
        return "="
    if bond.order is BondOrder.TRIPLE:
        return "#"
    return "" if both_aromatic else ":"


def write_smiles(mol: Molecule, priorities: list[int] | None = None) -> str:
    """Serialize a connected molecule, visiting atoms by ascending priority.

    With priorities omitted, input order is used.  Chirality and cis/trans
    marks are not written.  Any priority list yields a string that reparses
    to an isomorphic molecule, which is what the re-rooting tests exercise.
    """
    n = len(mol.atoms)
    if n == 0:
        return ""
    if priorities is None:
        priorities = list(range(n))
    root = min(range(n), key=lambda i: priorities[i])

    children: dict[int, list[int]] = {i: [] for i in range(n)}
    back_at: dict[int, list[Bond]] = {i: [] for i in range(n)}
    visited = [False] * n
    used_bonds: set[int] = set()
    bond_index = {id(b): k for k, b in enumerate(mol.bonds)}

    stack = [root]
    visited[root] = True
    while stack:
        node = stack.pop()
        nbrs = sorted((j for j, _ in mol.neighbors(node)), key=lambda j: priorities[j])
        for j in nbrs:
            bond = mol.bond_between(node, j)
            bi = bond_index[id(bond)]
            if bi in used_bonds:
                continue
            used_bonds.add(bi)
            if visited[j]:
                back_at[node].append(bond)
                back_at[j].append(bond)
            else:
                visited[j] = True
                children[node].append(j)
                stack.append(j)
    if not all(visited):
        raise ValueError("write_smiles requires a connected molecule")

    digit_pool: list[int] = list(range(1, 100))
    heapq.heapify(digit_pool)
    bond_digit: dict[int, int] = {}

    def ring_tokens(i: int) -> str:
        out = []
        for bond in back_at[i]:
            bi = bond_index[id(bond)]
            sym = _bond_symbol(mol, bond)
            if bi not in bond_digit:
                d = heapq.heappop(digit_pool)
                bond_digit[bi] = d
            else:
                d = bond_digit.pop(bi)
                heapq.heappush(digit_pool, d)
            out.append(sym + (str(d) if d < 10 else f"%{d:02d}"))
        return "".join(out)

    def emit(i: int) -> str:
        parts = [_atom_token(mol, i), ring_tokens(i)]
        kids = children[i]
        for k, j in enumerate(kids):
            bond = mol.bond_between(i, j)
            piece = _bond_symbol(mol, bond) + emit(j)
            if k < len(kids) - 1:
                parts.append(f"({piece})")
            else:
                parts.append(piece)
        return "".join(parts)

    return emit(root)
