"""SMILES reader for the organic subset plus bracket atoms.

Supported: bare organic-subset atoms (B C N O P S F Cl Br I and aromatic
b c n o p s), bracket atoms with isotope (ignored), charge, explicit H and
@/@@ (recorded as a bare chirality flag), branches, ring closures including
%nn, bond symbols - = # : / \\, and '.'-separated components with the
largest heavy-atom component retained.

Aromaticity comes from the notation (lowercase atoms, ':' bonds) plus a
normalization pass that aromatizes alternating Kekule rings; there is no
electron counting.  Implicit hydrogens follow the smallest-valence model in
mol.py.  / and \\ survive only as CIS/TRANS marks on the flanked double
bond.  Explicit-hydrogen atoms ([H]) are not supported.

All errors are SmilesError subclasses carrying the byte offset at which the
problem was detected; for errors reported at end of input the offset equals
len(smiles) or points back at the unclosed token.
"""
from __future__ import annotations

import re

from .errors import (AmbiguousComponents, SmilesError, UnbalancedBranch,
                     UnbalancedRingClosure, UnknownAtomToken)
from .mol import (AROMATIC_SYMBOLS, ATOMIC_MASS, ORGANIC_SUBSET, Atom, Bond,
                  BondOrder, BondStereo, Molecule, assign_implicit_hydrogens)
from .rings import aromatize_kekule, perceive_rings

_BRACKET_RE = re.compile(
    r"\[(?P<isotope>\d+)?"
    r"(?P<symbol>[A-Z][a-z]?|se|as|[bcnops])"
    r"(?P<chiral>@{1,2})?"
    r"(?P<hcount>H\d*)?"
    r"(?P<charge>\+\d+|-\d+|\++|-+)?"
    r"(?::\d+)?\]"
)

_BOND_CHARS = {
    "-": (BondOrder.SINGLE, None),
    "=": (BondOrder.DOUBLE, None),
    "#": (BondOrder.TRIPLE, None),
    ":": (BondOrder.AROMATIC, None),
    "/": (BondOrder.SINGLE, "up"),
    "\\": (BondOrder.SINGLE, "down"),
}

# Direction of a '/' bond written a/b: a sits below b.  '\' is the mirror.
_FLIP = {"up": "down", "down": "up"}


def _parse_bracket(s: str, pos: int, mol: Molecule) -> tuple[int, int]:
    """Parse one [...] token at pos; return (atom index, next position)."""
    m = _BRACKET_RE.match(s, pos)
    if m is None:
        raise UnknownAtomToken("malformed bracket atom", offset=pos)
    symbol = m.group("symbol")
    aromatic = symbol[0].islower()
    element = symbol.capitalize() if aromatic else symbol
    if aromatic and symbol not in AROMATIC_SYMBOLS:
        raise UnknownAtomToken(f"unknown aromatic symbol {symbol!r}", offset=pos)
    if element == "H":
        raise UnknownAtomToken("explicit hydrogen atoms are not supported", offset=pos)
    if element not in ATOMIC_MASS:
        raise UnknownAtomToken(f"unknown element {element!r}", offset=pos)

    hcount = 0
    if m.group("hcount"):
        digits = m.group("hcount")[1:]
        hcount = int(digits) if digits else 1

    charge = 0
    if m.group("charge"):
        c = m.group("charge")
        if c[0] == "+":
            charge = int(c[1:]) if c[1:].isdigit() else len(c)
        else:
            charge = -(int(c[1:]) if c[1:].isdigit() else len(c))
        charge = max(-2, min(2, charge))

    atom = Atom(element, aromatic=aromatic, charge=charge, h_count=hcount,
                chiral=bool(m.group("chiral")), explicit_h=True, offset=pos)
    return mol.add_atom(atom), m.end()


def _parse_bare_atom(s: str, pos: int, mol: Molecule) -> tuple[int, int]:
    """Parse an organic-subset atom token at pos."""
    two = s[pos:pos + 2]
    if two in ("Cl", "Br"):
        atom = Atom(two, offset=pos)
        return mol.add_atom(atom), pos + 2
    ch = s[pos]
    if ch in "BCNOPSFI":
        return mol.add_atom(Atom(ch, offset=pos)), pos + 1
    if ch in "bcnops":
        return mol.add_atom(Atom(ch.upper(), aromatic=True, offset=pos)), pos + 1
    raise UnknownAtomToken(f"unexpected character {ch!r}", offset=pos)


def _default_order(mol: Molecule, a: int, b: int) -> BondOrder:
    if mol.atoms[a].aromatic and mol.atoms[b].aromatic:
        return BondOrder.AROMATIC
    return BondOrder.SINGLE


def _add_bond(mol: Molecule, a: int, b: int, order: BondOrder | None,
              offset: int) -> int:
    if order is None:
        order = _default_order(mol, a, b)
    try:
        return mol.add_bond(a, b, order)
    except SmilesError as exc:
        raise UnbalancedRingClosure(str(exc), offset=offset)


def _resolve_cis_trans(mol: Molecule,
                       directions: list[tuple[int, int, int, str]]) -> None:
    """Stamp CIS/TRANS onto double bonds flanked by directional singles.

    directions holds (bond index, written-first atom, written-second atom,
    'up'|'down').  The side of substituent x seen from double-bond atom w is
    up when the mark was written w/x and down when written x/w; equal sides
    mean CIS, opposite sides TRANS (F/C=C/F is trans).
    """
    by_atom: dict[int, list[tuple[int, int, str]]] = {}
    for bi, first, second, direction in directions:
        by_atom.setdefault(first, []).append((bi, second, direction))
        by_atom.setdefault(second, []).append((bi, first, _FLIP[direction]))

    for bond in mol.bonds:
        if bond.order is not BondOrder.DOUBLE:
            continue
        sides = []
        for end in (bond.a, bond.b):
            mark = None
            for bi, other, direction in by_atom.get(end, ()):
                if other != bond.other(end):
                    mark = direction
                    break
            sides.append(mark)
        if sides[0] is not None and sides[1] is not None:
            bond.stereo = BondStereo.CIS if sides[0] == sides[1] else BondStereo.TRANS


def _largest_component(mol: Molecule, dot_offset: int) -> Molecule:
    comp = [-1] * len(mol.atoms)
    n_comp = 0
    for start in range(len(mol.atoms)):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = n_comp
        while stack:
            node = stack.pop()
            for nbr, _ in mol.neighbors(node):
                if comp[nbr] < 0:
                    comp[nbr] = n_comp
                    stack.append(nbr)
        n_comp += 1
    if n_comp <= 1:
        return mol
    counts = [0] * n_comp
    for c in comp:
        counts[c] += 1
    best = max(range(n_comp), key=lambda c: counts[c])
    if counts.count(counts[best]) > 1:
        raise AmbiguousComponents(
            "components tie in heavy-atom count; cannot pick a parent",
            offset=dot_offset)
    keep = [i for i in range(len(mol.atoms)) if comp[i] == best]
    return mol.copy_subgraph(keep)


def parse_smiles(smiles: str) -> Molecule:
    """Parse a SMILES string into a perceived Molecule.

    The result has implicit hydrogens assigned, ring sizes annotated,
    alternating Kekule rings aromatized and cis/trans marks resolved.
    Multi-component input keeps the largest heavy-atom component; a tie
    raises AmbiguousComponents.
    """
    mol = Molecule()
    current: int | None = None
    pending: tuple[BondOrder, str | None, int] | None = None  # order, dir, offset
    branch_stack: list[tuple[int, int]] = []  # (atom, '(' offset)
    ring_map: dict[int, tuple[int, BondOrder | None, str | None, int]] = {}
    directions: list[tuple[int, int, int, str]] = []
    first_dot = -1

    def place_atom(idx: int, offset: int) -> None:
        nonlocal current, pending
        if current is not None:
            order = pending[0] if pending else None
            direction = pending[1] if pending else None
            bi = _add_bond(mol, current, idx, order, offset)
            if direction is not None:
                directions.append((bi, current, idx, direction))
        pending = None
        current = idx

    def close_or_open_ring(number: int, offset: int) -> None:
        nonlocal current, pending
        if current is None:
            raise UnbalancedRingClosure("ring closure before any atom", offset=offset)
        order = pending[0] if pending else None
        direction = pending[1] if pending else None
        if number in ring_map:
            other, other_order, other_dir, other_off = ring_map.pop(number)
            if order is not None and other_order is not None and order != other_order:
                raise UnbalancedRingClosure(
                    "conflicting bond symbols at ring closure", offset=offset)
            final = order if order is not None else other_order
            bi = _add_bond(mol, other, current, final, offset)
            if other_dir is not None:
                directions.append((bi, other, current, other_dir))
            elif direction is not None:
                # written at the closing atom: closing atom comes first
                directions.append((bi, current, other, direction))
        else:
            ring_map[number] = (current, order, direction, offset)
        pending = None

    i, n = 0, len(smiles)
    while i < n:
        ch = smiles[i]
        if ch == "[":
            idx, nxt = _parse_bracket(smiles, i, mol)
            place_atom(idx, i)
            i = nxt
        elif ch.isalpha():
            idx, nxt = _parse_bare_atom(smiles, i, mol)
            place_atom(idx, i)
            i = nxt
        elif ch in _BOND_CHARS:
            if pending is not None:
                raise UnknownAtomToken("two bond symbols in a row", offset=i)
            if current is None:
                raise UnknownAtomToken("bond symbol before any atom", offset=i)
            order, direction = _BOND_CHARS[ch]
            pending = (order, direction, i)
            i += 1
        elif ch.isdigit():
            close_or_open_ring(int(ch), i)
            i += 1
        elif ch == "%":
            two = smiles[i + 1:i + 3]
            if len(two) != 2 or not two.isdigit():
                raise UnbalancedRingClosure("expected two digits after %", offset=i)
            close_or_open_ring(int(smiles[i + 1:i + 3]), i)
            i += 3
        elif ch == "(":
            if current is None:
                raise UnbalancedBranch("branch with no attachment atom", offset=i)
            if pending is not None:
                raise UnknownAtomToken("bond symbol before branch", offset=i)
            branch_stack.append((current, i))
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise UnbalancedBranch("unmatched ')'", offset=i)
            if pending is not None:
                raise UnknownAtomToken("dangling bond symbol before ')'", offset=i)
            current, _ = branch_stack.pop()
            i += 1
        elif ch == ".":
            if branch_stack:
                raise UnknownAtomToken("component separator inside branch", offset=i)
            if pending is not None:
                raise UnknownAtomToken("bond symbol before separator", offset=i)
            if first_dot < 0:
                first_dot = i
            current = None
            i += 1
        else:
            raise UnknownAtomToken(f"unexpected character {ch!r}", offset=i)

    if pending is not None:
        raise UnknownAtomToken("dangling bond symbol at end of input", offset=n)
    if branch_stack:
        raise UnbalancedBranch("unclosed branch", offset=branch_stack[-1][1])
    if ring_map:
        first = min(ring_map.values(), key=lambda e: e[3])
        raise UnbalancedRingClosure("unclosed ring bond", offset=first[3])
    if not mol.atoms:
        raise UnknownAtomToken("empty input", offset=0)

    _resolve_cis_trans(mol, directions)  # before stripping: indices still valid
    mol = _largest_component(mol, first_dot)
    assign_implicit_hydrogens(mol)
    perceive_rings(mol)
    aromatize_kekule(mol)
    return mol
