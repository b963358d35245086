"""Molecular graph model: atoms, bonds, valence and perception helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import SmilesError, ValenceViolation


class BondOrder(Enum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4


class BondStereo(Enum):
    NONE = 0
    ANY = 1
    Z = 2
    E = 3
    CIS = 4
    TRANS = 5


ORGANIC_SUBSET = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}

# Lowercase symbols accepted as aromatic, bare or bracketed.
AROMATIC_SYMBOLS = {"b", "c", "n", "o", "p", "s", "se", "as"}

# Aromatic atoms of these elements contribute one pi bond to the ring, which
# costs one unit of valence on top of the sigma framework; O/S/Se donate a
# lone pair instead and get no such increment.
PI_CONTRIBUTORS = {"B", "C", "N", "P", "As"}

# Allowed valences, smallest first.  Implicit hydrogens fill up to the
# smallest valence that covers the bond-order sum.
VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

ATOMIC_MASS = {
    "H": 1.008, "Li": 6.94, "Be": 9.012, "B": 10.81, "C": 12.011,
    "N": 14.007, "O": 15.999, "F": 18.998, "Na": 22.990, "Mg": 24.305,
    "Al": 26.982, "Si": 28.085, "P": 30.974, "S": 32.06, "Cl": 35.45,
    "K": 39.098, "Ca": 40.078, "Ti": 47.867, "Cr": 51.996, "Mn": 54.938,
    "Fe": 55.845, "Co": 58.933, "Ni": 58.693, "Cu": 63.546, "Zn": 65.38,
    "Ga": 69.723, "Ge": 72.630, "As": 74.922, "Se": 78.971, "Br": 79.904,
    "Rb": 85.468, "Sr": 87.62, "Ag": 107.868, "Cd": 112.414, "In": 114.818,
    "Sn": 118.710, "Sb": 121.760, "Te": 127.60, "I": 126.904, "Ba": 137.327,
    "Hg": 200.592, "Pb": 207.2,
}

# Rings larger than this are not perceived.
MAX_RING_SIZE = 12

H_MASS = ATOMIC_MASS["H"]


@dataclass
class Atom:
    element: str
    aromatic: bool = False
    charge: int = 0
    h_count: int = 0
    chiral: bool = False
    explicit_h: bool = False  # h_count was fixed by a bracket token
    offset: int = -1          # byte offset of the source token, -1 if synthetic
    ring_sizes: tuple[int, ...] = ()

    @property
    def in_ring(self) -> bool:
        return bool(self.ring_sizes)


@dataclass
class Bond:
    a: int
    b: int
    order: BondOrder
    stereo: BondStereo = BondStereo.NONE
    ring_sizes: tuple[int, ...] = ()

    def other(self, i: int) -> int:
        if i == self.a:
            return self.b
        if i == self.b:
            return self.a
        raise ValueError(f"atom {i} not on bond {self.a}-{self.b}")

    @property
    def in_ring(self) -> bool:
        return bool(self.ring_sizes)


class Molecule:
    """Undirected molecular graph with at most one bond per atom pair."""

    def __init__(self) -> None:
        self.atoms: list[Atom] = []
        self.bonds: list[Bond] = []
        self._adj: list[list[int]] = []  # atom index -> incident bond indices
        self.rings: list[tuple[int, ...]] = []  # perceived cycles, atom order

    def add_atom(self, atom: Atom) -> int:
        self.atoms.append(atom)
        self._adj.append([])
        return len(self.atoms) - 1

    def add_bond(self, a: int, b: int, order: BondOrder,
                 stereo: BondStereo = BondStereo.NONE) -> int:
        if a == b:
            raise SmilesError("bond endpoints must be distinct")
        if self.bond_between(a, b) is not None:
            raise SmilesError(f"duplicate bond between atoms {a} and {b}")
        self.bonds.append(Bond(a, b, order, stereo))
        idx = len(self.bonds) - 1
        self._adj[a].append(idx)
        self._adj[b].append(idx)
        return idx

    def bond_between(self, a: int, b: int) -> Bond | None:
        for bi in self._adj[a]:
            bond = self.bonds[bi]
            if bond.other(a) == b:
                return bond
        return None

    def neighbors(self, i: int):
        """Yield (neighbor index, bond) pairs."""
        for bi in self._adj[i]:
            bond = self.bonds[bi]
            yield bond.other(i), bond

    def incident_bonds(self, i: int):
        return [self.bonds[bi] for bi in self._adj[i]]

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def heavy_atom_count(self) -> int:
        return len(self.atoms)

    def molar_mass(self) -> float:
        """Molecular weight in g/mol, implicit hydrogens included."""
        total = 0.0
        for atom in self.atoms:
            try:
                total += ATOMIC_MASS[atom.element]
            except KeyError:
                raise ValueError(f"no atomic mass for element {atom.element!r}")
            total += atom.h_count * H_MASS
        return total

    def copy_subgraph(self, keep: list[int]) -> "Molecule":
        """Induced subgraph on `keep` (original order preserved).

        Implicit hydrogen counts of non-bracket atoms are recomputed from the
        remaining bonds; ring perception is re-run by the caller.
        """
        sub = Molecule()
        remap = {old: new for new, old in enumerate(keep)}
        for old in keep:
            a = self.atoms[old]
            sub.add_atom(Atom(a.element, a.aromatic, a.charge, a.h_count,
                              a.chiral, a.explicit_h, a.offset))
        for bond in self.bonds:
            if bond.a in remap and bond.b in remap:
                sub.add_bond(remap[bond.a], remap[bond.b], bond.order, bond.stereo)
        for i, atom in enumerate(sub.atoms):
            if not atom.explicit_h:
                atom.h_count = implied_h_count(sub, i)
        return sub


def bond_order_sum(mol: Molecule, i: int) -> int:
    """Integer bond-order sum used by the implicit-hydrogen model.

    Aromatic bonds count 1; an aromatic atom of a pi-contributing element
    pays one extra unit for its ring pi bond.  This is what makes pyrrole
    require an explicit [nH] while pyridine's bare n gets zero hydrogens.
    A three-connected aromatic N or P contributes its lone pair instead,
    so it pays nothing extra: the n in 1-methylpyrrole carries no H.
    """
    total = 0
    degree = 0
    for bond in mol.incident_bonds(i):
        degree += 1
        if bond.order is BondOrder.AROMATIC:
            total += 1
        else:
            total += bond.order.value
    atom = mol.atoms[i]
    if atom.aromatic and atom.element in PI_CONTRIBUTORS:
        if not (atom.element in ("N", "P", "As") and degree >= 3):
            total += 1
    return total


def implied_h_count(mol: Molecule, i: int) -> int:
    """Hydrogens a bare organic-subset token would receive, 0 if none fit."""
    atom = mol.atoms[i]
    valences = VALENCES.get(atom.element)
    if valences is None:
        return 0
    total = bond_order_sum(mol, i)
    for v in valences:
        if total <= v:
            return v - total
    return 0


def assign_implicit_hydrogens(mol: Molecule) -> None:
    """Fill h_count for non-bracket atoms; bracket counts are kept as given."""
    for i, atom in enumerate(mol.atoms):
        if atom.explicit_h:
            continue
        valences = VALENCES.get(atom.element)
        if valences is None:
            atom.h_count = 0
            continue
        total = bond_order_sum(mol, i)
        if total > max(valences):
            raise ValenceViolation(
                f"bond-order sum {total} exceeds max valence of {atom.element}",
                offset=atom.offset, atom_index=i)
        atom.h_count = implied_h_count(mol, i)


def hybridization(mol: Molecule, i: int) -> str:
    """'sp' for a triple bond or two doubles, 'sp2' for aromatic or one
    double, 'sp3' for saturated C/N/O/S, 'other' otherwise."""
    doubles = triples = 0
    for bond in mol.incident_bonds(i):
        if bond.order is BondOrder.DOUBLE:
            doubles += 1
        elif bond.order is BondOrder.TRIPLE:
            triples += 1
    if triples >= 1 or doubles >= 2:
        return "sp"
    atom = mol.atoms[i]
    if atom.aromatic or doubles == 1:
        return "sp2"
    if atom.element in {"C", "N", "O", "S"}:
        return "sp3"
    return "other"


def _has_pi_bond(mol: Molecule, i: int) -> bool:
    return any(b.order in (BondOrder.DOUBLE, BondOrder.TRIPLE, BondOrder.AROMATIC)
               for b in mol.incident_bonds(i))


def _lone_pair_donor(mol: Molecule, i: int) -> bool:
    atom = mol.atoms[i]
    return atom.element in {"N", "O", "S", "P"} and atom.charge <= 0 \
        and not _has_pi_bond(mol, i)


def bond_conjugated(mol: Molecule, bond: Bond) -> bool:
    """Approximate conjugation: a pi system that extends across the bond.

    Aromatic bonds are conjugated.  A single bond is conjugated when it
    joins two pi bonds, or a pi bond and a lone-pair donor (amide, enol
    ether, carboxyl).  A multiple bond is conjugated when an adjacent atom
    brings another pi bond or a lone pair, so an isolated C=C or C=O is not.
    """
    if bond.order is BondOrder.AROMATIC:
        return True
    u, v = bond.a, bond.b
    if bond.order is BondOrder.SINGLE:
        pu, pv = _has_pi_bond(mol, u), _has_pi_bond(mol, v)
        if pu and pv:
            return True
        return (pu and _lone_pair_donor(mol, v)) or (pv and _lone_pair_donor(mol, u))
    for end in (u, v):
        for w, b2 in mol.neighbors(end):
            if b2 is bond:
                continue
            if _has_pi_bond(mol, w) or _lone_pair_donor(mol, w):
                return True
    return False
