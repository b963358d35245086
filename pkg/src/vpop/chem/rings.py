"""Ring perception and notation-level aromatization.

Rings are found per bond: the smallest cycle through each bond is the
shortest path between its endpoints with the bond removed.  The union of
those smallest cycles is kept, so a fused-ring bond is annotated with every
ring that contains it (indane's shared bond carries both 5 and 6).  Cycles
longer than MAX_RING_SIZE are ignored.
"""
from __future__ import annotations

from collections import deque

from .mol import MAX_RING_SIZE, BondOrder, Molecule


def _shortest_alt_path(mol: Molecule, bond_idx: int) -> list[int] | None:
    """Shortest path between a bond's endpoints avoiding the bond itself."""
    bond = mol.bonds[bond_idx]
    start, goal = bond.a, bond.b
    prev: dict[int, int] = {start: -1}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            path = [node]
            while prev[path[-1]] != -1:
                path.append(prev[path[-1]])
            return path[::-1]
        for nbr, b in mol.neighbors(node):
            if b is mol.bonds[bond_idx] or nbr in prev:
                continue
            prev[nbr] = node
            queue.append(nbr)
    return None


def _ring_bond_pairs(ring: tuple[int, ...]) -> set[tuple[int, int]]:
    pairs = set()
    for k in range(len(ring)):
        a, b = ring[k], ring[(k + 1) % len(ring)]
        pairs.add((min(a, b), max(a, b)))
    return pairs


def perceive_rings(mol: Molecule) -> None:
    """Populate mol.rings and the ring_sizes tuples on atoms and bonds."""
    cycles: list[tuple[int, ...]] = []
    seen: set[frozenset[tuple[int, int]]] = set()
    for bi, bond in enumerate(mol.bonds):
        path = _shortest_alt_path(mol, bi)
        if path is None or len(path) > MAX_RING_SIZE:
            continue
        ring = tuple(path)  # closing the a..b path with the bond itself
        key = frozenset(_ring_bond_pairs(ring))
        if key not in seen:
            seen.add(key)
            cycles.append(ring)
    mol.rings = cycles

    atom_sizes: dict[int, set[int]] = {}
    bond_sizes: dict[tuple[int, int], set[int]] = {}
    for ring in cycles:
        size = len(ring)
        for a in ring:
            atom_sizes.setdefault(a, set()).add(size)
        for pair in _ring_bond_pairs(ring):
            bond_sizes.setdefault(pair, set()).add(size)

    for i, atom in enumerate(mol.atoms):
        atom.ring_sizes = tuple(sorted(atom_sizes.get(i, ())))
    for bond in mol.bonds:
        pair = (min(bond.a, bond.b), max(bond.a, bond.b))
        bond.ring_sizes = tuple(sorted(bond_sizes.get(pair, ())))


def _one_ring_double(mol: Molecule, i: int) -> bool:
    """Atom has exactly one double bond and it sits inside some ring."""
    doubles = [b for b in mol.incident_bonds(i) if b.order is BondOrder.DOUBLE]
    return len(doubles) == 1 and doubles[0].in_ring


def _no_double(mol: Molecule, i: int) -> bool:
    return not any(b.order is BondOrder.DOUBLE for b in mol.incident_bonds(i))


def aromatize_kekule(mol: Molecule) -> None:
    """Mark alternating Kekule rings aromatic so that C1=CC=CC=C1 and
    c1ccccc1 become the same graph.

    A 6-ring of C/N aromatizes when every ring atom carries exactly one
    double bond lying inside the ring system (covers fused rings, excludes
    quinones whose doubles point outward).  A 5-ring aromatizes when exactly
    one member is a double-free N/O/S lone-pair donor and the other four
    each carry one in-ring double.  This is pattern matching on the drawn
    alternation, not electron counting.
    """
    to_flag: list[tuple[int, ...]] = []
    for ring in mol.rings:
        size = len(ring)
        if size == 6:
            if all(mol.atoms[a].element in {"C", "N"} for a in ring) and \
               all(_one_ring_double(mol, a) for a in ring):
                to_flag.append(ring)
        elif size == 5:
            donors = [a for a in ring
                      if mol.atoms[a].element in {"N", "O", "S"} and _no_double(mol, a)]
            rest = [a for a in ring if a not in donors]
            if len(donors) == 1 and len(rest) == 4 and \
               all(mol.atoms[a].element in {"C", "N"} for a in rest) and \
               all(_one_ring_double(mol, a) for a in rest):
                to_flag.append(ring)

    for ring in to_flag:
        for a in ring:
            mol.atoms[a].aromatic = True
        for k in range(len(ring)):
            bond = mol.bond_between(ring[k], ring[(k + 1) % len(ring)])
            if bond is not None and bond.order in (BondOrder.SINGLE, BondOrder.DOUBLE):
                bond.order = BondOrder.AROMATIC
