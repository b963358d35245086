"""Molecular graphs: SMILES parsing, perception, canonical keys."""
from .canon import canonical_key, canonical_ranks, write_smiles
from .errors import (AmbiguousComponents, SmilesError, UnbalancedBranch,
                     UnbalancedRingClosure, UnknownAtomToken, ValenceViolation)
from .mol import (Atom, Bond, BondOrder, BondStereo, Molecule,
                  bond_conjugated, hybridization)
from .parser import parse_smiles

__all__ = [
    "Atom", "Bond", "BondOrder", "BondStereo", "Molecule",
    "parse_smiles", "canonical_key", "canonical_ranks", "write_smiles",
    "bond_conjugated", "hybridization",
    "SmilesError", "UnbalancedRingClosure", "UnbalancedBranch",
    "UnknownAtomToken", "ValenceViolation", "AmbiguousComponents",
]
