"""Errors raised while reading SMILES input.

Every error carries the byte offset into the input string at which the
problem was detected (ASCII input is assumed, so byte offset == character
offset).  ``ValenceViolation`` additionally carries the atom index.
"""
from __future__ import annotations


class SmilesError(ValueError):
    """Base class for SMILES parse failures."""

    def __init__(self, message: str, offset: int = -1, atom_index: int | None = None):
        self.offset = offset
        self.atom_index = atom_index
        if offset >= 0:
            message = f"{message} (offset {offset})"
        super().__init__(message)


class UnbalancedRingClosure(SmilesError):
    """Ring-bond digit left open, closed twice, or otherwise misused."""


class UnbalancedBranch(SmilesError):
    """'(' without matching ')' or vice versa."""


class UnknownAtomToken(SmilesError):
    """Unrecognised atom symbol or unexpected character."""


class ValenceViolation(SmilesError):
    """Bond-order sum exceeds every allowed valence of the element."""


class AmbiguousComponents(SmilesError):
    """Multi-component input whose largest components tie in heavy-atom count."""
