"""Diagonal operators, i.e. bounded functions on the points of a space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .space import FiniteSpace


@dataclass(frozen=True, eq=False)
class Diagonal:
    space: FiniteSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (len(self.space),):
            raise ValueError(f"expected {len(self.space)} values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def chi(cls, space: FiniteSpace, ids: Iterable[int]) -> "Diagonal":
        """Indicator of a point set."""
        v = np.zeros(len(space))
        v[np.fromiter(ids, dtype=np.int64)] = 1.0
        return cls(space, v)

    @classmethod
    def constant(cls, space: FiniteSpace, c=1.0) -> "Diagonal":
        return cls(space, np.full(len(space), c))

    def __mul__(self, other):
        if isinstance(other, Diagonal):
            return Diagonal(self.space, self.values * other.values)
        if np.isscalar(other):
            return Diagonal(self.space, self.values * other)
        return NotImplemented

    __rmul__ = __mul__

    def __add__(self, other: "Diagonal") -> "Diagonal":
        return Diagonal(self.space, self.values + other.values)

    def __sub__(self, other: "Diagonal") -> "Diagonal":
        return Diagonal(self.space, self.values - other.values)

    def support(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.values).tolist())

    def equals(self, other: "Diagonal", atol: float = 0.0) -> bool:
        return other.space is self.space and bool(np.all(np.abs(self.values - other.values) <= atol))
