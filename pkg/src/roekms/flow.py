"""The diagonal-conjugation flow ``a -> e^{ith} a e^{-ith}`` and its continuation.

Nothing here forms a dense exponential: conjugating by a diagonal only
rescales entry ``(x, y)`` by a function of ``h(x) - h(y)``, so both the
support and the propagation of the operator are untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import MagnitudeError
from .operator import BandOperator
from .space import FiniteSpace, LineSpace, TreeSpace

__all__ = [
    "Potential",
    "CoarsenessProfile",
    "coarseness_modulus",
    "evolve",
    "analytic_evolve",
    "EXP_LIMIT",
    "POTENTIALS",
    "named_potential",
    "default_potential_name",
    "shells",
]

EXP_LIMIT = 700.0


@dataclass(frozen=True, eq=False)
class Potential:
    """A real function ``h`` on the points of a space."""

    space: FiniteSpace
    values: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.space),):
            raise ValueError(f"potential needs {len(self.space)} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("potential values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __call__(self, x: int) -> float:
        return float(self.values[x])

    def differences(self, rows, cols) -> np.ndarray:
        """``h(row) - h(col)`` per entry."""
        return self.values[rows] - self.values[cols]


@dataclass(frozen=True)
class CoarsenessProfile:
    pairs: list[tuple[float, float]]

    def __call__(self, r: float) -> float:
        for radius, w in self.pairs:
            if radius == r:
                return w
        raise KeyError(r)


def coarseness_modulus(h: Potential, radii: Iterable[float]) -> CoarsenessProfile:
    """``omega(r) = max{|h(x) - h(y)| : d(x, y) <= r}`` at each radius."""
    X = h.space
    out = []
    for r in radii:
        best = 0.0
        for x in range(len(X)):
            ball = X.ball(x, r)
            if len(ball):
                best = max(best, float(np.abs(h.values[ball] - h.values[x]).max()))
        out.append((r, best))
    return CoarsenessProfile(out)


def _same_space(a: BandOperator, h: Potential):
    if a.space is not h.space and len(a.space) != len(h.space):
        raise ValueError("operator and potential live on different spaces")


def evolve(a: BandOperator, h: Potential, t: float) -> BandOperator:
    """``sigma_{h,t}(a)``: entry ``(x, y)`` times ``exp(i t (h(x) - h(y)))``."""
    _same_space(a, h)
    rows, cols, vals = a.entries()
    phase = np.exp(1j * t * h.differences(rows, cols))
    return BandOperator.from_triplets(a.space, rows, cols, vals * phase)


def analytic_evolve(a: BandOperator, h: Potential, beta: float) -> BandOperator:
    """``sigma_{h, i beta}(a) = e^{-beta h} a e^{beta h}``.

    Entry ``(x, y)`` is multiplied by ``exp(-beta (h(x) - h(y)))``.  Raises
    :class:`MagnitudeError` when some exponent exceeds ``EXP_LIMIT``.
    """
    _same_space(a, h)
    rows, cols, vals = a.entries()
    expo = -beta * h.differences(rows, cols)
    if len(expo):
        k = int(np.argmax(np.abs(expo)))
        if abs(expo[k]) > EXP_LIMIT:
            raise MagnitudeError(
                f"exponent {expo[k]:.6g} at entry ({rows[k]}, {cols[k]}) exceeds {EXP_LIMIT}",
                exponent=float(expo[k]),
                witness=(int(rows[k]), int(cols[k])),
            )
    return BandOperator.from_triplets(a.space, rows, cols, vals * np.exp(expo))


# Named potentials.  Each entry maps a space to values and knows how to
# describe truncation shells without building the space (used for very deep
# truncations in the asymptotics module).


def _word_length(X: FiniteSpace) -> np.ndarray:
    if isinstance(X, TreeSpace):
        return X.lengths.astype(float)
    return X.distances_from(0).astype(float)


def _coords(X: FiniteSpace) -> np.ndarray:
    if not isinstance(X, LineSpace):
        raise ValueError(f"label potentials need integer-labelled points, not {X.kind}")
    return X.coords.astype(float)


def _log_label(X: FiniteSpace) -> np.ndarray:
    return np.log1p(_coords(X))


def _log_sqrt_label(X: FiniteSpace) -> np.ndarray:
    c = _coords(X)
    if np.any(c <= 0):
        raise ValueError("log-sqrt-label needs positive labels")
    return 0.5 * np.log(c)


POTENTIALS: dict[str, Callable[[FiniteSpace], np.ndarray]] = {
    "word-length": _word_length,
    "log-label": _log_label,
    "log-sqrt-label": _log_sqrt_label,
}


def named_potential(name: str, X: FiniteSpace) -> Potential:
    """``word-length`` is the distance to point 0 (``|x|`` on trees);
    ``log-label`` is ``log(1 + label)``; ``log-sqrt-label`` is ``log(sqrt(label))``."""
    try:
        fn = POTENTIALS[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; choose from {sorted(POTENTIALS)}") from None
    return Potential(X, fn(X), name)


def default_potential_name(X: FiniteSpace) -> str:
    return "log-sqrt-label" if X.kind == "squares" else "word-length"


def shells(kind: str, potential: str, D: int, n: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """``(h values, log multiplicities)`` describing truncation ``D`` of a family.

    For trees under ``word-length`` the level-``k`` shell holds ``n^k`` points
    at ``h = k``; line families list every point once.
    """
    if kind == "tree":
        if potential != "word-length":
            raise ValueError("tree shells are only tabulated for word-length")
        k = np.arange(D + 1, dtype=float)
        return k, k * math.log(n)
    if kind == "interval":
        c = np.arange(D, dtype=float)
    elif kind == "squares":
        c = np.arange(1, D + 1, dtype=float) ** 2
    else:
        raise ValueError(f"no shell table for {kind!r}")
    if potential == "word-length":
        h = c - c[0]
    elif potential == "log-label":
        h = np.log1p(c)
    elif potential == "log-sqrt-label":
        if kind == "interval":
            raise ValueError("log-sqrt-label is undefined at label 0")
        h = 0.5 * np.log(c)
    else:
        raise ValueError(f"unknown potential {potential!r}")
    return h, np.zeros_like(h)
