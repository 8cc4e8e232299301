"""Explicit KMS data on the n-branching tree.

Words are tuples over ``{1, ..., n}``; the empty tuple is the root.  The
potential throughout is word length, ``h(x) = |x|``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .asymptotics import convergence_verdict
from .errors import NegativeWeightError
from .flow import named_potential
from .kms import DiagonalState, KmsReport, kms_audit, random_pairs, random_translations
from .space import TreeSpace, TruncationSequence, make_tree
from .translation import PartialTranslation

__all__ = [
    "Word",
    "Branch",
    "Cylinder",
    "weight_factor",
    "explicit_tree_state",
    "cylinder_mass",
    "shift_kms_defect",
    "branch_isometry",
    "pushforward_state",
    "cylinder_product",
    "PhaseRow",
    "PhaseReport",
    "phase_report",
]

Word = tuple[int, ...]


@dataclass(frozen=True)
class Branch:
    """An infinite word, given by a finite prefix repeated periodically.

    ``Branch((1,))`` is ``111...``; ``Branch((1, 2))`` is ``1212...``.
    """

    period: Word

    def __post_init__(self):
        if not self.period:
            raise ValueError("a branch needs a nonempty period")

    def prefix(self, k: int) -> Word:
        p = self.period
        return tuple(p[i % len(p)] for i in range(k))


@dataclass(frozen=True)
class Cylinder:
    """The words of a truncation having ``root`` as a prefix."""

    space: TreeSpace
    root: Word

    def __contains__(self, x: int) -> bool:
        w = self.space.word(x)
        return w[: len(self.root)] == tuple(self.root)

    def ids(self) -> np.ndarray:
        blocks = self.space.cylinder_blocks(self.root)
        if not blocks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([np.arange(a, b, dtype=np.int64) for a, b in blocks])

    def indicator(self) -> np.ndarray:
        out = np.zeros(len(self.space))
        for a, b in self.space.cylinder_blocks(self.root):
            out[a:b] = 1.0
        return out

    def __len__(self) -> int:
        return sum(b - a for a, b in self.space.cylinder_blocks(self.root))

    def __and__(self, other: "Cylinder") -> "Cylinder | None":
        root = cylinder_product(self.root, other.root)
        return None if root is None else Cylinder(self.space, root)


def _as_word(y) -> Word:
    return tuple(int(a) for a in y)


def weight_factor(n: int, beta: float) -> float:
    """``1 - n e^{-beta}``, exactly 0 at ``beta = log n``."""
    return -math.expm1(math.log(n) - beta)


def explicit_tree_state(n: int, beta: float, depth: int, space: TreeSpace | None = None) -> DiagonalState:
    """``w(y) = e^{-beta |y|} - n e^{-beta (|y| + 1)}`` on the depth-``D`` truncation.

    Nothing is renormalised: the deficit ``(n e^{-beta})^{D+1}`` is carried as
    mass at infinity and split evenly over the level-``D`` words, each
    standing for the subtree hanging below it.
    """
    X = space if space is not None else make_tree(n, depth)
    if X.n != n or X.depth != depth:
        raise ValueError("space does not match (n, depth)")
    c = weight_factor(n, beta)
    if c < 0:
        raise NegativeWeightError(
            f"beta = {beta!r} < log {n}: every weight would be negative (factor {c:.6g})",
            witness=(),
            value=c,
        )
    levels = np.arange(depth + 1, dtype=float)
    per_level = np.exp(-beta * levels) * c
    w = np.repeat(per_level, X.level_widths)
    escaped = math.exp((depth + 1) * (math.log(n) - beta))
    escape = np.zeros(len(X))
    escape[X.offsets[depth] :] = escaped / X.level_widths[depth]
    return DiagonalState(X, w, mass_at_infinity=escaped, escape=escape)


def cylinder_mass(phi: DiagonalState, y: Iterable[int], include_escaped: bool = False) -> float:
    """``phi(chi_{y T})``: total weight on the words extending ``y``.

    With ``include_escaped`` the escaped mass attached to the cylinder's
    deepest words is added, so the result is the mass of the cylinder in the
    untruncated tree.
    """
    X = phi.space
    if not isinstance(X, TreeSpace):
        raise TypeError("cylinder masses need a tree")
    y = _as_word(y)
    if not all(1 <= a <= X.n for a in y):
        raise ValueError(f"word {y} has letters outside 1..{X.n}")
    blocks = X.cylinder_blocks(y)
    parts = [phi.weights[a:b] for a, b in blocks]
    if include_escaped:
        if len(y) > X.depth:
            raise ValueError("cannot apportion escaped mass below the truncation depth")
        if phi.mass_at_infinity and phi.escape is None:
            raise ValueError("state has escaped mass but no escape profile")
        if phi.escape is not None:
            parts += [phi.escape[a:b] for a, b in blocks]
    if not parts:
        return 0.0
    return math.fsum(np.concatenate(parts).tolist())


def shift_kms_defect(
    phi: DiagonalState,
    n: int,
    beta: float,
    ys: Sequence[Iterable[int]],
    As: Sequence[Iterable[int]],
) -> KmsReport:
    """Largest ``|phi(chi_{A y}) - e^{-beta |y|} phi(chi_A)|`` over ``(y, A)``.

    ``A y`` appends ``y`` to every word of ``A``.  Pairs whose image leaves
    the truncation are skipped and listed under ``witness["skipped"]``.
    """
    X = phi.space
    if not isinstance(X, TreeSpace) or X.n != n:
        raise ValueError(f"state must live on a {n}-branching tree")
    worst, at, skipped, used = 0.0, None, [], 0
    for i, y in enumerate(ys):
        y = _as_word(y)
        for j, A in enumerate(As):
            A = sorted(int(a) for a in A)
            words = [X.word(a) for a in A]
            if any(len(w) + len(y) > X.depth for w in words):
                skipped.append((i, j))
                continue
            img = [X.id_of(w + y) for w in words]
            lhs = phi.mass(img)
            rhs = math.exp(-beta * len(y)) * phi.mass(A)
            d = abs(lhs - rhs)
            used += 1
            if at is None or d > worst:
                worst, at = d, (i, j)
    witness = {"skipped": skipped}
    if at is not None:
        witness.update(kind="shift", y=at[0], A=at[1])
    return KmsReport(beta, defect_criterion=worst, samples=used, witness=witness)


def _tree_map(w: Word, xk: Word, yk: Word) -> Word:
    k = len(xk)
    m = 0
    while m < min(len(w), k) and w[m] == xk[m]:
        m += 1
    if m == len(w):
        return yk[:m]
    if m == k:
        return yk + w[k:]
    c = w[m]
    c = xk[m] if c == yk[m] else c
    return yk[:m] + (c,) + w[m + 1 :]


def branch_isometry(xbar, ybar, depth: int, n: int | None = None, space: TreeSpace | None = None) -> PartialTranslation:
    """A tree automorphism of the depth-``D`` truncation sending ``xbar|j`` to ``ybar|j``.

    ``xbar`` and ``ybar`` are equal-length words or :class:`Branch` objects
    paired with a common ``k`` (then both are cut to ``k = depth``).  Below
    each path vertex the two children on the paths are transposed and all
    other subtrees follow their parent unchanged.
    """
    if isinstance(xbar, Branch) or isinstance(ybar, Branch):
        xbar = xbar.prefix(depth) if isinstance(xbar, Branch) else xbar
        ybar = ybar.prefix(depth) if isinstance(ybar, Branch) else ybar
    xk, yk = _as_word(xbar), _as_word(ybar)
    if len(xk) != len(yk):
        raise ValueError(f"prefix lengths differ: {len(xk)} vs {len(yk)}")
    if len(xk) > depth:
        raise ValueError("prefixes are longer than the truncation depth")
    if n is None:
        n = space.n if space is not None else max(xk + yk, default=1)
    X = space if space is not None else make_tree(n, depth)
    if X.n != n or X.depth != depth:
        raise ValueError("space does not match (n, depth)")
    if not (X.contains_word(xk) and X.contains_word(yk)):
        raise ValueError(f"prefixes have letters outside 1..{n}")
    image = [X.id_of(_tree_map(X.word(x), xk, yk)) for x in range(len(X))]
    return PartialTranslation(X, np.arange(len(X)), image)


def pushforward_state(phi: DiagonalState, f: PartialTranslation) -> DiagonalState:
    """``w'(x) = w(f(x))``, i.e. ``phi o Ad(u_f)`` for the unitary ``u_f``."""
    N = len(phi.space)
    if len(f.space) != N:
        raise ValueError("map and state live on different spaces")
    if len(f) != N:
        raise ValueError("pushforward needs a bijection of the whole space")
    w = np.empty(N)
    w[f.domain] = phi.weights[f.image]
    escape = None
    if phi.escape is not None:
        escape = np.empty(N)
        escape[f.domain] = phi.escape[f.image]
    return DiagonalState(phi.space, w, mass_at_infinity=phi.mass_at_infinity, escape=escape)


def cylinder_product(y: Iterable[int], z: Iterable[int]) -> Word | None:
    """Root of ``yT & zT``: the longer word if one is a prefix of the other, else None."""
    y, z = _as_word(y), _as_word(z)
    if z[: len(y)] == y:
        return z
    if y[: len(z)] == z:
        return y
    return None


# Phase report


@dataclass
class PhaseRow:
    beta: float
    verdict: str
    factor: float  # 1 - n e^{-beta}; negative means no state
    Z_tail: float
    log_Z: float
    z_verdict: str
    escaped_mass: float | None
    kms_defect: float | None


@dataclass
class PhaseReport:
    n: int
    depths: list[int]
    kms_depth: int
    seed: int
    rows: list[PhaseRow]

    def flip(self) -> tuple[float, float] | None:
        """Grid values straddling the change from no state to a state."""
        for a, b in zip(self.rows, self.rows[1:]):
            if a.verdict == "no-state" and b.verdict != "no-state":
                return a.beta, b.beta
        return None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "depths": list(self.depths),
            "kms_depth": self.kms_depth,
            "seed": self.seed,
            "rows": [vars(r).copy() for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    FIELDS = ("beta", "verdict", "factor", "Z_tail", "log_Z", "z_verdict", "escaped_mass", "kms_defect")

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.FIELDS)
        for r in self.rows:
            out = []
            for k in self.FIELDS:
                v = getattr(r, k)
                out.append("" if v is None else f"{v:.17g}" if isinstance(v, float) else v)
            wr.writerow(out)
        return buf.getvalue()


def _phase_row(n, beta, depths, kms_depth, seed, pairs, tol) -> PhaseRow:
    seq = TruncationSequence.trees(n)
    zv = convergence_verdict(seq, "word-length", beta, depths)
    c = weight_factor(n, beta)
    D = max(depths)
    escaped = kms = None
    if c < 0:
        verdict = "no-state"
    else:
        escaped = math.exp((D + 1) * (math.log(n) - beta))
        phi = explicit_tree_state(n, beta, kms_depth)
        X = phi.space
        h = named_potential("word-length", X)
        rng = np.random.default_rng(seed)
        rep = kms_audit(phi, h, beta, random_pairs(X, pairs, rng), random_translations(X, pairs, rng))
        kms = rep.worst()
        if c == 0:
            verdict = "critical"
        else:
            verdict = "unique-gibbs" if kms <= tol else "inconclusive"
    return PhaseRow(beta, verdict, c, zv.tail, zv.evidence[-1][1], zv.verdict, escaped, kms)


def phase_report(
    n: int,
    betas: Sequence[float],
    depths: Sequence[int] = (10, 20, 40, 80, 160, 320, 640, 1280),
    kms_depth: int = 5,
    seed: int = 0,
    pairs: int = 30,
    tol: float = 1e-10,
    threads: int = 1,
) -> PhaseReport:
    """Classify each ``beta`` as ``no-state``, ``critical`` or ``unique-gibbs``.

    The classification follows the sign of ``1 - n e^{-beta}`` (negative
    weights rule a state out; zero weights leave all mass at infinity).
    Every row also carries independent evidence: the partial-sum verdict on
    ``Z`` up to the deepest depth, the escaped mass of the explicit state
    there, and its worst KMS defect on a seeded population.
    """
    depths = sorted(depths)
    betas = list(betas)
    args = [(n, b, depths, kms_depth, seed, pairs, tol) for b in betas]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(lambda a: _phase_row(*a), args))
    else:
        rows = [_phase_row(*a) for a in args]
    return PhaseReport(n, depths, kms_depth, seed, rows)
