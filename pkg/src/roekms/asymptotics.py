"""Diagnostics along truncation sequences.

Nothing infinite is represented here; every question ("does ``Z`` converge
at this beta?", "is this function Higson?") is answered by watching how a
finite quantity behaves as the truncation grows, with the decision rules
spelled out in each function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .flow import Potential, named_potential, shells
from .space import FiniteSpace, TruncationSequence

__all__ = [
    "ConvergenceVerdict",
    "CriticalEstimate",
    "ThinSet",
    "MassProfile",
    "log_partial_sums",
    "convergence_verdict",
    "critical_beta",
    "build_thin_set",
    "max_translate_overlap",
    "higson_variation",
    "mass_at_infinity_profile",
]

DIVERGENCE_FACTOR = 1.5
CONVERGENCE_TAIL = 1e-9

_RANK = {"diverges": 0, "inconclusive": 1, "converges": 2}


@dataclass
class ConvergenceVerdict:
    beta: float
    verdict: str
    evidence: list[tuple[int, float]] = field(default_factory=list)  # (depth, log Z_D)
    tail: float = math.nan  # last shell's share of Z at the final depth
    growth: float = math.nan  # Z(D_last) / Z(D_half)


@dataclass
class CriticalEstimate:
    estimate: float
    bracket: tuple[float, float]
    verdicts: list[ConvergenceVerdict]
    monotone: bool

    @property
    def overall(self) -> str:
        return "ok" if self.monotone else "inconclusive"


def _logsumexp(t: np.ndarray) -> float:
    if len(t) == 0:
        return -math.inf
    m = float(t.max())
    return m + math.log(math.fsum(np.exp(t - m).tolist()))


def _shell_table(seq: TruncationSequence, potential, D: int) -> tuple[np.ndarray, np.ndarray]:
    """``(log term, shell index)`` for truncation ``D``, one row per term group."""
    if isinstance(potential, str) and seq.kind in ("tree", "interval", "squares"):
        h, logmult = shells(seq.kind, potential, D, n=seq.params.get("n", 2))
        return h, logmult
    X = seq.at(D)
    h = named_potential(potential, X) if isinstance(potential, str) else potential(X)
    vals = h.values if isinstance(h, Potential) else np.asarray(h, dtype=float)
    return vals, np.zeros_like(vals)


def log_partial_sums(seq: TruncationSequence, potential, beta: float, depths: Sequence[int]) -> list[tuple[int, float, float]]:
    """``(D, log Z_D, log of the outermost shell's contribution)`` per depth."""
    out = []
    for D in depths:
        h, logmult = _shell_table(seq, potential, D)
        t = logmult - beta * h
        out.append((D, _logsumexp(t), float(t[-1])))
    return out


def convergence_verdict(seq: TruncationSequence, potential, beta: float, depths: Sequence[int]) -> ConvergenceVerdict:
    """Judge ``sum exp(-beta h)`` from its partial sums.

    * diverges: ``Z`` at the final depth is at least 1.5 times ``Z`` at the
      largest listed depth not exceeding half of it (the previous depth if
      none does);
    * converges: the final shell contributes less than ``1e-9`` of the sum;
    * inconclusive otherwise.
    """
    depths = sorted(depths)
    sums = log_partial_sums(seq, potential, beta, depths)
    D_last, lz_last, lt_last = sums[-1]
    growth = math.nan
    if len(sums) > 1:
        half = [s for s in sums[:-1] if s[0] <= D_last / 2]
        ref = half[-1] if half else sums[-2]
        growth = math.exp(min(lz_last - ref[1], 700.0))
    tail = math.exp(lt_last - lz_last)
    if growth >= DIVERGENCE_FACTOR:
        verdict = "diverges"
    elif tail < CONVERGENCE_TAIL:
        verdict = "converges"
    else:
        verdict = "inconclusive"
    return ConvergenceVerdict(beta, verdict, [(D, lz) for D, lz, _ in sums], tail, growth)


def critical_beta(
    seq: TruncationSequence,
    potential,
    grid: Sequence[float],
    depths: Sequence[int],
) -> CriticalEstimate:
    """Bracket the boundary of the convergence region of ``Z``.

    The bracket runs from the largest grid value judged divergent to the
    smallest grid value above it judged convergent; inconclusive values in
    between stay inside.  With no divergent grid value
    the lower end is 0: for an unbounded potential nothing below 0 can
    converge.  Verdicts must be ordered diverges < inconclusive < converges
    along the grid; otherwise ``monotone`` is False.
    """
    grid = list(grid)
    if grid != sorted(grid):
        raise ValueError("grid must be sorted ascending")
    verdicts = [convergence_verdict(seq, potential, b, depths) for b in grid]
    ranks = [_RANK[v.verdict] for v in verdicts]
    monotone = all(a <= b for a, b in zip(ranks, ranks[1:]))
    div = [v.beta for v in verdicts if v.verdict == "diverges"]
    if not div:
        conv = [v.beta for v in verdicts if v.verdict == "converges"]
        return CriticalEstimate(0.0, (0.0, min(conv) if conv else math.inf), verdicts, monotone)
    lo = max(div)
    above = [v.beta for v in verdicts if v.beta > lo and v.verdict == "converges"]
    hi = min(above) if above else math.inf
    est = lo if math.isinf(hi) else 0.5 * (lo + hi)
    return CriticalEstimate(est, (lo, hi), verdicts, monotone)


@dataclass
class ThinSet:
    points: list[int]
    notice: str | None = None

    def __len__(self) -> int:
        return len(self.points)

    def check(self, X: FiniteSpace) -> bool:
        """``d(x_k, x_l) >= max_{i,j<l} d(x_i, x_j) + l`` for all ``k < l`` (1-based)."""
        pts = self.points
        for l in range(1, len(pts)):
            prev = np.array(pts[:l])
            i, j = np.meshgrid(prev, prev, indexing="ij")
            diam = X.pair_distances(i.ravel(), j.ravel()).max()
            if np.any(X.pair_distances(prev, np.full(l, pts[l])) < diam + (l + 1)):
                return False
        return True


def build_thin_set(X: FiniteSpace, count: int) -> ThinSet:
    """Greedily pick the smallest admissible id at each step.

    The ``l``-th point (1-based) must be at distance at least
    ``diam(previous points) + l`` from every previous point.
    """
    if count < 1:
        return ThinSet([])
    chosen = [0]
    nearest = X.distances_from(0).astype(float)
    diam = 0.0
    while len(chosen) < count:
        need = diam + len(chosen) + 1
        ok = np.flatnonzero(nearest >= need)
        if len(ok) == 0:
            return ThinSet(chosen, f"space exhausted after {len(chosen)} of {count} points")
        x = int(ok[0])
        dx = X.distances_from(x).astype(float)
        diam = max(diam, float(dx[chosen].max()))
        nearest = np.minimum(nearest, dx)
        chosen.append(x)
    return ThinSet(chosen)


def max_translate_overlap(X: FiniteSpace, A, B, max_shift: int) -> int:
    """``max |f[A] & g[B]|`` over id shifts ``f, g`` by at most ``max_shift``."""
    A = np.asarray(sorted(A), dtype=np.int64)
    B = np.asarray(sorted(B), dtype=np.int64)
    N = len(X)
    best = 0
    shifts = range(-max_shift, max_shift + 1)
    for s in shifts:
        fa = A + s
        fa = set(fa[(fa >= 0) & (fa < N)].tolist())
        for t in shifts:
            gb = B + t
            gb = gb[(gb >= 0) & (gb < N)]
            best = max(best, len(fa.intersection(gb.tolist())))
    return best


def higson_variation(f, R: float, X: FiniteSpace, cores: Sequence[int]) -> list[tuple[int, float]]:
    """``Var(D) = max{|f(x) - f(y)| : d(x, y) < R, x, y outside the core}``.

    The core of depth ``D`` is the closed ball of radius ``D`` about point 0.
    ``f`` is an array over the points of ``X`` or a callable building one.
    """
    vals = np.asarray(f(X) if callable(f) else f, dtype=float)
    r0 = X.distances_from(0)
    xs, ys = X.pairs_within(R, strict=True)
    jump = np.abs(vals[xs] - vals[ys])
    out = []
    for D in cores:
        outside = (r0[xs] > D) & (r0[ys] > D)
        out.append((D, float(jump[outside].max()) if outside.any() else 0.0))
    return out


@dataclass
class MassProfile:
    rows: list[tuple[int, float, float]]  # (truncation size, max core weight, escaped mass)
    classification: str

    def to_csv(self) -> str:
        lines = ["size,max_core_weight,escaped_mass"]
        lines += [f"{n},{w:.17g},{e:.17g}" for n, w, e in self.rows]
        return "\n".join(lines) + "\n"


def mass_at_infinity_profile(states: Sequence, core_radius: float | None = None) -> MassProfile:
    """Per truncation: the largest weight on a fixed core and the escaped mass.

    The fixed core is the ball of radius ``core_radius`` about point 0
    (default: the whole first truncation).  Escaped mass is the weight off
    the ball of radius ``isqrt(R)`` about point 0, ``R`` being the radius of
    the truncation, plus any mass the state already places at infinity; the
    slowly growing ball stands in for "every finite set".

    The limit is called ``strongly-continuous`` when the escaped mass ends
    below 1/2 without having grown, ``compact-vanishing`` when it ends above
    1/2 without having shrunk, and ``undetermined`` otherwise.
    """
    if not states:
        raise ValueError("need at least one state")
    X0 = states[0].space
    r_core = float(X0.distances_from(0).max()) if core_radius is None else core_radius
    core = X0.ball(0, r_core)
    rows, esc = [], []
    for s in states:
        r0 = s.space.distances_from(0)
        inner = r0 <= math.isqrt(int(r0.max()))
        e = min(1.0, max(0.0, 1.0 - math.fsum(s.weights[inner].tolist())))
        esc.append(e)
        rows.append((len(s.space), float(s.weights[core].max()), e))
    cls = "undetermined"
    if len(esc) > 1:
        if esc[-1] < 0.5 and esc[-1] <= esc[0]:
            cls = "strongly-continuous"
        elif esc[-1] > 0.5 and esc[-1] >= esc[0]:
            cls = "compact-vanishing"
    return MassProfile(rows, cls)
