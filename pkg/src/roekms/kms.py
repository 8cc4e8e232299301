"""Partition functions, Gibbs states and KMS verification.

States default to the diagonal kind: nonnegative point weights plus an
optional mass that has escaped the truncation.  Evaluating one on an
operator only reads the diagonal, so ``phi = phi o E`` holds by construction.
:class:`MatrixState` keeps a full density matrix so that this factorisation
can be tested instead of assumed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .diagonal import Diagonal
from .errors import ConditioningError, DivergenceError, MagnitudeError
from .flow import EXP_LIMIT, Potential, analytic_evolve
from .operator import BandOperator, isometry_of, random_band_operator
from .space import FiniteSpace
from .translation import PartialTranslation, random_partial_translation

__all__ = [
    "DiagonalState",
    "MatrixState",
    "KmsReport",
    "log_partition_function",
    "partition_function",
    "gibbs_state",
    "kms_defect_direct",
    "kms_defect_criterion",
    "kms_audit",
    "trace_to_kms",
    "kms_to_trace",
    "condition_state",
    "sc_part",
    "random_pairs",
    "random_translations",
    "matrix_unit_constraints",
    "matrix_unit_solutions",
]

NORMALISATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiagonalState:
    """Point weights ``w`` with ``sum(w) + mass_at_infinity == 1``.

    ``escape``, when given, says through which points of the truncation the
    escaped mass leaves (for a tree: how the mass beyond depth ``D`` splits
    over the subtrees hanging below the level-``D`` words).  It is optional
    and only used by cylinder masses that account for the tail.
    """

    space: FiniteSpace
    weights: np.ndarray
    mass_at_infinity: float = 0.0
    escape: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.space),):
            raise ValueError(f"expected {len(self.space)} weights, got shape {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        m = float(self.mass_at_infinity)
        if not 0.0 <= m <= 1.0:
            raise ValueError(f"mass at infinity {m} outside [0, 1]")
        total = math.fsum(w.tolist()) + m
        if abs(total - 1.0) > NORMALISATION_TOL:
            raise ValueError(f"weights plus escaped mass sum to {total!r}, not 1")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mass_at_infinity", m)
        if self.escape is not None:
            e = np.asarray(self.escape, dtype=float).copy()
            if e.shape != w.shape or np.any(e < 0):
                raise ValueError("escape profile must be a nonnegative vector over the points")
            if abs(math.fsum(e.tolist()) - m) > NORMALISATION_TOL:
                raise ValueError("escape profile must add up to the mass at infinity")
            e.setflags(write=False)
            object.__setattr__(self, "escape", e)

    def __call__(self, a) -> complex:
        if isinstance(a, BandOperator):
            d = a.diagonal()
        elif isinstance(a, Diagonal):
            d = a.values
        else:
            d = np.asarray(a)
        return complex(np.dot(self.weights, d))

    def mass(self, ids: Iterable[int]) -> float:
        idx = np.fromiter(ids, dtype=np.int64)
        return math.fsum(self.weights[idx].tolist())

    def product_value(self, a: BandOperator, b: BandOperator) -> complex:
        """``phi(ab)`` without forming ``ab``."""
        diag = np.asarray(a.matrix.multiply(b.matrix.T).sum(axis=1)).ravel()
        return complex(np.dot(self.weights, diag))

    def diagonal_weights(self) -> np.ndarray:
        return self.weights

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["id", "label", "weight"])
        for x, w in enumerate(self.weights.tolist()):
            wr.writerow([x, self.space.label(x), f"{w:.17g}"])
        return buf.getvalue()


class MatrixState:
    """``phi(a) = tr(rho a)`` for a positive semidefinite density of trace 1."""

    def __init__(self, density: BandOperator, tol: float = 1e-12):
        rho = density.to_dense()
        if not np.allclose(rho, rho.conj().T, atol=tol, rtol=0):
            raise ValueError("density must be Hermitian")
        if np.linalg.eigvalsh(rho).min() < -tol:
            raise ValueError("density must be positive semidefinite")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > tol:
            raise ValueError(f"density has trace {tr!r}, not 1")
        self.density = density
        self.space = density.space

    def __call__(self, a) -> complex:
        if isinstance(a, Diagonal):
            a = BandOperator.from_diagonal(a)
        return complex(self.density.matrix.T.multiply(a.matrix).sum())

    def product_value(self, a: BandOperator, b: BandOperator) -> complex:
        return self(a @ b)

    def diagonal_weights(self) -> np.ndarray:
        return self.density.diagonal().real

    def off_diagonal_mass(self) -> float:
        m = self.density.matrix.tolil()
        m.setdiag(0)
        m = m.tocsr()
        return float(np.abs(m.data).sum()) if m.nnz else 0.0


@dataclass
class KmsReport:
    beta: float
    defect_direct: float | None = None
    defect_criterion: float | None = None
    samples: int = 0
    witness: dict = field(default_factory=dict)

    def worst(self) -> float:
        vals = [v for v in (self.defect_direct, self.defect_criterion) if v is not None]
        return max(vals) if vals else 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_space(X: FiniteSpace, h: Potential):
    if h.space is not X and len(h.space) != len(X):
        raise ValueError("potential does not live on this space")


def _normalised_exp(expo: np.ndarray) -> tuple[np.ndarray, float]:
    """``exp(expo) / sum`` and ``log(sum)``, summed exactly in id order."""
    m = float(expo.max())
    e = np.exp(expo - m)
    s = math.fsum(e.tolist())
    return e / s, m + math.log(s)


def log_partition_function(X: FiniteSpace, h: Potential, beta: float) -> float:
    _check_space(X, h)
    expo = -beta * h.values
    m = float(expo.max())
    return m + math.log(math.fsum(np.exp(expo - m).tolist()))


def partition_function(X: FiniteSpace, h: Potential, beta: float) -> float:
    """``Z(beta) = sum_x exp(-beta h(x))`` via a shifted exponential sum."""
    lz = log_partition_function(X, h, beta)
    if lz > EXP_LIMIT:
        k = int(np.argmax(-beta * h.values))
        raise MagnitudeError(f"log Z = {lz:.6g} overflows", exponent=lz, witness=k)
    return math.exp(lz)


def gibbs_state(X: FiniteSpace, h: Potential, beta: float) -> DiagonalState:
    """``w(x) = exp(-beta h(x)) / Z(beta)``.

    Computed in shifted form, so it never overflows even when ``Z`` itself
    would.
    """
    _check_space(X, h)
    w, _ = _normalised_exp(-beta * h.values)
    return DiagonalState(X, w)


def kms_defect_direct(
    phi,
    h: Potential,
    beta: float,
    pairs: Sequence[tuple[BandOperator, BandOperator]],
) -> KmsReport:
    """Largest ``|phi(a sigma_{i beta}(b)) - phi(b a)|`` over the supplied pairs."""
    worst, at = 0.0, None
    for k, (a, b) in enumerate(pairs):
        lhs = phi.product_value(a, analytic_evolve(b, h, beta))
        rhs = phi.product_value(b, a)
        d = abs(lhs - rhs)
        if at is None or d > worst:
            worst, at = d, k
    witness = {} if at is None else {"kind": "pair", "index": at}
    return KmsReport(beta, defect_direct=worst, samples=len(pairs), witness=witness)


def _criterion_gap(w: np.ndarray, hv: np.ndarray, beta: float, f: PartialTranslation) -> float:
    if len(f) == 0:
        return 0.0
    expo = beta * (hv[f.domain] - hv[f.image])
    k = int(np.argmax(np.abs(expo)))
    if abs(expo[k]) > EXP_LIMIT:
        raise MagnitudeError(
            f"exponent {expo[k]:.6g} exceeds {EXP_LIMIT}",
            exponent=float(expo[k]),
            witness=(int(f.domain[k]), int(f.image[k])),
        )
    lhs = math.fsum(w[f.image].tolist())
    rhs = math.fsum((w[f.domain] * np.exp(expo)).tolist())
    return abs(lhs - rhs)


def kms_defect_criterion(
    phi,
    h: Potential,
    beta: float,
    translations: Sequence[PartialTranslation],
) -> KmsReport:
    """Largest ``|phi(chi_{f(A)}) - phi(chi_A exp(beta (h - h o f)))|``.

    Only the diagonal weights of ``phi`` enter; this is the criterion for
    ``phi o E`` to be KMS.
    """
    w = phi.diagonal_weights()
    worst, at = 0.0, None
    for k, f in enumerate(translations):
        d = _criterion_gap(w, h.values, beta, f)
        if at is None or d > worst:
            worst, at = d, k
    witness = {} if at is None else {"kind": "translation", "index": at}
    return KmsReport(beta, defect_criterion=worst, samples=len(translations), witness=witness)


def kms_audit(phi, h, beta, pairs=(), translations=()) -> KmsReport:
    """Run both verifiers and merge the reports."""
    d = kms_defect_direct(phi, h, beta, pairs)
    c = kms_defect_criterion(phi, h, beta, translations)
    witness = d.witness if (d.defect_direct or 0) >= (c.defect_criterion or 0) else c.witness
    return KmsReport(
        beta,
        defect_direct=d.defect_direct,
        defect_criterion=c.defect_criterion,
        samples=d.samples + c.samples,
        witness=witness,
    )


def trace_to_kms(tau: DiagonalState, h: Potential, beta: float) -> DiagonalState:
    """Reweight a tracial diagonal functional by ``exp(-beta h)`` and normalise.

    The uniform trace goes to the Gibbs state bit for bit: the log-weights are
    shifted by their maximum first, which makes them exactly zero there.
    """
    if tau.mass_at_infinity:
        raise ValueError("only finitely supported traces can be reweighted")
    w = tau.weights
    if not np.any(w > 0):
        raise ConditioningError("zero normaliser")
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    logw = logw - logw.max()
    out, _ = _normalised_exp(logw - beta * h.values)
    return DiagonalState(tau.space, out)


def kms_to_trace(phi: DiagonalState, h: Potential, beta: float) -> DiagonalState:
    """Inverse of :func:`trace_to_kms`: reweight by ``exp(+beta h)``."""
    return trace_to_kms(phi, h, -beta)


def condition_state(phi: DiagonalState, c) -> DiagonalState:
    """``phi_c(a) = phi(a c) / phi(c)`` for a nonnegative diagonal ``c``."""
    cv = c.values if isinstance(c, Diagonal) else np.asarray(c)
    cv = np.real_if_close(cv).astype(float)
    if np.any(cv < 0):
        raise ValueError("conditioning element must be nonnegative")
    num = phi.weights * cv
    z = math.fsum(num.tolist())
    if z <= 0:
        raise ConditioningError("phi(c) = 0; conditioning is undefined")
    return DiagonalState(phi.space, num / z)


def sc_part(phis: Sequence[DiagonalState], tol: float = 1e-6) -> tuple[DiagonalState, float]:
    """Pointwise limit of weights along nested truncations.

    Weights are read on the shallowest truncation (ids are prefix stable).
    The last state supplies the limit; the last step must move every core
    weight by at most ``tol`` or :class:`DivergenceError` is raised.  The
    residual ``1 - sum(limit)`` is the mass escaping every finite set.
    """
    if not phis:
        raise ValueError("need at least one state")
    core = len(phis[0].space)
    W = np.array([p.weights[:core] for p in phis])
    change = float(np.abs(W[-1] - W[-2]).max()) if len(W) > 1 else 0.0
    if change > tol:
        raise DivergenceError(f"core weights still move by {change:.3g} > {tol:g}", max_change=change)
    lim = W[-1]
    residual = min(1.0, max(0.0, 1.0 - math.fsum(lim.tolist())))
    return DiagonalState(phis[0].space, lim, mass_at_infinity=residual), residual


# Seeded test populations.


def random_pairs(
    space: FiniteSpace,
    count: int,
    rng: np.random.Generator,
    r: float = 2,
) -> list[tuple[BandOperator, BandOperator]]:
    """Operator pairs cycling through matrix units, partial isometries and random band operators."""
    out = []
    N = len(space)
    for k in range(count):
        kind = k % 3
        if kind == 0:
            x = int(rng.integers(N))
            ball = space.ball(x, r)
            y = int(ball[rng.integers(len(ball))])
            z = int(rng.integers(N))
            ball = space.ball(z, r)
            w = int(ball[rng.integers(len(ball))])
            a = BandOperator.matrix_unit(space, x, y)
            b = BandOperator.matrix_unit(space, y, x) if rng.random() < 0.5 else BandOperator.matrix_unit(space, z, w)
        elif kind == 1:
            f = random_partial_translation(space, r, rng)
            g = random_partial_translation(space, r, rng)
            a = isometry_of(f)
            b = isometry_of(g).H if rng.random() < 0.5 else isometry_of(f).H
        else:
            a = random_band_operator(space, r, rng)
            b = random_band_operator(space, r, rng)
        out.append((a, b))
    return out


def random_translations(
    space: FiniteSpace,
    count: int,
    rng: np.random.Generator,
    r: float = 2,
) -> list[PartialTranslation]:
    return [random_partial_translation(space, r, rng, density=float(rng.uniform(0.2, 0.9))) for _ in range(count)]


# Matrix-unit linear algebra: which densities can be KMS at all?


def matrix_unit_constraints(X: FiniteSpace, h: Potential, beta: float) -> sp.csr_matrix:
    """Linear conditions on ``vec(rho)`` from the KMS condition on matrix units.

    Unknown ``rho[p, q]`` sits at column ``p * N + q``; ``phi(c) = sum rho[y, x] c[x, y]``.
    Two families of pairs are used:

    * ``(e_{x,y}, e_{y,x})`` gives ``exp(-beta (h(y) - h(x))) rho[x,x] = rho[y,y]``;
    * ``(e_{x,y}, e_{z,z})`` with ``z`` in ``{x, y}``, ``x != y``, gives ``rho[y,x] = 0``.

    Rows of the first family are scaled to unit max coefficient.
    """
    N = len(X)
    hv = h.values
    rows, cols, vals = [], [], []
    r = 0
    for x in range(N):
        for y in range(N):
            if x == y:
                continue
            c = math.exp(-beta * (hv[y] - hv[x]))
            s = max(c, 1.0)
            rows += [r, r]
            cols += [x * N + x, y * N + y]
            vals += [c / s, -1.0 / s]
            r += 1
            rows.append(r)
            cols.append(y * N + x)
            vals.append(1.0)
            r += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(r, N * N))


def matrix_unit_solutions(X: FiniteSpace, h: Potential, beta: float) -> np.ndarray:
    """Orthonormal basis (columns, reshaped ``N x N``) of all densities passing the matrix-unit KMS test."""
    N = len(X)
    M = matrix_unit_constraints(X, h, beta).toarray()
    basis = scipy.linalg.null_space(M)
    return basis.T.reshape(-1, N, N)
