"""Finite-propagation operators on a finite space.

A :class:`BandOperator` wraps a canonical CSR matrix (no stored zeros, sorted
indices, complex128) together with the space indexing its rows and columns.
Entry ``(x, y)`` is ``<a delta_y, delta_x>``.
"""

from __future__ import annotations

from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.io
import scipy.sparse as sp

from .diagonal import Diagonal
from .errors import DimensionMismatchError
from .space import FiniteSpace
from .translation import PartialTranslation

__all__ = [
    "BandOperator",
    "propagation",
    "expectation",
    "isometry_of",
    "multiply",
    "add",
    "adjoint",
    "scale",
    "band_decompose",
    "reassemble",
    "random_band_operator",
]


def _canonical(m) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=np.complex128, copy=True)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


class BandOperator:
    def __init__(self, space: FiniteSpace, matrix):
        N = len(space)
        m = _canonical(matrix)
        if m.shape != (N, N):
            raise DimensionMismatchError(f"matrix shape {m.shape} does not match space of size {N}")
        self.space = space
        self.matrix = m

    # construction

    @classmethod
    def zero(cls, space: FiniteSpace) -> "BandOperator":
        N = len(space)
        return cls(space, sp.csr_matrix((N, N)))

    @classmethod
    def identity(cls, space: FiniteSpace) -> "BandOperator":
        return cls(space, sp.identity(len(space), format="csr"))

    @classmethod
    def from_triplets(cls, space: FiniteSpace, rows, cols, values) -> "BandOperator":
        N = len(space)
        return cls(space, sp.coo_matrix((np.asarray(values, dtype=np.complex128), (rows, cols)), shape=(N, N)))

    @classmethod
    def matrix_unit(cls, space: FiniteSpace, x: int, y: int, value: complex = 1.0) -> "BandOperator":
        """``e_{x,y}``: sends ``delta_y`` to ``delta_x``."""
        return cls.from_triplets(space, [x], [y], [value])

    @classmethod
    def from_diagonal(cls, d) -> "BandOperator":
        if isinstance(d, Diagonal):
            return cls(d.space, sp.diags(d.values.astype(np.complex128), format="csr"))
        raise TypeError("expected a Diagonal")

    @classmethod
    def from_dense(cls, space: FiniteSpace, arr) -> "BandOperator":
        return cls(space, sp.csr_matrix(np.asarray(arr, dtype=np.complex128)))

    @classmethod
    def from_dict(cls, space: FiniteSpace, data: dict) -> "BandOperator":
        vals = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data.get("im", [0.0] * len(data["re"])), dtype=float)
        return cls.from_triplets(space, data["rows"], data["cols"], vals)

    # inspection

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Row ids, column ids and values of the stored entries, in (row, col) order."""
        coo = self.matrix.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data

    @cached_property
    def propagation(self):
        """``max d(x, y)`` over nonzero entries; 0 for the zero operator."""
        if self.nnz == 0:
            return 0
        r, c, _ = self.entries()
        return self.space.pair_distances(r, c).max().item()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm_bound(self) -> float:
        """Crude operator-norm bound: the larger of max row and max column l1 norms."""
        a = abs(self.matrix)
        if self.nnz == 0:
            return 0.0
        return float(max(a.sum(axis=1).max(), a.sum(axis=0).max()))

    def equals(self, other: "BandOperator", atol: float = 0.0) -> bool:
        if other.space is not self.space:
            return False
        diff = (self.matrix - other.matrix).tocoo()
        return diff.nnz == 0 or float(np.abs(diff.data).max()) <= atol

    # algebra

    def _check(self, other: "BandOperator"):
        if not isinstance(other, BandOperator):
            raise TypeError(f"expected BandOperator, got {type(other).__name__}")
        if other.shape != self.shape:
            raise DimensionMismatchError(f"{self.shape} vs {other.shape}")

    def __add__(self, other: "BandOperator") -> "BandOperator":
        self._check(other)
        return BandOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "BandOperator") -> "BandOperator":
        self._check(other)
        return BandOperator(self.space, self.matrix - other.matrix)

    def __neg__(self) -> "BandOperator":
        return BandOperator(self.space, -self.matrix)

    def __matmul__(self, other):
        if isinstance(other, Diagonal):
            other = BandOperator.from_diagonal(other)
        self._check(other)
        return BandOperator(self.space, self.matrix @ other.matrix)

    def __rmatmul__(self, other):
        if isinstance(other, Diagonal):
            return BandOperator.from_diagonal(other) @ self
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            return BandOperator(self.space, self.matrix * c)
        return NotImplemented

    __rmul__ = __mul__

    @property
    def H(self) -> "BandOperator":
        return BandOperator(self.space, self.matrix.conj().T)

    # serialisation

    def to_dict(self) -> dict:
        r, c, v = self.entries()
        return {
            "rows": r.tolist(),
            "cols": c.tolist(),
            "re": v.real.tolist(),
            "im": v.imag.tolist(),
        }

    def write_matrix_market(self, target) -> None:
        scipy.io.mmwrite(target, self.matrix.tocoo(), field="complex")

    def __repr__(self) -> str:
        return f"BandOperator(N={self.shape[0]}, nnz={self.nnz}, propagation={self.propagation})"


def propagation(a: BandOperator):
    return a.propagation


def expectation(a: BandOperator) -> Diagonal:
    """Delete every off-diagonal entry."""
    return Diagonal(a.space, a.diagonal())


def isometry_of(f: PartialTranslation) -> BandOperator:
    """``v_f``: ``delta_x -> delta_{f(x)}`` on ``Dom(f)``, zero elsewhere."""
    return BandOperator.from_triplets(f.space, f.image, f.domain, np.ones(len(f)))


def multiply(a: BandOperator, b: BandOperator) -> BandOperator:
    return a @ b


def add(a: BandOperator, b: BandOperator) -> BandOperator:
    return a + b


def adjoint(a: BandOperator) -> BandOperator:
    return a.H


def scale(a: BandOperator, c: complex) -> BandOperator:
    return a * c


def _max_degree(rows: np.ndarray, cols: np.ndarray) -> int:
    if len(rows) == 0:
        return 0
    return int(max(np.bincount(rows).max(), np.bincount(cols).max()))


def band_decompose(a: BandOperator) -> list[tuple[Diagonal, PartialTranslation]]:
    """Write ``a = sum_i d_i v_{f_i}`` with each ``f_i`` a partial translation.

    The support of ``a`` is a bipartite graph (rows vs columns); a proper
    edge colouring of it is exactly a split into partial bijections.  Entries
    are scanned by id offset ``col - row`` and then by row, each taking the
    first colour free at both ends; when all ``Delta`` colours are blocked an
    alternating-path swap frees one.  So exactly ``Delta`` terms appear,
    ``Delta`` being the largest number of entries in a row or column.
    """
    rows, cols, vals = a.entries()
    if len(rows) == 0:
        return []
    delta = _max_degree(rows, cols)
    order = np.lexsort((cols, rows, cols - rows))
    row_at: list[dict[int, int]] = []  # colour -> {row: col}
    col_at: list[dict[int, int]] = []  # colour -> {col: row}

    def put(k, r, c):
        row_at[k][r] = c
        col_at[k][c] = r

    for idx in order.tolist():
        r, c = int(rows[idx]), int(cols[idx])
        k = next((k for k in range(len(row_at)) if r not in row_at[k] and c not in col_at[k]), None)
        if k is None and len(row_at) < delta:
            row_at.append({})
            col_at.append({})
            k = len(row_at) - 1
        if k is None:
            alpha = next(k for k in range(delta) if r not in row_at[k])
            beta = next(k for k in range(delta) if c not in col_at[k])
            # Walk the alpha/beta path from column c and swap its colours.
            path = []
            node, on_col, colour = c, True, alpha
            while True:
                table = col_at[colour] if on_col else row_at[colour]
                nxt = table.get(node)
                if nxt is None:
                    break
                path.append((colour, (nxt, node) if on_col else (node, nxt)))
                node, on_col = nxt, not on_col
                colour = beta if colour == alpha else alpha
            for colour, (pr, pc) in path:
                del row_at[colour][pr]
                del col_at[colour][pc]
            for colour, (pr, pc) in path:
                put(beta if colour == alpha else alpha, pr, pc)
            k = alpha
        put(k, r, c)

    lookup = {(int(r), int(c)): v for r, c, v in zip(rows, cols, vals)}
    N = len(a.space)
    terms = []
    for k in range(len(row_at)):
        pairs = sorted(col_at[k].items())  # (col, row) = (x, f(x))
        f = PartialTranslation(a.space, [p[0] for p in pairs], [p[1] for p in pairs])
        d = np.zeros(N, dtype=np.complex128)
        for x, y in pairs:
            d[y] = lookup[(y, x)]
        terms.append((Diagonal(a.space, d), f))
    return terms


def reassemble(space: FiniteSpace, terms: Iterable[tuple[Diagonal, PartialTranslation]]) -> BandOperator:
    out = BandOperator.zero(space)
    for d, f in terms:
        out = out + BandOperator.from_diagonal(d) @ isometry_of(f)
    return out


def random_band_operator(
    space: FiniteSpace,
    r: float,
    rng: np.random.Generator,
    density: float = 0.5,
) -> BandOperator:
    """Random operator with propagation ``<= r`` and entries of modulus ``<= 1``."""
    rows, cols = [], []
    for x in range(len(space)):
        ball = space.ball(x, r)
        keep = ball[rng.random(len(ball)) < density]
        rows.append(np.full(keep.shape, x, dtype=np.int64))
        cols.append(keep)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    mod = rng.random(len(rows))
    phase = np.exp(2j * np.pi * rng.random(len(rows)))
    return BandOperator.from_triplets(space, rows, cols, mod * phase)
