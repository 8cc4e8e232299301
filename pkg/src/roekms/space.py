"""Finite truncations of uniformly locally finite metric spaces.

Three families are built in: integer segments ``{0, ..., n-1}``, the
square numbers ``{1, 4, 9, ..., n^2}`` with the metric inherited from the
integers, and the ``n``-branching tree cut at a given depth.  Anything else
can be loaded from an explicit distance matrix.

Points are always the contiguous ids ``0 .. N-1``.  Tree words are ordered
breadth first (the empty word, then ``1 .. n``, then ``11, 12, ...``) so a
shallower tree is an id-prefix of a deeper one, which makes truncation
embeddings the identity on ids.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptySpaceError, MetricError

__all__ = [
    "Point",
    "FiniteSpace",
    "LineSpace",
    "TreeSpace",
    "MatrixSpace",
    "TruncationSequence",
    "make_interval",
    "make_squares",
    "make_tree",
    "from_distance_matrix",
    "growth_profile",
    "space_from_dict",
    "EMPTY_WORD_LABEL",
]

EMPTY_WORD_LABEL = "∅"

# Dense distance matrices are only materialised below this many points.
DENSE_LIMIT = 6000


@dataclass(frozen=True)
class Point:
    id: int
    label: str | None = None


class FiniteSpace:
    """A finite metric space on the ids ``0 .. N-1``.

    Subclasses supply :meth:`pair_distances`; the rest is derived from it.
    Instances are immutable after construction.
    """

    kind = "custom"

    def __init__(self, size: int):
        if size < 1:
            raise EmptySpaceError("a space needs at least one point")
        self._size = int(size)

    def __len__(self) -> int:
        return self._size

    @property
    def size(self) -> int:
        return self._size

    @property
    def params(self) -> dict:
        return {}

    def label(self, x: int) -> str:
        return str(x)

    @cached_property
    def points(self) -> list[Point]:
        return [Point(i, self.label(i)) for i in range(self._size)]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self._size, dtype=np.int64)

    def pair_distances(self, xs, ys) -> np.ndarray:
        raise NotImplementedError

    def dist(self, x: int, y: int):
        return self.pair_distances(np.array([x]), np.array([y]))[0].item()

    def distances_from(self, x: int) -> np.ndarray:
        ids = self.ids
        return self.pair_distances(np.full(ids.shape, x, dtype=np.int64), ids)

    def ball(self, x: int, r: float) -> np.ndarray:
        """Ids of the closed ball ``{y : d(x, y) <= r}``, ascending."""
        return np.flatnonzero(self.distances_from(x) <= r)

    def distance_matrix(self) -> np.ndarray:
        if self._size > DENSE_LIMIT:
            raise MemoryError(f"refusing a dense {self._size}x{self._size} distance matrix")
        if "_dense" not in self.__dict__:
            i, j = np.meshgrid(self.ids, self.ids, indexing="ij")
            d = self.pair_distances(i.ravel(), j.ravel()).reshape(i.shape)
            d.setflags(write=False)
            self.__dict__["_dense"] = d
        return self.__dict__["_dense"]

    def ball_sizes(self, r: float) -> np.ndarray:
        return np.array([len(self.ball(x, r)) for x in range(self._size)])

    def pairs_within(self, r: float, strict: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """All ordered pairs ``(x, y)``, ``x != y``, at distance ``<= r`` (``< r`` if strict)."""
        xs, ys = [], []
        for x in range(self._size):
            b = self.ball(x, r)
            b = b[b != x]
            if strict and len(b):
                b = b[self.pair_distances(np.full(b.shape, x), b) < r]
            xs.append(np.full(b.shape, x, dtype=np.int64))
            ys.append(b.astype(np.int64))
        if not xs:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        return np.concatenate(xs), np.concatenate(ys)

    def to_dict(self, dense: bool | None = None) -> dict:
        """JSON-ready description; ``dist`` is ``"formula"`` for built-in families."""
        out = {
            "kind": self.kind,
            "params": self.params,
            "points": [{"id": p.id, "label": p.label} for p in self.points],
        }
        if dense is None:
            dense = self.kind == "custom"
        if dense:
            d = self.distance_matrix()
            out["dist"] = [[_json_number(d[i, j]) for j in range(i)] for i in range(self._size)]
        else:
            out["dist"] = "formula"
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(kind={self.kind!r}, params={self.params}, size={self._size})"


def _json_number(v):
    v = v.item() if hasattr(v, "item") else v
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


class LineSpace(FiniteSpace):
    """Points sitting on the integer line at strictly increasing coordinates."""

    def __init__(self, coords: Sequence[int], kind: str, params: dict):
        coords = np.asarray(coords, dtype=np.int64)
        super().__init__(len(coords))
        if np.any(np.diff(coords) <= 0):
            raise ValueError("coordinates must be strictly increasing")
        coords.setflags(write=False)
        self.coords = coords
        self.kind = kind
        self._params = dict(params)

    @property
    def params(self) -> dict:
        return dict(self._params)

    def label(self, x: int) -> str:
        return str(int(self.coords[x]))

    def pair_distances(self, xs, ys) -> np.ndarray:
        return np.abs(self.coords[np.asarray(xs)] - self.coords[np.asarray(ys)])

    def distances_from(self, x: int) -> np.ndarray:
        return np.abs(self.coords - self.coords[x])

    def ball(self, x: int, r: float) -> np.ndarray:
        c = self.coords[x]
        lo = np.searchsorted(self.coords, c - r, side="left")
        hi = np.searchsorted(self.coords, c + r, side="right")
        return np.arange(lo, hi, dtype=np.int64)

    def ball_sizes(self, r: float) -> np.ndarray:
        lo = np.searchsorted(self.coords, self.coords - r, side="left")
        hi = np.searchsorted(self.coords, self.coords + r, side="right")
        return hi - lo

    def gaps(self) -> np.ndarray:
        return np.diff(self.coords)


class TreeSpace(FiniteSpace):
    """Words of length ``<= depth`` over ``{1, ..., n}`` with the tree metric.

    ``d(x, y) = |x| + |y| - 2 * lcp(x, y)``.  Ids run breadth first, so the
    words of length ``k`` occupy ``offsets[k] .. offsets[k+1]-1`` in
    lexicographic order and every prefix cylinder meets each level in one
    contiguous block.
    """

    kind = "tree"

    def __init__(self, n: int, depth: int):
        if n < 1:
            raise ValueError("branching number must be positive")
        if depth < 0:
            raise ValueError("depth must be nonnegative")
        self.n = int(n)
        self.depth = int(depth)
        widths = np.array([self.n**k for k in range(self.depth + 1)], dtype=np.int64)
        offsets = np.zeros(self.depth + 2, dtype=np.int64)
        offsets[1:] = np.cumsum(widths)
        widths.setflags(write=False)
        offsets.setflags(write=False)
        self.level_widths = widths
        self.offsets = offsets
        super().__init__(int(offsets[-1]))

    @property
    def params(self) -> dict:
        return {"n": self.n, "depth": self.depth}

    @cached_property
    def lengths(self) -> np.ndarray:
        """Word length of every point (the distance to the root)."""
        out = np.repeat(np.arange(self.depth + 1, dtype=np.int64), self.level_widths)
        out.setflags(write=False)
        return out

    def level_of(self, ids) -> np.ndarray:
        return np.searchsorted(self.offsets, np.asarray(ids), side="right") - 1

    def word(self, x: int) -> tuple[int, ...]:
        k = int(self.level_of(x))
        r = int(x - self.offsets[k])
        letters = []
        for _ in range(k):
            r, d = divmod(r, self.n)
            letters.append(d + 1)
        return tuple(reversed(letters))

    def id_of(self, word: Iterable[int]) -> int:
        word = tuple(word)
        if len(word) > self.depth:
            raise KeyError(f"word {word} is deeper than the truncation")
        r = 0
        for a in word:
            if not 1 <= a <= self.n:
                raise KeyError(f"letter {a} outside 1..{self.n}")
            r = r * self.n + (a - 1)
        return int(self.offsets[len(word)]) + r

    def contains_word(self, word) -> bool:
        return len(word) <= self.depth and all(1 <= a <= self.n for a in word)

    def label(self, x: int) -> str:
        w = self.word(x)
        if not w:
            return EMPTY_WORD_LABEL
        sep = "" if self.n < 10 else "."
        return sep.join(str(a) for a in w)

    def parent(self, x: int) -> int | None:
        k = int(self.level_of(x))
        if k == 0:
            return None
        r = int(x - self.offsets[k])
        return int(self.offsets[k - 1]) + r // self.n

    def children(self, x: int) -> np.ndarray:
        k = int(self.level_of(x))
        if k >= self.depth:
            return np.empty(0, dtype=np.int64)
        r = int(x - self.offsets[k])
        start = int(self.offsets[k + 1]) + r * self.n
        return np.arange(start, start + self.n, dtype=np.int64)

    def neighbours(self, x: int) -> list[int]:
        p = self.parent(x)
        out = [] if p is None else [p]
        out.extend(int(c) for c in self.children(x))
        return out

    def common_prefix_lengths(self, xs, ys) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        lx, ly = self.level_of(xs), self.level_of(ys)
        rx, ry = xs - self.offsets[lx], ys - self.offsets[ly]
        lcp = np.zeros(np.broadcast(xs, ys).shape, dtype=np.int64)
        n = self.n
        for j in range(1, self.depth + 1):
            ok = (lx >= j) & (ly >= j)
            if not ok.any():
                break
            ax = rx // np.power(n, np.where(ok, lx - j, 0))
            ay = ry // np.power(n, np.where(ok, ly - j, 0))
            lcp = np.where(ok & (ax == ay), j, lcp)
        return lcp

    def pair_distances(self, xs, ys) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        lcp = self.common_prefix_lengths(xs, ys)
        return self.level_of(xs) + self.level_of(ys) - 2 * lcp

    def distances_from(self, x: int) -> np.ndarray:
        kx = int(self.level_of(x))
        rx = int(x - self.offsets[kx])
        out = np.empty(self.size, dtype=np.int64)
        for k in range(self.depth + 1):
            ranks = np.arange(self.level_widths[k], dtype=np.int64)
            lcp = np.zeros_like(ranks)
            for j in range(1, min(k, kx) + 1):
                same = ranks // self.n ** (k - j) == rx // self.n ** (kx - j)
                lcp[same] = j
            out[self.offsets[k] : self.offsets[k + 1]] = kx + k - 2 * lcp
        return out

    def ball(self, x: int, r: float) -> np.ndarray:
        seen = {int(x): 0}
        queue = deque([int(x)])
        while queue:
            u = queue.popleft()
            du = seen[u]
            if du + 1 > r:
                continue
            for v in self.neighbours(u):
                if v not in seen:
                    seen[v] = du + 1
                    queue.append(v)
        return np.array(sorted(seen), dtype=np.int64)

    def cylinder_blocks(self, prefix) -> list[tuple[int, int]]:
        """Half-open id ranges, one per level, covering ``prefix``'s cylinder."""
        prefix = tuple(prefix)
        m = len(prefix)
        if m > self.depth:
            return []
        r = self.id_of(prefix) - int(self.offsets[m])
        blocks = []
        for k in range(m, self.depth + 1):
            width = self.n ** (k - m)
            start = int(self.offsets[k]) + r * width
            blocks.append((start, start + width))
        return blocks


class MatrixSpace(FiniteSpace):
    """A custom space backed by a validated dense distance matrix."""

    kind = "custom"

    def __init__(self, matrix: np.ndarray, labels: Sequence[str] | None = None):
        super().__init__(matrix.shape[0])
        m = np.array(matrix, dtype=float)
        m.setflags(write=False)
        self._matrix = m
        self._labels = None if labels is None else [str(s) for s in labels]

    def label(self, x: int) -> str:
        return str(x) if self._labels is None else self._labels[x]

    def pair_distances(self, xs, ys) -> np.ndarray:
        return self._matrix[np.asarray(xs), np.asarray(ys)]

    def distances_from(self, x: int) -> np.ndarray:
        return self._matrix[x]

    def distance_matrix(self) -> np.ndarray:
        return self._matrix


def make_interval(n: int) -> LineSpace:
    if n < 1:
        raise EmptySpaceError("interval needs n >= 1")
    return LineSpace(np.arange(n), "interval", {"n": int(n)})


def make_squares(n: int) -> LineSpace:
    """The first ``n`` squares ``1, 4, ..., n^2``; labels keep the ambient integer."""
    if n < 1:
        raise EmptySpaceError("squares needs n >= 1")
    k = np.arange(1, n + 1, dtype=np.int64)
    return LineSpace(k * k, "squares", {"n": int(n)})


def make_tree(n: int, depth: int) -> TreeSpace:
    return TreeSpace(n, depth)


def from_distance_matrix(D, labels=None) -> MatrixSpace:
    """Validate ``D`` as a metric (strictly, no tolerance) and wrap it."""
    m = np.asarray(D, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise MetricError("distance matrix must be square")
    if m.shape[0] == 0:
        raise EmptySpaceError("a space needs at least one point")
    if not np.all(np.isfinite(m)):
        raise MetricError("distances must be finite")
    neg = np.argwhere(m < 0)
    if len(neg):
        i, j = neg[0]
        raise MetricError(f"negative distance d({i},{j})", (int(i), int(j)))
    diag = np.flatnonzero(np.diagonal(m) != 0)
    if len(diag):
        i = int(diag[0])
        raise MetricError(f"d({i},{i}) must be 0", (i, i))
    asym = np.argwhere(m != m.T)
    if len(asym):
        i, j = asym[0]
        raise MetricError(f"asymmetric: d({i},{j}) != d({j},{i})", (int(i), int(j)))
    off = m + np.eye(len(m))
    zero = np.argwhere(off == 0)
    if len(zero):
        i, j = zero[0]
        raise MetricError(f"distinct points {i},{j} at distance 0", (int(i), int(j)))
    # d(x, z) <= d(x, y) + d(y, z) for every intermediate y
    for y in range(len(m)):
        via = m[:, y][:, None] + m[y, :][None, :]
        bad = np.argwhere(m > via)
        if len(bad):
            x, z = bad[0]
            raise MetricError(
                f"triangle inequality fails: d({x},{z})={m[x, z]} > d({x},{y})+d({y},{z})={via[x, z]}",
                (int(x), int(z), int(y)),
            )
    return MatrixSpace(m, labels)


def growth_profile(X: FiniteSpace, radii: Iterable[float]) -> list[tuple[float, int]]:
    """Largest closed-ball cardinality at each radius."""
    out = []
    for r in radii:
        if r < 0:
            raise ValueError("radii must be nonnegative")
        out.append((r, int(X.ball_sizes(r).max())))
    return out


def space_from_dict(data: dict) -> FiniteSpace:
    kind = data["kind"]
    params = data.get("params", {})
    if kind == "interval":
        return make_interval(params["n"])
    if kind == "squares":
        return make_squares(params["n"])
    if kind == "tree":
        return make_tree(params["n"], params["depth"])
    if kind == "custom":
        tri = data["dist"]
        N = len(tri)
        m = np.zeros((N, N))
        for i, row in enumerate(tri):
            for j, v in enumerate(row):
                m[i, j] = m[j, i] = v
        labels = [p.get("label") for p in data.get("points", [])] or None
        return from_distance_matrix(m, labels)
    raise ValueError(f"unknown space kind {kind!r}")


class TruncationSequence:
    """Nested finite truncations ``X_D`` of one infinite space.

    ``factory(D)`` builds the truncation at size/depth parameter ``D``.  All
    built-in families are id-prefix stable, so :meth:`embed` is the identity
    on ids; :meth:`check_nested` verifies the isometry claim directly.
    """

    def __init__(self, kind: str, factory: Callable[[int], FiniteSpace], **params):
        self.kind = kind
        self.factory = factory
        self.params = params

    def at(self, D: int) -> FiniteSpace:
        return self.factory(D)

    def embed(self, x: int, D: int, D2: int) -> int:
        if D2 < D:
            raise ValueError("embeddings go from shallower to deeper truncations")
        if not 0 <= x < len(self.at(D)):
            raise IndexError(x)
        return x

    def check_nested(self, D: int, D2: int) -> bool:
        small, big = self.at(D), self.at(D2)
        ids = small.ids
        if len(ids) > len(big):
            return False
        if any(small.label(x) != big.label(self.embed(x, D, D2)) for x in ids):
            return False
        i, j = np.meshgrid(ids, ids, indexing="ij")
        return bool(np.array_equal(small.pair_distances(i.ravel(), j.ravel()), big.pair_distances(i.ravel(), j.ravel())))

    @classmethod
    def intervals(cls) -> "TruncationSequence":
        return cls("interval", make_interval)

    @classmethod
    def squares(cls) -> "TruncationSequence":
        return cls("squares", make_squares)

    @classmethod
    def trees(cls, n: int) -> "TruncationSequence":
        return cls("tree", lambda D: make_tree(n, D), n=n)

    def __repr__(self) -> str:
        return f"TruncationSequence({self.kind!r}, {self.params})"
