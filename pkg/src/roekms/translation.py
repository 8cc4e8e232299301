"""Partial translations: injective maps ``A -> X`` with bounded displacement.

Point sets are passed around as any iterable of ids and returned as
``frozenset``.  ``f[A]`` follows the convention ``f(A & Dom(f))`` so images
are defined for every ``A``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .diagonal import Diagonal
from .space import FiniteSpace

__all__ = [
    "PartialTranslation",
    "SeparatedPartition",
    "compose",
    "inverse",
    "image_under",
    "split_fixed",
    "restrict",
    "separated_partition",
    "pullback_diag",
    "identity",
    "shift",
    "random_partial_translation",
]


class PartialTranslation:
    """A partial bijection of ``space`` stored as parallel domain/image arrays.

    Pairs are kept sorted by domain id.  The empty map is a legal value.
    """

    __slots__ = ("space", "domain", "image", "__dict__")

    def __init__(self, space: FiniteSpace, domain, image):
        dom = np.asarray(domain, dtype=np.int64).ravel()
        img = np.asarray(image, dtype=np.int64).ravel()
        if dom.shape != img.shape:
            raise ValueError("domain and image must have equal length")
        N = len(space)
        if len(dom) and (dom.min() < 0 or dom.max() >= N or img.min() < 0 or img.max() >= N):
            raise IndexError("ids outside the space")
        if len(np.unique(dom)) != len(dom):
            raise ValueError("domain has repeated points")
        if len(np.unique(img)) != len(img):
            raise ValueError("map is not injective")
        order = np.argsort(dom, kind="stable")
        dom, img = dom[order], img[order]
        dom.setflags(write=False)
        img.setflags(write=False)
        self.space = space
        self.domain = dom
        self.image = img

    @classmethod
    def from_mapping(cls, space: FiniteSpace, mapping: Mapping[int, int]) -> "PartialTranslation":
        items = sorted(mapping.items())
        return cls(space, [a for a, _ in items], [b for _, b in items])

    @cached_property
    def mapping(self) -> dict[int, int]:
        return dict(zip(self.domain.tolist(), self.image.tolist()))

    @cached_property
    def dom(self) -> frozenset[int]:
        return frozenset(self.domain.tolist())

    @cached_property
    def img(self) -> frozenset[int]:
        return frozenset(self.image.tolist())

    @cached_property
    def displacement(self) -> float:
        """``max_{x in Dom} d(x, f(x))``; 0 for the empty map."""
        if len(self.domain) == 0:
            return 0
        return self.space.pair_distances(self.domain, self.image).max().item()

    def __call__(self, x: int) -> int:
        return self.mapping[x]

    def __len__(self) -> int:
        return len(self.domain)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PartialTranslation):
            return NotImplemented
        return (
            other.space is self.space
            and np.array_equal(self.domain, other.domain)
            and np.array_equal(self.image, other.image)
        )

    def __hash__(self):
        return hash((id(self.space), self.domain.tobytes(), self.image.tobytes()))

    def fixed_points(self) -> frozenset[int]:
        return frozenset(self.domain[self.domain == self.image].tolist())

    def to_dict(self) -> dict:
        return {"domain": self.domain.tolist(), "image": self.image.tolist()}

    @classmethod
    def from_dict(cls, space: FiniteSpace, data: dict) -> "PartialTranslation":
        return cls(space, data["domain"], data["image"])

    def __repr__(self) -> str:
        return f"PartialTranslation(|Dom|={len(self)}, displacement={self.displacement})"


@dataclass(frozen=True)
class SeparatedPartition:
    classes: list[tuple[int, ...]]
    separation: float
    max_degree: int = 0

    def __len__(self) -> int:
        return len(self.classes)

    def is_valid(self, X: FiniteSpace, A: Iterable[int]) -> bool:
        """Classes are disjoint, cover ``A`` and are strictly ``separation``-separated."""
        A = frozenset(A)
        seen: set[int] = set()
        for cls in self.classes:
            if seen.intersection(cls):
                return False
            seen.update(cls)
            c = np.array(cls, dtype=np.int64)
            if len(c) > 1:
                i, j = np.triu_indices(len(c), k=1)
                if np.any(X.pair_distances(c[i], c[j]) <= self.separation):
                    return False
        return seen == A


def identity(space: FiniteSpace, A: Iterable[int] | None = None) -> PartialTranslation:
    ids = space.ids if A is None else np.array(sorted(A), dtype=np.int64)
    return PartialTranslation(space, ids, ids)


def shift(space: FiniteSpace, k: int, domain: Iterable[int] | None = None) -> PartialTranslation:
    """``x -> x + k`` on ids, restricted to where the target exists."""
    dom = space.ids if domain is None else np.array(sorted(domain), dtype=np.int64)
    dom = dom[(dom + k >= 0) & (dom + k < len(space))]
    return PartialTranslation(space, dom, dom + k)


def _same_space(f: PartialTranslation, g: PartialTranslation):
    if f.space is not g.space:
        raise ValueError("partial translations live on different spaces")


def compose(g: PartialTranslation, f: PartialTranslation) -> PartialTranslation:
    """``g o f`` on ``f^-1[Dom(g)]``."""
    _same_space(f, g)
    gm = g.mapping
    dom, img = [], []
    for x, y in zip(f.domain.tolist(), f.image.tolist()):
        z = gm.get(y)
        if z is not None:
            dom.append(x)
            img.append(z)
    return PartialTranslation(f.space, dom, img)


def inverse(f: PartialTranslation) -> PartialTranslation:
    return PartialTranslation(f.space, f.image, f.domain)


def restrict(f: PartialTranslation, A: Iterable[int]) -> PartialTranslation:
    keep = np.isin(f.domain, np.fromiter(A, dtype=np.int64))
    return PartialTranslation(f.space, f.domain[keep], f.image[keep])


def image_under(f: PartialTranslation, A: Iterable[int]) -> frozenset[int]:
    """``f[A] = f(A & Dom(f))``."""
    m = f.mapping
    return frozenset(m[x] for x in A if x in m)


def split_fixed(f: PartialTranslation) -> tuple[PartialTranslation, PartialTranslation]:
    """Split ``f`` into its restriction to fixed points and the fixed-point-free rest."""
    fixed = f.domain == f.image
    return (
        PartialTranslation(f.space, f.domain[fixed], f.image[fixed]),
        PartialTranslation(f.space, f.domain[~fixed], f.image[~fixed]),
    )


def separated_partition(A: Iterable[int], s: float, X: FiniteSpace) -> SeparatedPartition:
    """Greedy colouring of ``{(x, y) : 0 < d(x, y) <= s}`` restricted to ``A``.

    Points are visited in ascending id order and take the lowest class not
    used by an already-coloured neighbour, so at most ``1 + max degree``
    classes appear.
    """
    if s < 0:
        raise ValueError("separation must be nonnegative")
    pts = sorted(set(int(a) for a in A))
    in_A = set(pts)
    colour: dict[int, int] = {}
    classes: list[list[int]] = []
    max_deg = 0
    for x in pts:
        nbrs = [int(y) for y in X.ball(x, s) if y != x and int(y) in in_A]
        max_deg = max(max_deg, len(nbrs))
        used = {colour[y] for y in nbrs if y in colour}
        c = 0
        while c in used:
            c += 1
        colour[x] = c
        if c == len(classes):
            classes.append([])
        classes[c].append(x)
    return SeparatedPartition([tuple(c) for c in classes], s, max_deg)


def pullback_diag(a, f: PartialTranslation):
    """``a_{o f}``: ``x -> a(f(x))`` on ``Dom(f)``, zero elsewhere.

    Accepts a :class:`Diagonal`, anything with ``.weights`` (a diagonal
    state), or a plain array; returns the same flavour (states come back as a
    :class:`Diagonal`).
    """
    wrap = True
    if isinstance(a, Diagonal):
        vals = a.values
    elif hasattr(a, "weights"):
        vals = np.asarray(a.weights)
    else:
        vals, wrap = np.asarray(a), False
    out = np.zeros(len(f.space), dtype=vals.dtype)
    out[f.domain] = vals[f.image]
    return Diagonal(f.space, out) if wrap else out


def random_partial_translation(
    space: FiniteSpace,
    r: float,
    rng: np.random.Generator,
    density: float = 0.6,
) -> PartialTranslation:
    """A random partial bijection with displacement ``<= r``.

    Points are visited in random order; each joins the domain with
    probability ``density`` and is sent to a uniformly chosen unused point of
    its closed ``r``-ball.
    """
    used: set[int] = set()
    dom, img = [], []
    for x in rng.permutation(len(space)).tolist():
        if rng.random() >= density:
            continue
        cand = [int(y) for y in space.ball(x, r) if int(y) not in used]
        if not cand:
            continue
        y = cand[int(rng.integers(len(cand)))]
        used.add(y)
        dom.append(x)
        img.append(y)
    return PartialTranslation(space, dom, img)
