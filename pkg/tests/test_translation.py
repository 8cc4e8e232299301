import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roekms.diagonal import Diagonal
from roekms.space import make_interval, make_squares, make_tree
from roekms.translation import (
    PartialTranslation,
    compose,
    identity,
    image_under,
    inverse,
    pullback_diag,
    random_partial_translation,
    separated_partition,
    shift,
    split_fixed,
)


def test_compose_shifts():
    X = make_interval(10)
    f = shift(X, 1, range(9))
    g = shift(X, 1, range(9))
    h = compose(g, f)
    assert h.mapping == {x: x + 2 for x in range(8)}
    assert h == shift(X, 2)


def test_compose_identities():
    X = make_tree(2, 3)
    f = random_partial_translation(X, 2, np.random.default_rng(1))
    assert compose(f, identity(X, f.dom)) == f
    assert compose(f, inverse(f)) == identity(X, f.img)


def test_inverse_examples():
    X = make_interval(10)
    assert inverse(identity(X)) == identity(X)
    f = shift(X, 1, range(9))
    assert inverse(f) == shift(X, -1, range(1, 10))
    assert inverse(f).dom == frozenset(range(1, 10))
    assert inverse(f).displacement == f.displacement == 1


def test_partial_translation_validation():
    X = make_interval(5)
    with pytest.raises(ValueError):
        PartialTranslation(X, [0, 1], [2, 2])
    with pytest.raises(ValueError):
        PartialTranslation(X, [0, 0], [1, 2])
    with pytest.raises(IndexError):
        PartialTranslation(X, [0], [5])
    empty = PartialTranslation(X, [], [])
    assert len(empty) == 0 and empty.displacement == 0


def test_image_under():
    X = make_interval(6)
    f = shift(X, 2)
    assert image_under(f, []) == frozenset()
    assert image_under(identity(X, [1, 2]), {0, 1, 2, 3}) == {1, 2}
    assert image_under(f, {0, 3, 5}) == {2, 5}


def test_split_fixed_examples():
    X = make_interval(5)
    fixed, free = split_fixed(identity(X))
    assert fixed == identity(X) and len(free) == 0
    fixed, free = split_fixed(shift(X, 1))
    assert len(fixed) == 0 and free == shift(X, 1)
    mixed = PartialTranslation(X, [0, 1, 2, 3], [0, 1, 3, 2])
    fixed, free = split_fixed(mixed)
    assert fixed.dom == {0, 1} and free.dom == {2, 3}


def test_separated_partition_interval():
    X = make_interval(10)
    P = separated_partition(range(10), 2, X)
    assert P.classes == [(0, 3, 6, 9), (1, 4, 7), (2, 5, 8)]
    assert P.is_valid(X, range(10))


def test_separated_partition_zero_separation():
    X = make_tree(2, 3)
    P = separated_partition(X.ids, 0, X)
    assert len(P) == 1 and P.is_valid(X, X.ids)


def test_separated_partition_tree():
    X = make_tree(2, 4)
    P = separated_partition(X.ids, 2, X)
    assert P.is_valid(X, X.ids)
    assert len(P) <= 1 + P.max_degree
    # exhaustive strict separation check
    for cls in P.classes:
        for i, x in enumerate(cls):
            for y in cls[i + 1 :]:
                assert X.dist(x, y) > 2


def test_separated_partition_rejects_negative():
    with pytest.raises(ValueError):
        separated_partition([0], -1, make_interval(2))


def test_pullback_examples():
    X = make_interval(5)
    a = Diagonal(X, np.arange(5.0))
    f = shift(X, 1)
    assert pullback_diag(a, f).values.tolist() == [1, 2, 3, 4, 0]
    g = identity(X, [1, 3])
    assert pullback_diag(a, g).values.tolist() == [0, 1, 0, 3, 0]
    one = Diagonal.constant(X)
    h = PartialTranslation(X, [0, 4], [2, 1])
    assert pullback_diag(one, h).values.tolist() == [1, 0, 0, 0, 1]
    assert pullback_diag(np.arange(5.0), f).tolist() == [1, 2, 3, 4, 0]


def test_serialisation():
    X = make_tree(2, 3)
    f = random_partial_translation(X, 2, np.random.default_rng(4))
    assert PartialTranslation.from_dict(X, f.to_dict()) == f


SPACES = [make_tree(2, 4), make_interval(12)]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1), st.integers(0, 2**32 - 1))
def test_inverse_involution_and_displacement(which, seed):
    X = SPACES[which]
    rng = np.random.default_rng(seed)
    f = random_partial_translation(X, 2, rng)
    g = random_partial_translation(X, 3, rng)
    assert inverse(inverse(f)) == f
    assert f.displacement <= 2
    assert compose(g, f).displacement <= f.displacement + g.displacement
    fixed, free = split_fixed(f)
    assert not free.fixed_points()
    assert {**fixed.mapping, **free.mapping} == f.mapping
    assert fixed.dom.isdisjoint(free.dom)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 1), st.integers(0, 2**32 - 1))
def test_set_identity_for_images(which, seed):
    X = SPACES[which]
    rng = np.random.default_rng(seed)
    f = random_partial_translation(X, 2, rng)
    g = random_partial_translation(X, 2, rng)
    A = set(np.flatnonzero(rng.random(len(X)) < 0.5).tolist())
    B = set(np.flatnonzero(rng.random(len(X)) < 0.5).tolist())
    lhs = image_under(f, A) & image_under(g, B)
    rhs = image_under(g, image_under(compose(inverse(g), f), A) & B)
    assert lhs == rhs


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0, 1, 2, 3, 5]))
def test_separated_partition_property(seed, s):
    rng = np.random.default_rng(seed)
    X = [make_interval(30), make_squares(15), make_tree(2, 4), make_tree(3, 2)][seed % 4]
    A = np.flatnonzero(rng.random(len(X)) < 0.7)
    P = separated_partition(A, s, X)
    assert P.is_valid(X, A)
    assert len(P) <= 1 + P.max_degree
