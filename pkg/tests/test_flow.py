import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roekms.diagonal import Diagonal
from roekms.errors import MagnitudeError
from roekms.flow import Potential, analytic_evolve, coarseness_modulus, evolve, named_potential, shells
from roekms.operator import BandOperator, isometry_of, random_band_operator
from roekms.space import make_interval, make_squares, make_tree
from roekms.translation import PartialTranslation, random_partial_translation


def append_map(X, y):
    dom = [x for x in range(len(X)) if X.lengths[x] + len(y) <= X.depth]
    return PartialTranslation(X, dom, [X.id_of(X.word(x) + tuple(y)) for x in dom])


def test_named_potentials():
    X = make_tree(2, 3)
    assert np.array_equal(named_potential("word-length", X).values, X.lengths)
    I = make_interval(5)
    assert named_potential("word-length", I).values.tolist() == [0, 1, 2, 3, 4]
    assert np.allclose(named_potential("log-label", I).values, np.log1p(np.arange(5)))
    S = make_squares(4)
    assert np.allclose(named_potential("log-sqrt-label", S).values, np.log([1, 2, 3, 4]))
    with pytest.raises(ValueError):
        named_potential("log-sqrt-label", I)
    with pytest.raises(ValueError):
        named_potential("log-label", X)
    with pytest.raises(ValueError):
        named_potential("nope", I)


def test_potential_validation():
    X = make_interval(3)
    with pytest.raises(ValueError):
        Potential(X, [0, 1])
    with pytest.raises(ValueError):
        Potential(X, [0, np.inf, 1])
    h = Potential(X, [0, 1, 2])
    with pytest.raises(ValueError):
        h.values[0] = 5


def test_coarseness_examples():
    X = make_tree(2, 5)
    assert coarseness_modulus(Potential(X, np.full(len(X), 3.0)), [1, 2, 5]).pairs == [(1, 0.0), (2, 0.0), (5, 0.0)]
    assert coarseness_modulus(named_potential("word-length", X), [1])(1) == 1
    I = make_interval(100)
    prof = coarseness_modulus(named_potential("log-label", I), [1, 2, 5, 10])
    for r, w in prof.pairs:
        assert w == pytest.approx(math.log1p(r), abs=1e-15)
    ws = [w for _, w in prof.pairs]
    assert ws == sorted(ws)


def test_evolve_trivial_cases():
    X = make_tree(2, 3)
    h = named_potential("word-length", X)
    a = random_band_operator(X, 2, np.random.default_rng(0))
    assert evolve(a, h, 0.0).equals(a)
    d = BandOperator.from_diagonal(Diagonal(X, np.arange(len(X), dtype=float)))
    assert evolve(d, h, 1.3).equals(d)
    assert analytic_evolve(d, h, 2.0).equals(d)
    assert analytic_evolve(a, h, 0.0).equals(a)


def test_evolve_append_isometry_phase():
    X = make_tree(2, 4)
    h = named_potential("word-length", X)
    y = (1, 2)
    v = isometry_of(append_map(X, y))
    t = 0.37
    assert evolve(v, h, t).equals(v * np.exp(1j * t * len(y)), atol=1e-15)
    beta = 1.1
    assert analytic_evolve(v.H, h, beta).equals(v.H * math.exp(beta * len(y)), atol=1e-12)


def test_analytic_overflow_guard():
    X = make_interval(1000)
    h = named_potential("word-length", X)
    a = BandOperator.matrix_unit(X, 0, 999)
    with pytest.raises(MagnitudeError) as err:
        analytic_evolve(a, h, -1.0)
    assert err.value.witness == (0, 999)
    assert err.value.exponent == pytest.approx(-999.0)
    analytic_evolve(a, h, 0.5)


def test_shell_tables_match_spaces():
    for kind, X, name in [
        ("interval", make_interval(30), "word-length"),
        ("interval", make_interval(30), "log-label"),
        ("squares", make_squares(30), "log-sqrt-label"),
        ("squares", make_squares(30), "log-label"),
    ]:
        h, m = shells(kind, name, 30)
        assert np.allclose(h, named_potential(name, X).values, atol=1e-15)
        assert not np.any(m)
    h, m = shells("tree", "word-length", 4, n=3)
    X = make_tree(3, 4)
    for k in range(5):
        assert h[k] == k
        assert math.exp(m[k]) == pytest.approx(np.sum(X.lengths == k))
    with pytest.raises(ValueError):
        shells("interval", "log-sqrt-label", 5)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-2, 2), st.floats(-2, 2))
def test_flow_is_automorphism_and_group(seed, t, s):
    rng = np.random.default_rng(seed)
    X = [make_tree(2, 4), make_interval(20), make_squares(15)][seed % 3]
    r = 9 if X.kind == "squares" else 2
    h = named_potential("log-sqrt-label" if X.kind == "squares" else "word-length", X)
    a = random_band_operator(X, r, rng)
    b = random_band_operator(X, r, rng)
    sa, sb = evolve(a, h, t), evolve(b, h, t)
    assert evolve(a @ b, h, t).equals(sa @ sb, atol=1e-12)
    assert evolve(a.H, h, t).equals(sa.H, atol=1e-12)
    assert sa.propagation == a.propagation
    assert np.allclose(np.abs(sa.entries()[2]), np.abs(a.entries()[2]), atol=1e-15)
    assert evolve(sa, h, s).equals(evolve(a, h, t + s), atol=1e-12)
    b1, b2 = t / 2, s / 2
    lhs = analytic_evolve(analytic_evolve(a, h, b1), h, b2)
    assert lhs.equals(analytic_evolve(a, h, b1 + b2), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_strong_continuity_bound(seed):
    rng = np.random.default_rng(seed)
    X = make_tree(2, 4)
    h = named_potential("word-length", X)
    f = random_partial_translation(X, 2, rng)
    d = Diagonal(X, rng.normal(size=len(X)) + 1j * rng.normal(size=len(X)))
    a = d @ isometry_of(f)
    jumps = h.values[f.image] - h.values[f.domain]
    for t, s in [(0.0, 0.1), (1.0, 1.001), (-2.0, 3.0), (0.5, 0.5)]:
        diff = evolve(a, h, t) - evolve(a, h, s)
        lhs = np.abs(diff.entries()[2]).max() if diff.nnz else 0.0
        bound = (np.abs(np.exp(1j * (t - s) * jumps) - 1).max() if len(f) else 0.0) * np.abs(d.values).max()
        assert lhs <= bound + 1e-12
