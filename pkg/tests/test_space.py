import json
from collections import deque
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roekms.errors import EmptySpaceError, MetricError
from roekms.space import (
    TruncationSequence,
    from_distance_matrix,
    growth_profile,
    make_interval,
    make_squares,
    make_tree,
    space_from_dict,
)


def bfs_distances(X):
    """All-pairs shortest paths on the explicit parent/child graph."""
    N = len(X)
    out = np.full((N, N), -1, dtype=np.int64)
    for s in range(N):
        out[s, s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v in X.neighbours(u):
                if out[s, v] < 0:
                    out[s, v] = out[s, u] + 1
                    q.append(v)
    return out


def test_interval_basics():
    assert len(make_interval(1)) == 1
    assert make_interval(1).dist(0, 0) == 0
    assert make_interval(3).dist(0, 2) == 2
    assert growth_profile(make_interval(10), [2]) == [(2, 5)]


def test_empty_spaces_rejected():
    with pytest.raises(EmptySpaceError):
        make_interval(0)
    with pytest.raises(EmptySpaceError):
        make_squares(0)


def test_squares_labels_and_gaps():
    X = make_squares(3)
    assert [X.label(x) for x in range(3)] == ["1", "4", "9"]
    assert X.dist(0, 1) == 3
    assert make_squares(10).gaps().tolist() == [2 * k + 1 for k in range(1, 10)]


def test_squares_ball_sizes_radius_five():
    X = make_squares(5)
    sizes = X.ball_sizes(5)
    # closed balls: 4 sees both 1 and 9
    assert sizes.tolist() == [2, 3, 2, 1, 1]
    assert growth_profile(X, [5]) == [(5, 3)]
    # past the third point every ball has at most 2 points
    assert sizes[2:].max() == 2


def test_tree_sizes_and_distances():
    assert len(make_tree(2, 0)) == 1
    assert make_tree(2, 0).label(0) == "∅"
    assert len(make_tree(2, 3)) == 15
    X = make_tree(3, 2)
    assert X.dist(X.id_of((1, 2)), X.id_of((3,))) == 3
    assert growth_profile(make_tree(2, 6), [1]) == [(1, 4)]


def test_tree_breadth_first_ids():
    X = make_tree(2, 2)
    assert [X.word(x) for x in range(7)] == [(), (1,), (2,), (1, 1), (1, 2), (2, 1), (2, 2)]
    assert [X.label(x) for x in range(7)] == ["∅", "1", "2", "11", "12", "21", "22"]
    big = make_tree(12, 1)
    assert big.label(12) == "12"
    assert make_tree(12, 2).label(big.id_of((1,)) + 12) == "1.1"


@pytest.mark.parametrize("n,depth", [(n, d) for n in (1, 2, 3) for d in range(0, 6) if n ** d <= 243])
def test_tree_formula_matches_bfs(n, depth):
    X = make_tree(n, depth)
    assert np.array_equal(X.distance_matrix(), bfs_distances(X))


@pytest.mark.parametrize("X", [make_interval(12), make_squares(9), make_tree(2, 3), make_tree(3, 2)])
def test_metric_axioms_exact(X):
    D = X.distance_matrix()
    assert np.all(np.diagonal(D) == 0)
    off = D + np.eye(len(D), dtype=D.dtype)
    assert np.all(off > 0)
    assert np.array_equal(D, D.T)
    for y in range(len(D)):
        assert np.all(D <= D[:, [y]] + D[[y], :])


@pytest.mark.parametrize("X", [make_interval(15), make_squares(12), make_tree(2, 4), make_tree(3, 3)])
def test_balls_match_distance_matrix(X):
    D = X.distance_matrix()
    for x in range(len(X)):
        for r in (0, 1, 2, 5):
            assert X.ball(x, r).tolist() == np.flatnonzero(D[x] <= r).tolist()
            assert np.array_equal(X.distances_from(x), D[x])


def test_growth_profile_monotone_and_trivial_at_zero():
    for X in (make_interval(20), make_squares(20), make_tree(2, 5), make_tree(3, 3)):
        prof = growth_profile(X, [0, 1, 2, 3, 5, 8, 13])
        assert prof[0] == (0, 1)
        sizes = [m for _, m in prof]
        assert sizes == sorted(sizes)
    with pytest.raises(ValueError):
        growth_profile(make_interval(3), [-1])


def test_from_distance_matrix_valid():
    assert len(from_distance_matrix([[0]])) == 1
    X = from_distance_matrix([[0, 1], [1, 0]])
    assert len(X) == 2 and X.dist(0, 1) == 1


@pytest.mark.parametrize(
    "m,witness",
    [
        ([[0, 1, 3], [1, 0, 1], [3, 1, 0]], (0, 2, 1)),
        ([[0, 1], [2, 0]], (0, 1)),
        ([[0, 0], [0, 0]], (0, 1)),
        ([[1, 1], [1, 0]], (0, 0)),
    ],
)
def test_from_distance_matrix_witnesses(m, witness):
    with pytest.raises(MetricError) as err:
        from_distance_matrix(m)
    assert err.value.witness == witness


def test_from_distance_matrix_rejects_non_square():
    with pytest.raises(MetricError):
        from_distance_matrix([[0, 1]])


def test_serialisation_round_trip():
    for X in (make_interval(4), make_squares(4), make_tree(2, 2)):
        d = json.loads(X.to_json())
        assert d["dist"] == "formula"
        Y = space_from_dict(d)
        assert np.array_equal(X.distance_matrix(), Y.distance_matrix())
        assert [p["label"] for p in d["points"]] == [X.label(x) for x in range(len(X))]
    C = from_distance_matrix([[0, 2, 3], [2, 0, 1], [3, 1, 0]])
    d = C.to_dict()
    assert d["dist"] == [[], [2], [3, 1]]
    assert np.array_equal(space_from_dict(d).distance_matrix(), C.distance_matrix())


@pytest.mark.parametrize(
    "seq,pairs",
    [
        (TruncationSequence.intervals(), [(3, 10), (10, 40)]),
        (TruncationSequence.squares(), [(3, 10), (10, 30)]),
        (TruncationSequence.trees(2), [(0, 3), (2, 5)]),
        (TruncationSequence.trees(3), [(1, 3)]),
    ],
)
def test_truncations_nested_and_isometric(seq, pairs):
    for D, D2 in pairs:
        assert seq.check_nested(D, D2)
        assert seq.embed(len(seq.at(D)) - 1, D, D2) == len(seq.at(D)) - 1


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 4), st.data())
def test_tree_word_id_round_trip(n, depth, data):
    X = make_tree(n, depth)
    x = data.draw(st.integers(0, len(X) - 1))
    w = X.word(x)
    assert X.id_of(w) == x
    assert len(w) == X.lengths[x]
    blocks = X.cylinder_blocks(w)
    members = {int(i) for a, b in blocks for i in range(a, b)}
    expected = {y for y in range(len(X)) if X.word(y)[: len(w)] == w}
    assert members == expected


def test_tree_common_prefix_vectorised():
    X = make_tree(3, 3)
    xs, ys = np.array(list(product(range(len(X)), repeat=2))).T
    lcp = X.common_prefix_lengths(xs, ys)
    for x, y, l in zip(xs[::37], ys[::37], lcp[::37]):
        a, b = X.word(x), X.word(y)
        k = 0
        while k < min(len(a), len(b)) and a[k] == b[k]:
            k += 1
        assert l == k
