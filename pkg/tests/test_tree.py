from collections import deque

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.localfield import LocalFieldSpec
from artifact.tree import (
    INF,
    SIGMA,
    X_MINUS,
    X_PLUS,
    Vertex,
    act,
    ball,
    children,
    distance,
    edges_within,
    frame,
    gmatrix,
    label,
    make_edge,
    mat_inv,
    mat_mul,
    mobius,
    neighbor_by_label,
    neighbors,
    parity,
    t_matrix,
)


def bfs(start, verts, q):
    vs, seen, dq = set(verts), {start: 0}, deque([start])
    while dq:
        v = dq.popleft()
        for w in neighbors(v, q):
            if w in vs and w not in seen:
                seen[w] = seen[v] + 1
                dq.append(w)
    return seen


@pytest.mark.parametrize("q", [2, 3])
def test_distance_matches_bfs(q):
    verts = ball(SIGMA, 3, q)
    for a in verts:
        d = bfs(a, verts, q)
        assert all(d[b] == distance(a, b) for b in verts)


@pytest.mark.parametrize("q,r", [(2, 1), (2, 3), (3, 2)])
def test_ball_sizes(q, r):
    # around an edge: 2 * (1 + q + ... + q^r)
    assert len(ball(SIGMA, r, q)) == 2 * sum(q**i for i in range(r + 1))
    assert len(ball(X_PLUS, r, q, "forward")) == sum(q**i for i in range(r + 1))
    assert len(edges_within(ball(SIGMA, r, q))) == len(ball(SIGMA, r, q)) - 1


def test_labels_and_neighbours():
    q = 3
    v = Vertex(2, ((0, 1), (1, 2)))
    for w in neighbors(v, q):
        assert neighbor_by_label(v, label(v, w)) == w
    assert label(v, neighbors(v, q)[0]) is INF
    assert make_edge(X_PLUS, X_MINUS) == SIGMA
    with pytest.raises(ValueError):
        make_edge(X_PLUS, Vertex(2, ()))
    assert parity(X_MINUS) == 1 and all(parity(c) == 1 for c in children(X_PLUS, q))


SPEC = LocalFieldSpec(2, 1, "mixed", 24)
ent = st.integers(-8, 8)


matrices = st.tuples(ent, ent, ent, ent).filter(
    lambda m: (m[0] * m[3] - m[1] * m[2]) % 2**6 != 0
).map(lambda m: gmatrix(SPEC, [[m[0], m[1]], [m[2], m[3]]]))


@settings(max_examples=40, deadline=None)
@given(matrices, matrices)
def test_action_is_an_action(g, h):
    for v in ball(SIGMA, 2, 2):
        assert act(mat_mul(g, h), v) == act(g, act(h, v))


@settings(max_examples=40, deadline=None)
@given(matrices)
def test_action_preserves_distance(g):
    verts = ball(SIGMA, 2, 2)
    imgs = {v: act(g, v) for v in verts}
    for a in verts:
        for b in verts:
            assert distance(imgs[a], imgs[b]) == distance(a, b)
    gi = mat_inv(g)
    assert all(act(gi, imgs[v]) == v for v in verts)


def test_frames_and_t():
    spec = LocalFieldSpec(3, 1, "equal", 20)
    for v in ball(SIGMA, 2, 3):
        h = frame(spec, v)
        assert act(h, X_PLUS) == v
        # the child with label c goes to the child with label c
        for c in range(3):
            assert act(h, neighbor_by_label(X_PLUS, c)) == neighbor_by_label(v, c)
    t = t_matrix(spec)
    assert act(t, X_PLUS) == Vertex(1, ())
    assert act(t_matrix(spec, -1), X_PLUS) == X_MINUS
    # GL2(O) fixes x_plus and acts on labels through GL2(k)
    k = spec.k
    for g in [((1, 1), (0, 1)), ((0, 1), (1, 0)), ((2, 0), (1, 1))]:
        G = gmatrix(spec, g)
        assert act(G, X_PLUS) == X_PLUS
        for lam in [INF, 0, 1, 2]:
            assert label(X_PLUS, act(G, neighbor_by_label(X_PLUS, lam))) == mobius(k, g, lam)
