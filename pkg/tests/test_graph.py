import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppsc_gossip.errors import DisconnectedPublicGraph, GraphError, IsolatedNode, NonPositiveWeight, UnstableWeight
from ppsc_gossip.graph import build_private, build_public, cycle_edges, path_edges


def test_cycle_lambda_closed_form():
    g = build_public(10, cycle_edges(10), 0.1)
    assert g.lambda_g == pytest.approx(0.1 * (2 - 2 * math.cos(2 * math.pi / 10)), abs=1e-12)
    assert g.lambda_g == pytest.approx(0.0381966011250105, abs=1e-12)
    assert g.contraction == pytest.approx(1 - g.lambda_g, abs=1e-12)


def test_two_node_complete():
    g = build_public(2, [(0, 1)], 0.5)
    assert g.lambda_g == pytest.approx(1.0)
    assert g.contraction == pytest.approx(0.0, abs=1e-15)


def test_disconnected_public():
    with pytest.raises(DisconnectedPublicGraph):
        build_public(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], 0.1)


def test_nonpositive_weight():
    with pytest.raises(NonPositiveWeight):
        build_public(3, path_edges(range(3)), 0.0)


def test_unstable_weight():
    with pytest.raises(UnstableWeight):
        build_public(2, [(0, 1)], 1.0)


def test_large_weight_warns_but_accepts():
    with pytest.warns(UserWarning, match="exceeds 1/n"):
        g = build_public(10, cycle_edges(10), 0.25)
    assert g.contraction < 1


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 5)], [(0, 1), (1, 0)]])
def test_bad_edges(edges):
    with pytest.raises(GraphError):
        build_public(3, edges, 0.1)


def test_private_two_edges():
    gp = build_private(4, [(0, 1), (2, 3)])
    assert (gp.q, gp.n_max, gp.r_dagger) == (2, 2, 1.0)


def test_private_path_and_edge():
    gp = build_private(5, [(0, 1), (1, 2), (3, 4)])
    assert (gp.q, gp.n_max) == (2, 3)
    assert gp.r_dagger == pytest.approx(0.5)
    assert gp.components == ((0, 1, 2), (3, 4))


def test_private_isolated_node():
    with pytest.raises(IsolatedNode) as info:
        build_private(3, [(0, 1)])
    assert info.value.node == 2


def test_single_node_network():
    gp = build_private(1, [])
    assert gp.q == 1 and gp.n_max == 1


def test_neighbor_table():
    gp = build_private(4, [(0, 1), (1, 2), (1, 3)])
    assert gp.neighbor_table[1, :3].tolist() == [0, 2, 3]
    assert gp.degrees.tolist() == [1, 3, 1, 1]


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(2, 15))
    # random spanning tree plus extra edges
    edges = {(draw(st.integers(0, i - 1)), i) for i in range(1, n)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=20))
    edges |= {(min(i, j), max(i, j)) for i, j in extra if i != j}
    return n, sorted(edges)


@given(connected_graphs())
def test_laplacian_properties(graph):
    n, edges = graph
    g = build_public(n, edges, 1.0 / n)
    assert np.abs(g.laplacian.sum(axis=1)).max() <= 1e-12
    assert np.allclose(g.laplacian, g.laplacian.T)
    # complete graphs with a = 1/n reach lambda_g = 1 exactly
    assert 0 < g.lambda_g <= 1 + 1e-12
    M = np.eye(n) - g.laplacian - np.ones((n, n)) / n
    ev = np.linalg.eigvalsh(M)
    assert np.all(np.abs(ev) < 1)


@settings(max_examples=50)
@given(connected_graphs(), st.randoms(use_true_random=False))
def test_components_invariant_under_relabeling(graph, rnd):
    n, edges = graph
    half = [e for e in edges if (e[0] + e[1]) % 2 == 0] or edges[:1]
    touched = {v for e in half for v in e}
    # give every untouched node a partner so no node is isolated
    spare = [v for v in range(n) if v not in touched]
    half = half + [(v, (v + 1) % n) for v in spare]
    half = sorted({(min(a, b), max(a, b)) for a, b in half})
    gp = build_private(n, half)
    perm = list(range(n))
    rnd.shuffle(perm)
    gq = build_private(n, [(perm[a], perm[b]) for a, b in half])
    assert sorted(gp.sizes) == sorted(gq.sizes)
    assert build_private(n, half).components == gp.components
