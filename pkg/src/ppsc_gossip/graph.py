"""Public and private communication graphs.

Nodes are ``0 .. n-1``. The public graph carries the averaging iterations
and must be connected; the private graph carries the PPSC shuffling and may
split into several components, but every node needs a private neighbour.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    DisconnectedPublicGraph,
    GraphError,
    IsolatedNode,
    NonPositiveWeight,
    UnstableWeight,
)


def _normalize_edges(n, edges):
    if n < 1:
        raise GraphError(f"node count must be positive, got {n}")
    seen = set()
    out = []
    for e in edges:
        i, j = (int(v) for v in e)
        if i == j:
            raise GraphError(f"self-loop at node {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge ({i}, {j}) outside node range 0..{n - 1}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphError(f"duplicate edge {key}")
        seen.add(key)
        out.append(key)
    return tuple(sorted(out))


def _components(n, edges):
    if not edges:
        labels = np.arange(n)
    else:
        rows = [i for i, _ in edges] + [j for _, j in edges]
        cols = [j for _, j in edges] + [i for i, _ in edges]
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        _, labels = connected_components(adj, directed=False)
    groups = {}
    for node, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(node)
    # order components by their smallest node
    return tuple(sorted((tuple(g) for g in groups.values()), key=lambda g: g[0]))


def _frozen(arr):
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PublicGraph:
    """Weighted public graph with its averaging map ``I - A``."""

    n: int
    edges: tuple
    a: float
    laplacian: np.ndarray = field(repr=False)
    lambda_g: float
    contraction: float
    neighbors: tuple = field(repr=False)

    @property
    def mixing(self) -> np.ndarray:
        """The one-step averaging matrix ``I - A``."""
        return np.eye(self.n) - self.laplacian

    def averaging_power(self, T: int) -> np.ndarray:
        """``(I - A)**T``; applying it equals ``T`` averaging steps."""
        return np.linalg.matrix_power(self.mixing, int(T))


def build_public(n: int, edges, a: float) -> PublicGraph:
    """Assemble the weighted Laplacian ``A = a (D - Adj)`` and its spectrum.

    ``contraction`` is the spectral radius of ``I - A - 11^T/n``, i.e. the
    per-step shrink factor of the disagreement. It equals ``1 - lambda_g``
    whenever ``a <= 1/n``; larger weights are accepted (with a warning) as
    long as the radius stays below one.
    """
    if not a > 0:
        raise NonPositiveWeight(f"edge weight a={a!r} must be positive")
    edges = _normalize_edges(n, edges)
    comps = _components(n, edges)
    if len(comps) > 1:
        raise DisconnectedPublicGraph(
            f"public graph has {len(comps)} components: {[list(c) for c in comps]}"
        )
    adj = np.zeros((n, n))
    for i, j in edges:
        adj[i, j] = adj[j, i] = 1.0
    lap = a * (np.diag(adj.sum(axis=1)) - adj)
    eig = np.linalg.eigvalsh(lap)
    if n == 1:
        lambda_g, contraction = 1.0, 0.0
    else:
        lambda_g = float(eig[1])
        # eigenvalues of I - A restricted to the disagreement subspace
        contraction = float(np.max(np.abs(1.0 - eig[1:])))
    if contraction >= 1.0:
        raise UnstableWeight(
            f"a={a} makes the averaging map non-contracting "
            f"(spectral radius {contraction:.6g} >= 1)"
        )
    if a > 1.0 / n:
        warnings.warn(
            f"public edge weight a={a} exceeds 1/n={1.0 / n:.6g}; accepted since "
            f"the averaging map still contracts (radius {contraction:.6g})",
            stacklevel=2,
        )
    nbrs = tuple(tuple(int(j) for j in np.flatnonzero(adj[i])) for i in range(n))
    return PublicGraph(
        n=n,
        edges=edges,
        a=float(a),
        laplacian=_frozen(lap),
        lambda_g=lambda_g,
        contraction=contraction,
        neighbors=nbrs,
    )


@dataclass(frozen=True)
class PrivateGraph:
    """Private graph split into connected components.

    ``neighbor_table[i, :degrees[i]]`` lists node ``i``'s private neighbours
    (padding is ``-1``), which is what the vectorised edge sampler needs.
    """

    n: int
    edges: tuple
    components: tuple
    degrees: np.ndarray = field(repr=False)
    neighbor_table: np.ndarray = field(repr=False)

    @property
    def q(self) -> int:
        return len(self.components)

    @property
    def sizes(self) -> tuple:
        return tuple(len(c) for c in self.components)

    @property
    def n_max(self) -> int:
        return max(self.sizes)

    @property
    def r_dagger(self) -> float:
        ratios = []
        for comp in self.components:
            deg = self.degrees[list(comp)]
            ratios.append(deg.min() / deg.max() if deg.max() > 0 else 1.0)
        return float(min(ratios))

    def component_edges(self, k: int) -> tuple:
        nodes = set(self.components[k])
        return tuple(e for e in self.edges if e[0] in nodes)

    def oriented_edges(self, k: int) -> tuple:
        """All (sender, receiver) pairs the selection rule can produce in component k."""
        out = []
        for i, j in self.component_edges(k):
            out.extend([(i, j), (j, i)])
        return tuple(sorted(out))


def build_private(n: int, edges) -> PrivateGraph:
    """Private graph with component metadata.

    A single-node network (``n == 1``) is accepted without edges as the
    degenerate one-agent case; shuffling is then the identity.
    """
    edges = _normalize_edges(n, edges)
    deg = np.zeros(n, dtype=np.int64)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    if n > 1:
        isolated = np.flatnonzero(deg == 0)
        if isolated.size:
            raise IsolatedNode(int(isolated[0]))
    table = -np.ones((n, max(1, int(deg.max(initial=0)))), dtype=np.int64)
    fill = np.zeros(n, dtype=np.int64)
    for i, j in edges:
        table[i, fill[i]] = j
        fill[i] += 1
        table[j, fill[j]] = i
        fill[j] += 1
    for i in range(n):
        table[i, : deg[i]] = np.sort(table[i, : deg[i]])
    return PrivateGraph(
        n=n,
        edges=edges,
        components=_components(n, edges),
        degrees=_frozen(deg),
        neighbor_table=_frozen(table),
    )


def cycle_edges(n: int):
    if n < 3:
        return [(0, 1)] if n == 2 else []
    return [(i, (i + 1) % n) for i in range(n)]


def path_edges(nodes):
    nodes = list(nodes)
    return list(zip(nodes[:-1], nodes[1:]))
