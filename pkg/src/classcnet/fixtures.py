"""Small named graphs used by tests, the CLI and the verification suite."""
from __future__ import annotations

import numpy as np

from ._random import as_generator
from .matrixkit import random_orthogonal, rotation2
from .netgraph import Edge, NetworkGraph, Node, cut_edges


def single_loop(sign: float = 1.0) -> NetworkGraph:
    """One N=1 node with S = (sign) and a self-loop edge 0."""
    return NetworkGraph([Node(0, [[sign]])], [Edge(0, (0, 1), (0, 1))])


def two_node(theta_a: float, theta_b: float) -> NetworkGraph:
    """Nodes A=0, B=1 with rotation S-matrices.

    Edges 0, 1 run A -> B (out-channel k to in-channel k) and edges 2, 3
    run B -> A the same way.
    """
    nodes = [Node(0, rotation2(theta_a)), Node(1, rotation2(theta_b))]
    edges = [
        Edge(0, (0, 1), (1, 1)),
        Edge(1, (0, 2), (1, 2)),
        Edge(2, (1, 1), (0, 1)),
        Edge(3, (1, 2), (0, 2)),
    ]
    return NetworkGraph(nodes, edges)


def two_node_cut(theta_a: float, theta_b: float) -> tuple[NetworkGraph, int, int]:
    """Two-node fixture with every edge cut.

    Returns ``(graph, lead_in, lead_out)`` where the lead pair passes through
    node B only (in-channel 1 to out-channel 1), so the single connecting
    trail has weight cos^2(theta_b).
    """
    g = cut_edges(two_node(theta_a, theta_b), [0, 1, 2, 3])
    # edge 0 (lead-in half) enters B channel 1; lead-out half of edge 2 is id 6
    return g, 0, 6


def two_node_half_cut(theta_a: float, theta_b: float) -> tuple[NetworkGraph, int, int]:
    """Two-node fixture with edges 0 and 2 cut; leads enter and leave B on channel 1.

    Connecting trails: straight through B (cos^2 b), or round through A
    (sin^2 b cos^2 a).
    """
    g = cut_edges(two_node(theta_a, theta_b), [0, 2])
    return g, 0, 5


def self_loop_pair(theta: float) -> NetworkGraph:
    """One N=2 rotation node whose two out-channels loop straight back.

    Edge 0 runs out 1 -> in 1 and edge 1 runs out 2 -> in 2.  Both leave the
    same node, so the mean of G(1, 0) picks up the order-z^2 path through
    edge 0 twice and does not vanish.
    """
    return NetworkGraph([Node(0, rotation2(theta))],
                        [Edge(0, (0, 1), (0, 1)), Edge(1, (0, 2), (0, 2))])


def ring(n: int, matrices=None) -> NetworkGraph:
    """Cycle of ``n`` N=1 nodes; edge k runs from node k to node k+1."""
    matrices = matrices or [[[1.0]]] * n
    nodes = [Node(k, matrices[k]) for k in range(n)]
    edges = [Edge(k, (k, 1), ((k + 1) % n, 1)) for k in range(n)]
    return NetworkGraph(nodes, edges)


def open_chain(n_nodes: int) -> tuple[NetworkGraph, int, int]:
    """Ring of N=1 nodes cut once: a straight chain between a single lead pair."""
    g = cut_edges(ring(n_nodes), [n_nodes - 1])
    return g, n_nodes - 1, n_nodes


def single_theta_node(theta: float) -> tuple[NetworkGraph, int, int]:
    """One N=2 rotation node with all four channels on leads.

    Lead-in 0 enters channel 1, lead-out 2 leaves channel 1.
    """
    nodes = [Node(0, rotation2(theta))]
    edges = [Edge(0, None, (0, 1)), Edge(1, None, (0, 2)),
             Edge(2, (0, 1), None), Edge(3, (0, 2), None)]
    return NetworkGraph(nodes, edges), 0, 2


def permutation_graph(perm_matrices: dict, wiring) -> NetworkGraph:
    """Graph with explicit S-matrices ``{node: S}`` and wiring ``[(src, ch, dst, ch)]``."""
    nodes = [Node(k, s) for k, s in perm_matrices.items()]
    edges = [Edge(k, (a, i), (b, j)) for k, (a, i, b, j) in enumerate(wiring)]
    return NetworkGraph(nodes, edges)


def random_closed_graph(random_source, max_edges: int = 10, max_degree: int = 3,
                        min_edges: int = 2, connected: bool = True) -> NetworkGraph:
    """Random closed multigraph with random orthogonal S-matrices.

    Node degrees are drawn from 1..max_degree until the edge budget is
    reached; out-slots are matched to in-slots by a uniform random
    bijection.  With ``connected`` the draw is repeated until the graph is
    (strongly) connected.
    """
    rng = as_generator(random_source)
    while True:
        degrees = []
        budget = int(rng.integers(min_edges, max_edges + 1))
        while sum(degrees) < budget:
            d = int(rng.integers(1, max_degree + 1))
            if sum(degrees) + d > max_edges:
                d = max_edges - sum(degrees)
            degrees.append(d)
        outs = [(n, c) for n, d in enumerate(degrees) for c in range(1, d + 1)]
        ins = list(outs)
        order = rng.permutation(len(ins))
        edges = [Edge(k, outs[k], ins[order[k]]) for k in range(len(outs))]
        if connected and not _weakly_connected(len(degrees), edges):
            continue
        nodes = [Node(n, random_orthogonal(d, rng)) for n, d in enumerate(degrees)]
        return NetworkGraph(nodes, edges)


def random_open_fixture(random_source, max_edges: int = 10, max_degree: int = 3, n_cut: int | None = None):
    """Random closed graph with 1-2 edges cut; returns (graph, lead_in, lead_out)."""
    rng = as_generator(random_source)
    g = random_closed_graph(rng, max_edges=max_edges, max_degree=max_degree, min_edges=3)
    k = n_cut if n_cut is not None else int(rng.integers(1, 3))
    cut = sorted(int(e) for e in rng.choice(g.n_edges, size=min(k, g.n_edges), replace=False))
    g_open = cut_edges(g, cut)
    lead_in = int(rng.choice(g_open.leads_in))
    lead_out = int(rng.choice(g_open.leads_out))
    return g_open, lead_in, lead_out


def _weakly_connected(n_nodes, edges) -> bool:
    parent = list(range(n_nodes))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in edges:
        a, b = find(e.source[0]), find(e.target[0])
        parent[a] = b
    return len({find(k) for k in range(n_nodes)}) == 1


def bundled() -> dict:
    """Named closed fixtures available to the CLI (``--graph fixture:NAME``)."""
    return {
        "single_loop": single_loop(),
        "two_node": two_node(np.pi / 4, np.pi / 4),
        "two_node_generic": two_node(0.3, 1.1),
    }
