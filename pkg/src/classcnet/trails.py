"""Classical side: trail weights, exact trail sums and the history-dependent walk.

A node *history* is the list of passages ``(j, i)`` a trail makes through a
node, in order: enter on in-channel ``j``, leave on out-channel ``i`` (both
1-based).  Its weight is

    Omega = sign(pi) * prod_j S[pi(j), j] * det S[I, J]

with ``I`` and ``J`` the visited out/in channels in ascending order and
``pi`` the pairing read through those orderings.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import itertools
from typing import Sequence

import numpy as np

from . import config
from ._random import as_generator
from .errors import (DegeneratePrefixError, NonProbabilisticNodeError,
                     ParameterError, ResourceError)
from .matrixkit import minor_det, permutation_sign
from .netgraph import NetworkGraph

DEFAULT_CEILING = 1_000_000


@dataclasses.dataclass(frozen=True)
class Trail:
    edges: tuple
    closed: bool

    def __len__(self):
        return len(self.edges)


@dataclasses.dataclass(frozen=True)
class WeightReport:
    omega: float
    conditional_factors: tuple
    minor_value: float
    pairing_signature: int
    matched_product: float
    rows: tuple
    cols: tuple


def _check_history(s, visits):
    n = s.shape[0]
    js = [int(j) for j, _ in visits]
    is_ = [int(i) for _, i in visits]
    if len(set(js)) != len(js) or len(set(is_)) != len(is_):
        raise ParameterError(f"repeated channel in history {list(visits)}")
    if any(not 1 <= c <= n for c in js + is_):
        raise ParameterError(f"channel outside 1..{n} in history {list(visits)}")
    return js, is_


def _omega_value(s, visits) -> tuple[float, int, float, float, tuple, tuple]:
    js, is_ = _check_history(s, visits)
    cols = tuple(sorted(js))
    rows = tuple(sorted(is_))
    image = dict(zip(js, is_))
    # rank in sorted I of the image of the k-th smallest j
    rank = {i: k for k, i in enumerate(rows)}
    sign = permutation_sign([rank[image[j]] for j in cols])
    prod = 1.0
    for j, i in zip(js, is_):
        prod *= float(s[i - 1, j - 1])
    minor = minor_det(s, rows, cols)
    return sign * prod * minor, sign, prod, minor, rows, cols


def omega(s, visits: Sequence) -> WeightReport:
    """Weight of a node history together with its ingredients.

    ``conditional_factors[k]`` is Omega(first k+1 visits) / Omega(first k);
    it is NaN when the prefix weight vanishes.
    """
    s = np.asarray(s, dtype=float)
    visits = [tuple(v) for v in visits]
    value, sign, prod, minor, rows, cols = _omega_value(s, visits)
    factors = []
    prev = 1.0
    for k in range(1, len(visits) + 1):
        cur = _omega_value(s, visits[:k])[0] if k < len(visits) else value
        factors.append(cur / prev if prev != 0.0 else float("nan"))
        prev = cur
    return WeightReport(value, tuple(factors), minor, sign, prod, rows, cols)


def omega_value(s, visits) -> float:
    return _omega_value(np.asarray(s, dtype=float), [tuple(v) for v in visits])[0]


def pairing_sum(s, rows: Sequence[int], cols: Sequence[int]) -> float:
    """Sum of Omega over every bijection cols -> rows; equals det S[rows, cols]^2."""
    if len(rows) != len(cols):
        raise ParameterError("subset size mismatch")
    total = 0.0
    for image in itertools.permutations(rows):
        total += omega_value(s, list(zip(cols, image)))
    return total


def conditional_weight(s, prior: Sequence, j_new: int, i_new: int) -> float:
    """Omega(prior + (j_new, i_new)) / Omega(prior)."""
    s = np.asarray(s, dtype=float)
    prior = [tuple(v) for v in prior]
    den = omega_value(s, prior)
    num = omega_value(s, prior + [(j_new, i_new)])
    if den == 0.0:
        raise DegeneratePrefixError(f"history {prior} has zero weight")
    return num / den


def normalization_sum(s, prior: Sequence, j_new: int) -> float:
    """Sum of conditional weights over every out-channel not yet used."""
    s = np.asarray(s, dtype=float)
    prior = [tuple(v) for v in prior]
    used = {i for _, i in prior}
    return sum(conditional_weight(s, prior, j_new, i)
               for i in range(1, s.shape[0] + 1) if i not in used)


# -- trail bookkeeping ------------------------------------------------------------


def node_histories(g: NetworkGraph, trail: Trail) -> dict:
    """Per-node passage lists ``{node: [(j, i), ...]}`` in traversal order."""
    edges = list(trail.edges)
    pairs = list(zip(edges, edges[1:]))
    if trail.closed:
        pairs.append((edges[-1], edges[0]))
    out: dict = {}
    for a, b in pairs:
        ea, eb = g.edge(a), g.edge(b)
        if ea.target is None or eb.source is None or ea.target[0] != eb.source[0]:
            raise ParameterError(f"edges {a} and {b} are not joined by a node")
        out.setdefault(ea.target[0], []).append((ea.target[1], eb.source[1]))
    return out


def trail_weight(g: NetworkGraph, trail: Trail) -> float:
    if len(set(trail.edges)) != len(trail.edges):
        raise ParameterError("trail repeats an edge")
    w = 1.0
    for node, visits in node_histories(g, trail).items():
        w *= omega_value(g.node(node).S, visits)
    return w


class _Enumerator:
    def __init__(self, g: NetworkGraph, ceiling: int):
        self.g = g
        self.ceiling = ceiling
        self.zero = config.tol("vanishing")
        self.cache: dict = {}
        self.found: list = []
        self.expansions = 0

    def _node_weight(self, node, visits):
        key = (node, tuple(sorted(visits)))
        w = self.cache.get(key)
        if w is None:
            w = omega_value(self.g.node(node).S, visits)
            self.cache[key] = w
        return w

    def _record(self, path, hist, closed):
        if len(self.found) >= self.ceiling:
            raise ResourceError(f"more than {self.ceiling} trails; raise the ceiling or shrink the graph")
        w = 1.0
        for node, visits in hist.items():
            if visits:
                w *= self._node_weight(node, visits)
        self.found.append((Trail(tuple(path), closed), w))

    def run(self, start, stop=None):
        """Depth-first search from ``start``; closed if ``stop`` is None."""
        g = self.g
        hist = {n.id: [] for n in g.nodes}
        used = {start}
        path = [start]
        limit = 50 * self.ceiling

        def step(e):
            self.expansions += 1
            if self.expansions > limit:
                raise ResourceError("trail search exceeded its expansion budget")
            tgt = g.edge(e).target
            if tgt is None:
                return
            node, j = tgt
            s = g.node(node).S
            taken = {i for _, i in hist[node]}
            for i in range(1, s.shape[0] + 1):
                if i in taken or abs(s[i - 1, j - 1]) <= self.zero:
                    continue
                nxt = g.out_edge(node, i)
                if nxt is None:
                    continue
                hist[node].append((j, i))
                if (stop is None and nxt == start) or nxt == stop:
                    path.append(nxt)
                    self._record(path if stop is not None else path[:-1], hist, stop is None)
                    path.pop()
                elif nxt not in used and g.edge(nxt).target is not None:
                    used.add(nxt)
                    path.append(nxt)
                    step(nxt)
                    path.pop()
                    used.discard(nxt)
                hist[node].pop()

        step(start)
        self.found.sort(key=lambda tw: (len(tw[0].edges), tw[0].edges))
        return self.found


def enumerate_closed_trails(g: NetworkGraph, e, ceiling: int = DEFAULT_CEILING) -> list:
    """Every closed trail rooted at ``e`` with its weight, sorted by (length, edges).

    Branches through vanishing S-matrix entries are pruned: any history using
    such a passage has zero weight.
    """
    if e not in g.edge_index:
        raise ParameterError(f"unknown edge {e}")
    if not g.is_closed:
        raise ParameterError("closed-trail enumeration needs a closed graph")
    return _Enumerator(g, ceiling).run(e)


def enumerate_open_trails(g: NetworkGraph, e_in, e_out, ceiling: int = DEFAULT_CEILING) -> list:
    """Every open trail from lead-in ``e_in`` to lead-out ``e_out`` with its weight."""
    if e_in not in g.leads_in:
        raise ParameterError(f"edge {e_in} is not a lead-in")
    if e_out not in g.leads_out:
        raise ParameterError(f"edge {e_out} is not a lead-out")
    return _Enumerator(g, ceiling).run(e_in, e_out)


def classical_mean_trace_green(g: NetworkGraph, e, z, ceiling: int = DEFAULT_CEILING) -> complex:
    """Trail-sum value of Tr of the quenched mean G(e, e; z)."""
    if abs(abs(z) - 1.0) < 1e-15:
        raise ParameterError("|z| = 1 has no trail expansion")
    trails = enumerate_closed_trails(g, e, ceiling)
    if abs(z) < 1:
        return complex(2.0 - sum(w * z ** (2 * len(t)) for t, w in trails))
    return complex(sum(w * z ** (-2 * len(t)) for t, w in trails))


def classical_mean_conductance(g: NetworkGraph, e_in, e_out, ceiling: int = DEFAULT_CEILING) -> float:
    """Twice the summed weight of the open trails joining ``e_in`` to ``e_out``."""
    return 2.0 * sum(w for _, w in enumerate_open_trails(g, e_in, e_out, ceiling))


# -- history-dependent random walk --------------------------------------------------


@dataclasses.dataclass
class WalkDiagnostics:
    steps: list            # (node, j, i, probability) per node passage
    probability: float     # product of the step probabilities
    closed: bool
    exit_edge: object = None


def sample_history_walk(g: NetworkGraph, e_start, random_source, max_steps: int | None = None):
    """Grow a trail from ``e_start`` using the conditional weights as probabilities.

    On a closed graph the walk ends when it re-enters ``e_start``; on an open
    graph it ends on a lead-out edge.  Returns ``(Trail, WalkDiagnostics)``.
    """
    rng = as_generator(random_source)
    if e_start not in g.edge_index:
        raise ParameterError(f"unknown edge {e_start}")
    tol = config.tol("normalization")
    hist = {n.id: [] for n in g.nodes}
    weight = {n.id: 1.0 for n in g.nodes}
    path = [e_start]
    steps = []
    prob = 1.0
    max_steps = max_steps or (g.n_edges + 1)
    e = e_start
    for _ in range(max_steps):
        tgt = g.edge(e).target
        if tgt is None:
            return Trail(tuple(path), False), WalkDiagnostics(steps, prob, False, e)
        node, j = tgt
        s = g.node(node).S
        taken = {i for _, i in hist[node]}
        options = [i for i in range(1, s.shape[0] + 1) if i not in taken]
        den = weight[node]
        nums = np.array([omega_value(s, hist[node] + [(j, i)]) for i in options])
        w = nums / den
        if np.any(w < -tol):
            raise NonProbabilisticNodeError(
                f"negative conditional weight at node {node}", node=node,
                history=list(hist[node]) + [(j, None)], weights=dict(zip(options, w.tolist())))
        w = np.clip(w, 0.0, None)
        total = w.sum()
        k = int(np.searchsorted(np.cumsum(w), rng.random() * total, side="right"))
        k = min(k, len(options) - 1)
        i = options[k]
        hist[node].append((j, i))
        weight[node] = nums[k]
        prob *= w[k]
        steps.append((node, j, i, float(w[k])))
        nxt = g.out_edge(node, i)
        if nxt == e_start:
            return Trail(tuple(path), True), WalkDiagnostics(steps, prob, True, None)
        path.append(nxt)
        e = nxt
    raise ResourceError("walk did not terminate within the edge-count bound")


# -- export -------------------------------------------------------------------------


def trails_csv(trails: list) -> str:
    """CSV text with columns trail_id, length, weight, edge_sequence."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trail_id", "length", "weight", "edge_sequence"])
    for k, (t, weight) in enumerate(trails):
        w.writerow([k, len(t.edges), repr(float(weight)), " ".join(str(e) for e in t.edges)])
    return buf.getvalue()
