"""Directed multigraphs whose nodes carry orthogonal S-matrices.

Conventions
-----------
* Channels are 1-based.  ``S[i-1, j-1]`` is the amplitude from in-channel
  ``j`` to out-channel ``i`` (rows are outgoing channels).
* An edge is ``source -> target`` where ``source = (node, out_channel)`` and
  ``target = (node, in_channel)``.  A lead-in edge has no source, a lead-out
  edge has no target.
* Identity is by integer id; parallel edges and self-loops are allowed.
"""
from __future__ import annotations

import dataclasses
import json
from typing import Iterable, Sequence

import numpy as np

from . import config
from .errors import GraphParseError, ParameterError
from .matrixkit import is_orthogonal, rotation2

SCHEMA_VERSION = 1

Slot = tuple  # (node_id, channel)


@dataclasses.dataclass(frozen=True)
class Edge:
    id: int
    source: Slot | None
    target: Slot | None

    @property
    def is_lead_in(self) -> bool:
        return self.source is None

    @property
    def is_lead_out(self) -> bool:
        return self.target is None


@dataclasses.dataclass(frozen=True, eq=False)
class Node:
    id: int
    S: np.ndarray
    pos: tuple | None = None

    def __post_init__(self):
        s = np.array(self.S, dtype=float, copy=True)
        s.setflags(write=False)
        object.__setattr__(self, "S", s)

    @property
    def degree(self) -> int:
        return self.S.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Node):
            return NotImplemented
        return (self.id == other.id and self.pos == other.pos
                and self.S.shape == other.S.shape and np.array_equal(self.S, other.S))

    def __hash__(self):
        return hash((self.id, self.S.shape))


@dataclasses.dataclass(frozen=True)
class Violation:
    rule: str
    subject: str
    detail: str = ""

    def __str__(self):
        return f"{self.rule}: {self.subject}" + (f" ({self.detail})" if self.detail else "")


class NetworkGraph:
    """Immutable network graph with per-node channel tables."""

    def __init__(self, nodes: Iterable[Node], edges: Iterable[Edge]):
        self.nodes = tuple(nodes)
        self.edges = tuple(edges)
        self.node_index = {n.id: k for k, n in enumerate(self.nodes)}
        self.edge_index = {e.id: k for k, e in enumerate(self.edges)}
        # channel tables; first binding wins, conflicts are reported by validate()
        self._in = {n.id: [None] * n.degree for n in self.nodes}
        self._out = {n.id: [None] * n.degree for n in self.nodes}
        for e in self.edges:
            if e.target is not None:
                self._bind(self._in, e.target, e.id)
            if e.source is not None:
                self._bind(self._out, e.source, e.id)

    @staticmethod
    def _bind(table, slot, eid):
        node, ch = slot
        row = table.get(node)
        if row is not None and 1 <= ch <= len(row) and row[ch - 1] is None:
            row[ch - 1] = eid

    # -- lookups -------------------------------------------------------------

    def node(self, node_id) -> Node:
        return self.nodes[self.node_index[node_id]]

    def edge(self, edge_id) -> Edge:
        return self.edges[self.edge_index[edge_id]]

    def in_edges(self, node_id) -> tuple:
        return tuple(self._in[node_id])

    def out_edges(self, node_id) -> tuple:
        return tuple(self._out[node_id])

    def out_edge(self, node_id, channel: int):
        return self._out[node_id][channel - 1]

    @property
    def leads_in(self) -> tuple:
        return tuple(e.id for e in self.edges if e.source is None)

    @property
    def leads_out(self) -> tuple:
        return tuple(e.id for e in self.edges if e.target is None)

    @property
    def is_closed(self) -> bool:
        return not self.leads_in and not self.leads_out

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_ids(self) -> list:
        return [e.id for e in self.edges]

    def __eq__(self, other):
        if not isinstance(other, NetworkGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __repr__(self):
        return f"NetworkGraph(nodes={len(self.nodes)}, edges={len(self.edges)}, leads_in={self.leads_in}, leads_out={self.leads_out})"

    def with_scattering(self, matrices: dict) -> "NetworkGraph":
        """Copy with some node S-matrices replaced (``{node_id: S}``)."""
        nodes = [Node(n.id, matrices.get(n.id, n.S), n.pos) for n in self.nodes]
        return NetworkGraph(nodes, self.edges)


# -- validation ----------------------------------------------------------------


def validate(g: NetworkGraph) -> list[Violation]:
    """All invariant violations of ``g``; empty when the graph is valid."""
    out = []
    seen = set()
    for n in g.nodes:
        if n.id in seen:
            out.append(Violation("duplicate id", f"node {n.id}"))
        seen.add(n.id)
        if n.S.ndim != 2 or n.S.shape[0] != n.S.shape[1] or n.degree < 1:
            out.append(Violation("matrix dim mismatch", f"node {n.id}", f"shape {n.S.shape}"))
        elif not is_orthogonal(n.S, config.tol("orthogonal")):
            err = float(np.max(np.abs(n.S.T @ n.S - np.eye(n.degree))))
            out.append(Violation("orthogonality", f"node {n.id}", f"max |S^T S - 1| = {err:.3g}"))
    seen = set()
    in_used, out_used = {}, {}
    for e in g.edges:
        if e.id in seen:
            out.append(Violation("duplicate id", f"edge {e.id}"))
        seen.add(e.id)
        if e.source is None and e.target is None:
            out.append(Violation("dangling channel", f"edge {e.id}", "no endpoints"))
        for slot, used, kind in ((e.source, out_used, "out"), (e.target, in_used, "in")):
            if slot is None:
                continue
            node, ch = slot
            if node not in g.node_index:
                out.append(Violation("unknown node", f"edge {e.id}", f"node {node}"))
                continue
            deg = g.node(node).degree
            if not 1 <= ch <= deg:
                out.append(Violation("dangling channel", f"edge {e.id}",
                                     f"{kind}-channel {ch} of node {node} (degree {deg})"))
                continue
            if (node, ch) in used:
                out.append(Violation("duplicate slot", f"edge {e.id}",
                                     f"{kind}-channel {ch} of node {node} also used by edge {used[(node, ch)]}"))
            else:
                used[(node, ch)] = e.id
    for n in g.nodes:
        for ch in range(1, n.degree + 1):
            if (n.id, ch) not in in_used:
                out.append(Violation("dangling channel", f"node {n.id}", f"in-channel {ch} unbound"))
            if (n.id, ch) not in out_used:
                out.append(Violation("dangling channel", f"node {n.id}", f"out-channel {ch} unbound"))
    return out


def require_valid(g: NetworkGraph) -> None:
    problems = validate(g)
    if problems:
        raise ParameterError("invalid graph: " + "; ".join(map(str, problems[:5])))


# -- open systems ----------------------------------------------------------------


def cut_edges(g: NetworkGraph, edge_ids: Sequence[int]) -> NetworkGraph:
    """Cut each listed edge into a lead-in half and a lead-out half.

    The lead-in half keeps the original id and still enters the original
    target; the lead-out half leaves the original source and gets the next
    free id, in the order the edges are listed.
    """
    edge_ids = list(edge_ids)
    if len(set(edge_ids)) != len(edge_ids):
        raise ParameterError("edge ids to cut must be distinct")
    for eid in edge_ids:
        if eid not in g.edge_index:
            raise ParameterError(f"unknown edge id {eid}")
        e = g.edge(eid)
        if e.source is None or e.target is None:
            raise ParameterError(f"edge {eid} is already a lead")
    if not edge_ids:
        return g
    next_id = max(g.edge_ids()) + 1
    cut = set(edge_ids)
    edges = []
    extra = []
    for e in g.edges:
        if e.id in cut:
            edges.append(Edge(e.id, None, e.target))
        else:
            edges.append(e)
    for eid in edge_ids:
        extra.append(Edge(next_id, g.edge(eid).source, None))
        next_id += 1
    return NetworkGraph(g.nodes, edges + extra)


def lead_out_partner(g_closed: NetworkGraph, edge_ids: Sequence[int], eid: int) -> int:
    """Id of the lead-out half created for ``eid`` by :func:`cut_edges`."""
    edge_ids = list(edge_ids)
    return max(g_closed.edge_ids()) + 1 + edge_ids.index(eid)


# -- L-lattice -------------------------------------------------------------------

# Node (x, y) with x + y even ("A") receives horizontal traffic and emits
# vertical traffic; odd nodes ("B") do the opposite.  Channel labels:
#   A: in 1 = heading east, in 2 = heading west; out 1 = south, out 2 = north
#   B: in 1 = heading north, in 2 = heading south; out 1 = east, out 2 = west
# With S = ((c, s), (-s, c)), in-channel j -> out-channel j is a right turn
# (weight cos^2) and j -> other is a left turn (weight sin^2).
_A_OUT = {1: (0, -1), 2: (0, 1)}
_B_OUT = {1: (1, 0), 2: (-1, 0)}


def _in_channel(heading) -> int:
    # A nodes: east=1, west=2 ; B nodes: north=1, south=2
    return {(1, 0): 1, (-1, 0): 2, (0, 1): 1, (0, -1): 2}[heading]


def l_lattice_theta(p: float) -> float:
    """Node angle whose left-turn probability sin^2(theta) equals ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError("p must lie in [0, 1]")
    return float(np.arcsin(np.sqrt(p)))


def build_l_lattice(L: int, theta: float, boundary: str = "torus") -> NetworkGraph:
    """L x L directed square lattice on which every node turns traffic by +-90 deg.

    ``boundary="open"`` cuts every wrap-around edge into a pair of leads.
    Node ids are ``x + L*y``; edge ids run over nodes in id order and then
    over out-channels.
    """
    if L < 2 or L % 2:
        raise ParameterError("L must be an even integer >= 2")
    if boundary not in ("torus", "open"):
        raise ParameterError("boundary must be 'torus' or 'open'")
    s = rotation2(theta)
    nodes = [Node(x + L * y, s, (x, y)) for y in range(L) for x in range(L)]
    edges = []
    wrapping = []
    for y in range(L):
        for x in range(L):
            table = _A_OUT if (x + y) % 2 == 0 else _B_OUT
            for ch in (1, 2):
                dx, dy = table[ch]
                tx, ty = x + dx, y + dy
                wraps = not (0 <= tx < L and 0 <= ty < L)
                tx, ty = tx % L, ty % L
                eid = len(edges)
                edges.append(Edge(eid, (x + L * y, ch), (tx + L * ty, _in_channel((dx, dy)))))
                if wraps:
                    wrapping.append(eid)
    g = NetworkGraph(nodes, edges)
    if boundary == "open":
        g = cut_edges(g, wrapping)
    return g


def l_lattice_wrap_edges(L: int) -> list[int]:
    """Ids of the wrap-around edges of ``build_l_lattice(L, ., 'torus')``."""
    out = []
    eid = 0
    for y in range(L):
        for x in range(L):
            table = _A_OUT if (x + y) % 2 == 0 else _B_OUT
            for ch in (1, 2):
                dx, dy = table[ch]
                if not (0 <= x + dx < L and 0 <= y + dy < L):
                    out.append(eid)
                eid += 1
    return out


def l_lattice_scan_leads(L: int) -> tuple[int, int]:
    """(lead-in, lead-out) ids for the open L-lattice conductance scan.

    Both come from the wrap edge heading east along the middle even row: the
    lead-in half enters the left boundary and the lead-out half leaves the
    right boundary.
    """
    y = (L // 2) - ((L // 2) % 2)
    wraps = l_lattice_wrap_edges(L)
    source_node = (L - 1) + L * y  # B node heading east across the seam
    eid = 2 * source_node + 0  # out-channel 1 of a B node is east
    assert eid in wraps
    return eid, 2 * L * L + wraps.index(eid)


def edge_displacements(g: NetworkGraph, L: int) -> np.ndarray:
    """Minimal-image (dx, dy) of every edge of an L-lattice, in edge order."""
    out = np.zeros((g.n_edges, 2), dtype=np.int64)
    for k, e in enumerate(g.edges):
        if e.source is None or e.target is None:
            continue
        x0, y0 = g.node(e.source[0]).pos
        x1, y1 = g.node(e.target[0]).pos
        dx = (x1 - x0 + L // 2) % L - L // 2
        dy = (y1 - y0 + L // 2) % L - L // 2
        if L == 2:
            # both neighbours coincide; recover the direction from the channel
            table = _A_OUT if (x0 + y0) % 2 == 0 else _B_OUT
            dx, dy = table[e.source[1]]
        out[k] = (dx, dy)
    return out


# -- serialization ---------------------------------------------------------------


def to_document(g: NetworkGraph) -> dict:
    nodes = []
    for n in g.nodes:
        item = {"id": n.id, "S": [[float(v) for v in row] for row in n.S]}
        if n.pos is not None:
            item["pos"] = list(n.pos)
        nodes.append(item)
    edges = [
        {"id": e.id,
         "from": None if e.source is None else list(e.source),
         "to": None if e.target is None else list(e.target)}
        for e in g.edges
    ]
    return {"schema_version": SCHEMA_VERSION, "nodes": nodes, "edges": edges,
            "leads_in": list(g.leads_in), "leads_out": list(g.leads_out)}


def serialize(g: NetworkGraph) -> str:
    """JSON text; floats use ``repr`` so every value round-trips exactly."""
    return json.dumps(to_document(g), indent=1)


def _expect(cond, message, where):
    if not cond:
        raise GraphParseError(message, where)


def _int(value, where):
    _expect(isinstance(value, int) and not isinstance(value, bool), "expected an integer", where)
    return value


def _slot(value, where):
    if value is None:
        return None
    _expect(isinstance(value, list) and len(value) == 2, "expected [node, channel]", where)
    return (_int(value[0], where + "[0]"), _int(value[1], where + "[1]"))


def from_document(doc) -> NetworkGraph:
    _expect(isinstance(doc, dict), "top level must be an object", "$")
    _expect("nodes" in doc and "edges" in doc, "missing 'nodes' or 'edges'", "$")
    nodes = []
    node_ids = set()
    for k, item in enumerate(doc["nodes"]):
        where = f"nodes[{k}]"
        _expect(isinstance(item, dict), "expected an object", where)
        nid = _int(item.get("id"), where + ".id")
        _expect(nid not in node_ids, f"duplicate id {nid}", where + ".id")
        node_ids.add(nid)
        s = item.get("S")
        _expect(isinstance(s, list) and s and all(isinstance(r, list) for r in s),
                "S must be a non-empty list of rows", where + ".S")
        n = len(s)
        _expect(all(len(r) == n for r in s), "matrix dim mismatch", where + ".S")
        if "degree" in item:
            _expect(_int(item["degree"], where + ".degree") == n, "matrix dim mismatch", where + ".S")
        try:
            arr = np.array(s, dtype=float)
        except (TypeError, ValueError):
            raise GraphParseError("S entries must be numbers", where + ".S") from None
        pos = item.get("pos")
        nodes.append(Node(nid, arr, tuple(pos) if pos is not None else None))
    edges = []
    edge_ids = set()
    for k, item in enumerate(doc["edges"]):
        where = f"edges[{k}]"
        _expect(isinstance(item, dict), "expected an object", where)
        eid = _int(item.get("id"), where + ".id")
        _expect(eid not in edge_ids, f"duplicate id {eid}", where + ".id")
        edge_ids.add(eid)
        edges.append(Edge(eid, _slot(item.get("from"), where + ".from"), _slot(item.get("to"), where + ".to")))
    g = NetworkGraph(nodes, edges)
    for key, actual in (("leads_in", g.leads_in), ("leads_out", g.leads_out)):
        if key in doc:
            listed = doc[key]
            _expect(isinstance(listed, list), "expected a list of edge ids", key)
            _expect(sorted(listed) == sorted(actual),
                    f"listed {sorted(listed)} but edges imply {sorted(actual)}", key)
    return g


def parse(text: str) -> NetworkGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return from_document(doc)


def load(path) -> NetworkGraph:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def dump(g: NetworkGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(g))
        fh.write("\n")
