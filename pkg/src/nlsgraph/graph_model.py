"""Connected metric graphs with bounded edges and half-lines.

A graph is a multigraph: self-loops and parallel edges are allowed, and a
half-line is an edge whose second endpoint is the marker ``INF``.  Graphs
are immutable once built, and edge orientation is normalized so that the
same description always yields the same object.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

INF = "inf"


class GraphError(ValueError):
    """Invalid graph description."""


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    length: float

    @property
    def is_half_line(self) -> bool:
        return self.b == INF

    @property
    def is_loop(self) -> bool:
        return self.a == self.b

    def other(self, v: str) -> str:
        return self.b if v == self.a else self.a


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]

    @property
    def finite_edges(self) -> list[int]:
        return [i for i, e in enumerate(self.edges) if not e.is_half_line]

    @property
    def half_lines(self) -> list[int]:
        return [i for i, e in enumerate(self.edges) if e.is_half_line]

    @property
    def is_compact(self) -> bool:
        return not self.half_lines

    def degree(self, v: str) -> int:
        """Number of edge ends at ``v`` (a self-loop counts twice)."""
        return sum((e.a == v) + (e.b == v) for e in self.edges)

    def incident(self, v: str) -> list[int]:
        return [i for i, e in enumerate(self.edges) if v in (e.a, e.b)]

    def vertex_index(self, v: str) -> int:
        return self.vertices.index(v)

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [
                {"a": e.a, "b": e.b, "length": INF if math.isinf(e.length) else e.length}
                for e in self.edges
            ],
        }

    def __repr__(self) -> str:
        parts = []
        for e in self.edges:
            ln = "inf" if e.is_half_line else f"{e.length:g}"
            parts.append(f"{e.a}-{e.b}:{ln}")
        return f"MetricGraph({', '.join(parts)})"


@dataclass(frozen=True)
class CompactCore:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    total_length: float
    diameter: float


def _as_length(value) -> float:
    if isinstance(value, str):
        if value != INF:
            raise GraphError(f"length must be a number or {INF!r}, got {value!r}")
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise GraphError(f"length must be a number or {INF!r}, got {value!r}")
    return float(value)


def build_graph(description: Mapping) -> MetricGraph:
    """Validate a graph description and return a normalized MetricGraph.

    ``description`` has the shape of the JSON graph file:
    ``{"vertices": [...], "edges": [{"a": ..., "b": ..., "length": ...}]}``
    where a half-line has ``b == "inf"`` and ``length == "inf"``.  Finite
    edges are oriented so that ``a <= b`` lexicographically; edge order
    follows the input.
    """
    unknown = set(description) - {"vertices", "edges"}
    if unknown:
        raise GraphError(f"unknown fields: {sorted(unknown)}")
    vertices = [str(v) for v in description.get("vertices", [])]
    if len(set(vertices)) != len(vertices):
        raise GraphError("duplicate vertex identifiers")
    if INF in vertices:
        raise GraphError(f"{INF!r} is reserved for points at infinity")
    if not vertices:
        raise GraphError("graph has no vertices")
    known = set(vertices)

    edges = []
    for k, raw in enumerate(description.get("edges", [])):
        extra = set(raw) - {"a", "b", "length"}
        if extra:
            raise GraphError(f"edge {k}: unknown fields {sorted(extra)}")
        try:
            a, b, length = str(raw["a"]), str(raw["b"]), _as_length(raw["length"])
        except KeyError as exc:
            raise GraphError(f"edge {k}: missing field {exc}") from None
        if a == INF and b != INF:
            a, b = b, a
        if a == INF:
            raise GraphError(f"edge {k}: no finite endpoint")
        if a not in known or (b != INF and b not in known):
            raise GraphError(f"edge {k}: unknown endpoint")
        if (b == INF) != math.isinf(length):
            raise GraphError(f"edge {k}: infinite length requires an endpoint at {INF!r} and vice versa")
        if not math.isinf(length) and not length > 0:
            raise GraphError(f"edge {k}: length must be positive, got {length}")
        if b != INF and b < a:
            a, b = b, a
        edges.append(Edge(a, b, length))

    g = MetricGraph(tuple(vertices), tuple(edges))
    if not _is_connected(g):
        raise GraphError("graph is not connected")
    return g


def _is_connected(g: MetricGraph) -> bool:
    n = len(g.vertices)
    if n == 1:
        return True
    idx = {v: i for i, v in enumerate(g.vertices)}
    rows, cols = [], []
    for e in g.edges:
        if not e.is_half_line:
            rows.append(idx[e.a])
            cols.append(idx[e.b])
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


def load_graph(path: str | Path) -> MetricGraph:
    """Read a graph description file (JSON syntax)."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise GraphError(f"{path}: top level must be an object")
    return build_graph(data)


def save_graph(g: MetricGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=2) + "\n")


def _vertex_distances(g: MetricGraph) -> np.ndarray:
    """All-pairs shortest-path distances between vertices, finite edges only."""
    n = len(g.vertices)
    idx = {v: i for i, v in enumerate(g.vertices)}
    w = np.full((n, n), np.inf)
    for e in g.edges:
        if e.is_half_line or e.is_loop:
            continue
        i, j = idx[e.a], idx[e.b]
        if e.length < w[i, j]:
            w[i, j] = w[j, i] = e.length
    dense = np.where(np.isinf(w), 0.0, w)
    return shortest_path(dense, method="D", directed=False)


def _edge_pair_diameter(e1: Edge, e2: Edge, D: np.ndarray, idx: dict) -> float:
    a, b = idx[e1.a], idx[e1.b]
    c, d = idx[e2.a], idx[e2.b]
    l1, l2 = e1.length, e2.length

    def dist_to(s, w):
        return min(s + D[a, w], l1 - s + D[b, w])

    # distance from a point at s on e1 to the farthest point of e2 is
    # (d(x,c) + d(x,d) + l2) / 2; it is concave in s, so its max sits at a breakpoint
    cands = {0.0, l1}
    for w in (c, d):
        s = 0.5 * (l1 + D[b, w] - D[a, w])
        if 0.0 < s < l1:
            cands.add(s)
    return max(0.5 * (dist_to(s, c) + dist_to(s, d) + l2) for s in cands)


def compact_core(g: MetricGraph) -> CompactCore:
    """Compact core: the graph with every half-line removed.

    The diameter is the largest distance between two points of the core
    (not only vertices), measured along the core.
    """
    finite = [g.edges[i] for i in g.finite_edges]
    total = float(sum(e.length for e in finite))
    if not finite:
        return CompactCore(g.vertices, (), 0.0, 0.0)
    idx = {v: i for i, v in enumerate(g.vertices)}
    D = _vertex_distances(g)
    diam = 0.0
    for i, e1 in enumerate(finite):
        if e1.is_loop:
            diam = max(diam, e1.length / 2)
        else:
            alt = D[idx[e1.a], idx[e1.b]]
            diam = max(diam, min(e1.length, 0.5 * (e1.length + alt)))
        for e2 in finite[i + 1:]:
            diam = max(diam, _edge_pair_diameter(e1, e2, D, idx))
    return CompactCore(g.vertices, tuple(finite), total, float(diam))


def _bridges(n: int, edge_list: list[tuple[int, int]]) -> list[int]:
    """Edge ids that are bridges of an undirected multigraph (iterative low-link DFS)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for k, (u, v) in enumerate(edge_list):
        if u == v:
            continue
        adj[u].append((v, k))
        adj[v].append((u, k))
    order = [-1] * n
    low = [0] * n
    counter = 0
    bridges = []
    for root in range(n):
        if order[root] != -1:
            continue
        order[root] = low[root] = counter
        counter += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, parent_edge, it = stack[-1]
            advanced = False
            for w, k in it:
                if k == parent_edge:
                    continue
                if order[w] == -1:
                    order[w] = low[w] = counter
                    counter += 1
                    stack.append((w, k, iter(adj[w])))
                    advanced = True
                    break
                low[v] = min(low[v], order[w])
            if advanced:
                continue
            stack.pop()
            if stack:
                u = stack[-1][0]
                low[u] = min(low[u], low[v])
                if low[v] > order[u]:
                    bridges.append(parent_edge)
    return sorted(bridges)


def satisfies_H(g: MetricGraph) -> bool:
    """Whether the graph can be covered by cycles once all points at
    infinity are identified into a single vertex (no bridges)."""
    if g.is_compact:
        raise GraphError("assumption (H) is only defined for noncompact graphs")
    idx = {v: i for i, v in enumerate(g.vertices)}
    infinity = len(g.vertices)
    edge_list = [(idx[e.a], infinity if e.is_half_line else idx[e.b]) for e in g.edges]
    return not _bridges(len(g.vertices) + 1, edge_list)


def dilate(g: MetricGraph, factor: float) -> MetricGraph:
    """Multiply every bounded edge length by ``factor``."""
    if not factor > 0:
        raise GraphError("dilation factor must be positive")
    edges = tuple(e if e.is_half_line else Edge(e.a, e.b, e.length * factor) for e in g.edges)
    return MetricGraph(g.vertices, edges)


def is_isometric_to_line(g: MetricGraph) -> bool:
    """True for a path of bounded edges with a half-line at each end."""
    if len(g.half_lines) != 2:
        return False
    if any(g.degree(v) != 2 for v in g.vertices):
        return False
    return len(g.finite_edges) == len(g.vertices) - 1


# -- gallery -----------------------------------------------------------------

def _graph(vertices: Iterable[str], edges: Iterable[tuple]) -> MetricGraph:
    return build_graph({
        "vertices": list(vertices),
        "edges": [{"a": a, "b": b, "length": ln} for a, b, ln in edges],
    })


def real_line() -> MetricGraph:
    return _graph(["v"], [("v", INF, INF), ("v", INF, INF)])


def half_line() -> MetricGraph:
    return _graph(["v"], [("v", INF, INF)])


def star(n: int) -> MetricGraph:
    """``n`` half-lines sharing one vertex."""
    return _graph(["v"], [("v", INF, INF)] * n)


def star_with_pendant(n: int, ell: float) -> MetricGraph:
    """``n`` half-lines and a terminal edge of length ``ell`` at one vertex."""
    return _graph(["v", "w"], [("v", INF, INF)] * n + [("v", "w", ell)])


def line_with_pendant(ell: float) -> MetricGraph:
    return star_with_pendant(2, ell)


def two_circles(loop: float, ring: float) -> MetricGraph:
    """Two half-lines at ``v``; a circle of length ``ring`` made of two arcs
    from ``v`` to ``w``; a self-loop of length ``loop`` at ``w``."""
    return _graph(
        ["v", "w"],
        [("v", INF, INF), ("v", INF, INF), ("v", "w", ring / 2), ("v", "w", ring / 2), ("w", "w", loop)],
    )


def signpost(loop: float, post: float) -> MetricGraph:
    """Two half-lines at ``v``, an edge ``v``-``w`` and a self-loop at ``w``."""
    return _graph(["v", "w"], [("v", INF, INF), ("v", INF, INF), ("v", "w", post), ("w", "w", loop)])


def tadpole(loop: float) -> MetricGraph:
    return _graph(["v"], [("v", INF, INF), ("v", "v", loop)])


def fork(lengths: Iterable[float]) -> MetricGraph:
    """One half-line and one terminal edge per entry of ``lengths``."""
    lengths = list(lengths)
    tips = [f"t{i + 1}" for i in range(len(lengths))]
    return _graph(["v", *tips], [("v", INF, INF)] + [("v", t, ln) for t, ln in zip(tips, lengths)])


def broom(n: int, ell: float) -> MetricGraph:
    """One half-line and ``n`` terminal edges of length ``ell``."""
    return fork([ell] * n)


GALLERY_DIR = Path(__file__).with_name("gallery")


def gallery() -> dict[str, MetricGraph]:
    """The graph files shipped with the package, keyed by file stem."""
    return {p.stem: load_graph(p) for p in sorted(GALLERY_DIR.glob("*.json"))}
