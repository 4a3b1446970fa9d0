import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from nlsgraph import graph_model as gm
from nlsgraph.graph_model import INF, GraphError


# -- strategies and brute-force oracles -------------------------------------------

@st.composite
def noncompact_graphs(draw):
    n = draw(st.integers(1, 5))
    verts = [f"v{i}" for i in range(n)]
    length = st.floats(0.1, 5.0)
    edges = [(verts[i], verts[draw(st.integers(0, i - 1))], draw(length)) for i in range(1, n)]
    for _ in range(draw(st.integers(0, 3))):
        edges.append((verts[draw(st.integers(0, n - 1))], verts[draw(st.integers(0, n - 1))], draw(length)))
    for _ in range(draw(st.integers(1, 3))):
        edges.append((verts[draw(st.integers(0, n - 1))], INF, INF))
    return gm.build_graph({"vertices": verts, "edges": [{"a": a, "b": b, "length": ln} for a, b, ln in edges]})


def _connected_without(g, skip):
    """BFS on the graph with points at infinity merged, ignoring edge ``skip``."""
    nodes = list(g.vertices) + [INF]
    adj = {v: [] for v in nodes}
    for k, e in enumerate(g.edges):
        if k != skip:
            adj[e.a].append(e.b)
            adj[e.b].append(e.a)
    seen, todo = {nodes[0]}, deque([nodes[0]])
    while todo:
        for w in adj[todo.popleft()]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return len(seen) == len(nodes)


def brute_force_H(g):
    """No edge (self-loops excepted) disconnects the merged graph when removed."""
    return all(e.is_loop or _connected_without(g, k) for k, e in enumerate(g.edges))


def sampled_diameter(g, per_edge=60):
    """Diameter of the core from a subdivided copy of every bounded edge."""
    ids = {v: i for i, v in enumerate(g.vertices)}
    rows, cols, vals = [], [], []
    n = len(g.vertices)
    for k in g.finite_edges:
        e = g.edges[k]
        chain = [ids[e.a]] + list(range(n, n + per_edge - 1)) + [ids[e.b]]
        n += per_edge - 1
        for i, j in zip(chain, chain[1:]):
            rows.append(i)
            cols.append(j)
            vals.append(e.length / per_edge)
    if not rows:
        return 0.0
    m = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return float(shortest_path(m, directed=False).max())


# -- build_graph ------------------------------------------------------------------

def test_two_half_lines_make_the_real_line():
    g = gm.build_graph({"vertices": ["o"], "edges": [{"a": "o", "b": "inf", "length": "inf"}] * 2})
    assert len(g.half_lines) == 2 and gm.is_isometric_to_line(g)


def test_single_half_line():
    g = gm.half_line()
    assert g.vertices == ("v",) and len(g.half_lines) == 1 and not g.finite_edges


def test_star_with_pendant_shape():
    g = gm.star_with_pendant(3, 2.5)
    assert len(g.half_lines) == 3
    (k,) = g.finite_edges
    assert g.edges[k].length == 2.5 and g.degree("w") == 1


def test_orientation_is_lexicographic_and_order_kept():
    g = gm.build_graph({"vertices": ["b", "a"], "edges": [
        {"a": "b", "b": "a", "length": 1.0}, {"a": "inf", "b": "b", "length": "inf"}]})
    assert (g.edges[0].a, g.edges[0].b) == ("a", "b")
    assert (g.edges[1].a, g.edges[1].b) == ("b", INF)


@pytest.mark.parametrize("desc", [
    {"vertices": ["a", "b"], "edges": [{"a": "a", "b": "inf", "length": "inf"}]},  # disconnected
    {"vertices": ["a"], "edges": [{"a": "a", "b": "a", "length": 0.0}]},
    {"vertices": ["a"], "edges": [{"a": "a", "b": "a", "length": -1.0}]},
    {"vertices": ["a"], "edges": [{"a": "inf", "b": "inf", "length": "inf"}]},
    {"vertices": ["a", "b"], "edges": [{"a": "a", "b": "b", "length": "inf"}]},
    {"vertices": ["a"], "edges": [{"a": "a", "b": "inf", "length": 3.0}]},
    {"vertices": ["a"], "edges": [], "name": "x"},
    {"vertices": ["a"], "edges": [{"a": "a", "b": "inf", "length": "inf", "w": 1}]},
])
def test_invalid_descriptions_rejected(desc):
    with pytest.raises(GraphError):
        gm.build_graph(desc)


def test_file_round_trip(tmp_path):
    g = gm.two_circles(1.0, 2.0)
    gm.save_graph(g, tmp_path / "g.json")
    assert gm.load_graph(tmp_path / "g.json") == g


def test_gallery_contents():
    names = set(gm.gallery())
    assert names == {"line", "half_line", "star3", "star_with_pendant", "two_circles", "signpost",
                     "tadpole", "fork3", "broom5"}


# -- compact_core -----------------------------------------------------------------

def test_star_core_is_a_point():
    c = gm.compact_core(gm.star(4))
    assert c.total_length == 0.0 and c.diameter == 0.0


@pytest.mark.parametrize("n, ell", [(5, 1.0), (3, 0.25), (1, 2.0)])
def test_broom_core(n, ell):
    c = gm.compact_core(gm.broom(n, ell))
    assert c.total_length == pytest.approx(n * ell)
    assert c.diameter == pytest.approx(ell if n == 1 else 2 * ell)


def test_line_with_pendant_core():
    c = gm.compact_core(gm.line_with_pendant(1.7))
    assert (c.total_length, c.diameter) == (pytest.approx(1.7), pytest.approx(1.7))


def test_loop_diameter_is_half_its_length():
    assert gm.compact_core(gm.tadpole(3.0)).diameter == pytest.approx(1.5)


@settings(max_examples=60, deadline=None)
@given(noncompact_graphs())
def test_diameter_matches_subdivision_oracle(g):
    d = gm.compact_core(g).diameter
    sampled = sampled_diameter(g)
    longest = max((g.edges[k].length for k in g.finite_edges), default=0.0)
    assert sampled <= d + 1e-9
    assert d <= sampled + longest / 60 + 1e-9


@settings(max_examples=60, deadline=None)
@given(noncompact_graphs(), st.floats(0.1, 10.0))
def test_dilation_scales_core(g, t):
    c, ct = gm.compact_core(g), gm.compact_core(gm.dilate(g, t))
    assert ct.total_length == pytest.approx(t * c.total_length, rel=1e-12, abs=1e-300)
    assert ct.diameter == pytest.approx(t * c.diameter, rel=1e-12, abs=1e-300)


# -- assumption (H) -----------------------------------------------------------------

def test_star_satisfies_H():
    assert all(gm.satisfies_H(gm.star(n)) for n in (2, 3, 6))


def test_one_half_line_never_satisfies_H():
    for g in (gm.half_line(), gm.tadpole(1.0), gm.broom(5, 1.0), gm.fork([1, 2, 3])):
        assert not gm.satisfies_H(g)


def test_pendant_breaks_H():
    assert not gm.satisfies_H(gm.star_with_pendant(3, 0.5))


def test_compact_graph_rejected():
    g = gm.build_graph({"vertices": ["a"], "edges": [{"a": "a", "b": "a", "length": 1.0}]})
    with pytest.raises(GraphError):
        gm.satisfies_H(g)


@settings(max_examples=100, deadline=None)
@given(noncompact_graphs())
def test_H_matches_bridge_oracle(g):
    assert gm.satisfies_H(g) == brute_force_H(g)


@settings(max_examples=60, deadline=None)
@given(noncompact_graphs(), st.floats(0.1, 10.0))
def test_H_invariant_under_dilation(g, t):
    assert gm.satisfies_H(gm.dilate(g, t)) == gm.satisfies_H(g)


@settings(max_examples=60, deadline=None)
@given(noncompact_graphs())
def test_terminal_vertex_breaks_H(g):
    terminal = any(g.degree(v) == 1 and not g.edges[g.incident(v)[0]].is_half_line for v in g.vertices)
    if terminal:
        assert not gm.satisfies_H(g)


# -- dilate ---------------------------------------------------------------------------

def test_dilate_identity():
    g = gm.signpost(1.0, 2.0)
    assert gm.dilate(g, 1.0) == g


def test_dilate_pendant():
    g = gm.dilate(gm.star_with_pendant(3, 1.5), 0.25)
    assert g.edges[g.finite_edges[0]].length == pytest.approx(0.375)


def test_dilate_broom():
    assert gm.dilate(gm.broom(5, 1.0), 2.0) == gm.broom(5, 2.0)


def test_dilate_keeps_half_lines():
    g = gm.dilate(gm.tadpole(1.0), 3.0)
    assert all(math.isinf(g.edges[k].length) for k in g.half_lines)
    with pytest.raises(GraphError):
        gm.dilate(g, 0.0)
