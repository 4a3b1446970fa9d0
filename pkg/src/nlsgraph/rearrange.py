"""Rearrangements of graph functions and competitor constructions.

Rearrangements act on the piecewise-linear representative with nodal
values ``|u_i|``.  Its distribution function ``t -> |{u > t}|`` is linear
between consecutive nodal values, so the decreasing rearrangement is again
piecewise linear with one knot pair per distinct nodal value.  All norms
reported here are exact integrals of piecewise-linear functions, which
makes mass and L^p preservation hold to rounding error.

Competitors: a soliton of mass ``mu`` is cut into level bands, the bands
are folded onto loops, arcs and terminal edges, and selected pieces are
replaced by their monotone rearrangement.  Each builder returns a
function of mass exactly ``mu`` on the target graph.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import closed_forms as cf
from . import graph_model as gm
from .closed_forms import SolitonModel
from .function_space import DiscreteFunction, GridSpec, Mesh, energy, mass, mass_project

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


class Target(str, enum.Enum):
    HALF_LINE = "HALF_LINE"
    LINE = "LINE"


class RearrangementNotCertified(ValueError):
    """Some level has fewer than two preimages; the kinetic inequality for the
    symmetric rearrangement is not guaranteed.  The profile is attached."""

    def __init__(self, message: str, profile: "RearrangedProfile"):
        super().__init__(message)
        self.profile = profile


@dataclass(frozen=True)
class Norms:
    mass: float  # int u^2
    lp: float  # int |u|^p
    kinetic: float  # (1/2) int |u'|^2


def p1_norms(a, b, h, p: float) -> Norms:
    """Exact integrals of the piecewise-linear function with segment end
    values ``a``, ``b`` (nonnegative) and lengths ``h``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    h = np.asarray(h, dtype=float)
    keep = h > 0
    a, b, h = a[keep], b[keep], h[keep]
    m = float(np.sum(h * (a * a + a * b + b * b) / 3.0))
    kin = 0.5 * float(np.sum((b - a) ** 2 / h))
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    diff = hi - lo
    close = diff <= 1e-3 * hi
    lp = np.empty_like(h)
    far = ~close
    lp[far] = h[far] * (hi[far] ** (p + 1) - lo[far] ** (p + 1)) / ((p + 1) * diff[far])
    if np.any(close):
        mid = 0.5 * (hi[close] + lo[close])
        half = 0.5 * diff[close]
        vals = (mid[:, None] + half[:, None] * _GL_NODES[None, :]) ** p
        lp[close] = h[close] * 0.5 * (vals @ _GL_WEIGHTS)
    return Norms(mass=m, lp=float(np.sum(lp)), kinetic=kin)


def function_norms(u: DiscreteFunction, p: float) -> Norms:
    """Exact norms of the piecewise-linear interpolant of ``|u|``."""
    m = u.mesh
    v = np.abs(u.values)
    return p1_norms(v[m.seg_i], v[m.seg_j], m.seg_h, p)


@dataclass(frozen=True)
class RearrangedProfile:
    """Monotone profile given by knots of its half-line version ``u*``.

    For ``target == LINE`` the profile is ``x -> u*(2|x|)``.
    """

    target: Target
    knots_x: np.ndarray  # increasing, starts at 0 (half-line coordinates of u*)
    knots_t: np.ndarray  # nonincreasing values
    p: float
    source_norms: Norms
    target_norms: Norms
    certified: bool = True  # preimage condition (meaningful for LINE)
    min_preimages: int | None = None

    @property
    def extent(self) -> float:
        """Length of the support interval of the half-line profile."""
        return float(self.knots_x[-1])

    def sample(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = 2.0 * np.abs(x) if self.target == Target.LINE else x
        return np.interp(y, self.knots_x, self.knots_t)

    def coordinates(self) -> np.ndarray:
        """Knot abscissae in target coordinates (x >= 0 side for LINE)."""
        return self.knots_x / 2.0 if self.target == Target.LINE else self.knots_x


def _distribution_knots(values: np.ndarray, seg_i, seg_j, seg_h):
    """Knots (x, t) of the decreasing rearrangement of a P1 function.

    Between consecutive distinct nodal levels the measure of ``{u > t}``
    grows linearly; each segment spreads its length uniformly over the
    level intervals it spans, so increments are accumulated without
    cancellation.
    """
    levels = np.unique(values)[::-1]  # descending
    nl = len(levels)
    asc = levels[::-1]
    a = values[seg_i]
    b = values[seg_j]
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    # descending index of each endpoint level
    k_hi = nl - 1 - np.searchsorted(asc, hi)
    k_lo = nl - 1 - np.searchsorted(asc, lo)

    flat = np.bincount(k_hi[hi == lo], seg_h[hi == lo], minlength=nl)
    slope = hi > lo
    counts = (k_lo - k_hi)[slope]
    sid = np.repeat(np.flatnonzero(slope), counts)
    first = np.repeat(k_hi[slope], counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    interval = first + offs
    gap = levels[interval] - levels[interval + 1]
    contrib = seg_h[sid] * gap / (hi[sid] - lo[sid])
    grow = np.bincount(interval, contrib, minlength=nl)[: nl - 1] if nl > 1 else np.zeros(0)

    xs = np.empty(2 * nl)
    pos = 0.0
    for k in range(nl):
        xs[2 * k] = pos  # measure of {u > t_k}
        pos += flat[k]
        xs[2 * k + 1] = pos  # measure of {u >= t_k}
        if k < nl - 1:
            pos += grow[k]
    ts = np.repeat(levels, 2)
    keep = np.ones(2 * nl, dtype=bool)
    keep[1:] = np.diff(xs) > 0
    keep[0] = True
    return xs[keep], ts[keep]


def _preimage_count(values, seg_i, seg_j) -> int:
    """Fewest preimages of a level strictly between consecutive nodal levels.

    A segment covers the open interval ``(l_k, l_k+1)`` exactly when
    ``lo <= l_k < hi``; counting that way needs no midpoint, which could
    round onto a level when two levels are one ulp apart.
    """
    levels = np.unique(values)
    if len(levels) < 2:
        return 0
    a = values[seg_i]
    b = values[seg_j]
    lo = np.sort(np.minimum(a, b))
    hi = np.sort(np.maximum(a, b))
    below = levels[:-1]
    n = np.searchsorted(lo, below, side="right") - np.searchsorted(hi, below, side="right")
    return int(n.min())


def decreasing_rearrangement(u: DiscreteFunction, p: float) -> RearrangedProfile:
    """Monotone nonincreasing rearrangement of ``|u|`` onto a half-line."""
    m = u.mesh
    v = np.abs(u.values)
    xs, ts = _distribution_knots(v, m.seg_i, m.seg_j, m.seg_h)
    src = p1_norms(v[m.seg_i], v[m.seg_j], m.seg_h, p)
    tgt = p1_norms(ts[:-1], ts[1:], np.diff(xs), p)
    return RearrangedProfile(Target.HALF_LINE, xs, ts, p, src, tgt)


def symmetric_rearrangement(u: DiscreteFunction, p: float, strict: bool = True) -> RearrangedProfile:
    """Even, radially nonincreasing rearrangement of ``|u|`` onto the line.

    The kinetic term can only be certified not to increase when every level
    has at least two preimages; this is checked at the midpoints between
    consecutive nodal levels.  With ``strict`` a failed check raises
    :class:`RearrangementNotCertified`, otherwise ``certified`` is False.
    """
    half = decreasing_rearrangement(u, p)
    m = u.mesh
    count = _preimage_count(np.abs(u.values), m.seg_i, m.seg_j)
    tgt = Norms(half.target_norms.mass, half.target_norms.lp, 4.0 * half.target_norms.kinetic)
    prof = RearrangedProfile(Target.LINE, half.knots_x, half.knots_t, p, half.source_norms, tgt,
                             certified=count >= 2, min_preimages=count)
    if strict and not prof.certified:
        raise RearrangementNotCertified(f"a level has only {count} preimage(s)", prof)
    return prof


# -- competitors ----------------------------------------------------------------

class Family(str, enum.Enum):
    TWO_CIRCLES = "TWO_CIRCLES"
    SIGNPOST = "SIGNPOST"
    TERMINAL_EDGE = "TERMINAL_EDGE"
    TADPOLE = "TADPOLE"
    FORK3 = "FORK3"


PARAMETER_NAMES = {
    Family.TWO_CIRCLES: ("loop", "ring"),
    Family.SIGNPOST: ("loop", "post"),
    Family.TERMINAL_EDGE: ("pendant",),
    Family.TADPOLE: ("loop",),
    Family.FORK3: ("spike1", "spike2", "spike3"),
}


class CompetitorError(ValueError):
    pass


@dataclass(frozen=True)
class CompetitorCertificate:
    mass: float
    energy: float
    soliton_energy: float
    certified: bool


def _aux_mesh(graph: gm.MetricGraph, grid: GridSpec) -> Mesh:
    return Mesh(graph, grid)


def _band_profile(s: SolitonModel, mu: float, start: float, width: float, grid: GridSpec) -> RearrangedProfile:
    """Rearrangement of the two soliton bands ``start <= |x| <= start + width``.

    The bands are laid on a circle (two arcs meeting at their low ends), which
    is how they sit on the folded graph before rearrangement.
    """
    circle = gm.build_graph({"vertices": ["a", "b"], "edges": [
        {"a": "a", "b": "b", "length": width}, {"a": "a", "b": "b", "length": width}]})
    mesh = _aux_mesh(circle, grid)
    u = DiscreteFunction.from_edge_function(mesh, lambda k, x: cf.soliton_value(s, mu, start + width - x))
    return decreasing_rearrangement(u, s.p)


def _interval_profile(s: SolitonModel, mu: float, width: float, grid: GridSpec) -> RearrangedProfile:
    """Rearrangement of the central soliton band ``|x| <= width / 2``."""
    seg = gm.build_graph({"vertices": ["a", "b"], "edges": [{"a": "a", "b": "b", "length": width}]})
    mesh = _aux_mesh(seg, grid)
    u = DiscreteFunction.from_edge_function(mesh, lambda k, x: cf.soliton_value(s, mu, x - width / 2))
    return decreasing_rearrangement(u, s.p)


def _melted_tails(s: SolitonModel, mu: float, start: float, grid: GridSpec) -> RearrangedProfile:
    """Rearrangement of the two soliton tails ``|x| >= start`` into one half-line profile."""
    mesh = _aux_mesh(gm.real_line(), grid)
    u = DiscreteFunction.from_edge_function(mesh, lambda k, x: cf.soliton_value(s, mu, start + x))
    return decreasing_rearrangement(u, s.p)


def _validate(family: Family, lengths) -> tuple[float, ...]:
    names = PARAMETER_NAMES[family]
    lengths = tuple(float(x) for x in lengths)
    if len(lengths) != len(names):
        raise CompetitorError(f"{family.value} takes lengths {names}, got {len(lengths)} value(s)")
    if family == Family.FORK3:
        if any(x < 0 for x in lengths) or sum(x == 0 for x in lengths) > 1:
            raise CompetitorError("fork spikes must be nonnegative with at most one zero")
    elif any(not x > 0 for x in lengths):
        raise CompetitorError("lengths must be positive")
    return lengths


def competitor_graph(family: Family | str, lengths) -> gm.MetricGraph:
    family = Family(family)
    L = _validate(family, lengths)
    if family == Family.TWO_CIRCLES:
        return gm.two_circles(loop=L[0], ring=L[1])
    if family == Family.SIGNPOST:
        return gm.signpost(loop=L[0], post=L[1])
    if family == Family.TERMINAL_EDGE:
        return gm.line_with_pendant(L[0])
    if family == Family.TADPOLE:
        return gm.tadpole(L[0])
    return gm.fork([x for x in L if x > 0])


def build_competitor(family: Family | str, lengths, mu: float, s: SolitonModel,
                     grid: GridSpec | None = None) -> DiscreteFunction:
    """Cut-and-paste competitor of mass ``mu`` with energy at most the soliton level.

    TWO_CIRCLES (loop, ring): the central band of width ``loop`` goes on the
    self-loop, the next two bands of width ``ring / 2`` on the two arcs of
    the ring, the tails on the half-lines; energy is unchanged.
    SIGNPOST (loop, post): as above with ``ring = post``, then the ring
    pieces are rearranged monotonically onto the post.
    TERMINAL_EDGE (pendant): the central band of width ``pendant`` is
    rearranged onto the pendant, peak at the free end.
    TADPOLE (loop): the central band on the loop; the two tails are melted
    into one monotone profile on the half-line.
    FORK3 (spike1, spike2, spike3): tails melted; a ring of length
    ``2 spike1`` opened at the hub gives spike 1 and joins the half-line;
    a loop of length ``spike2 + spike3`` opened at distance ``spike2`` gives
    spikes 2 and 3.  A zero spike yields the corresponding 2-fork.
    """
    family = Family(family)
    L = _validate(family, lengths)
    if not mu > 0:
        raise CompetitorError("mass must be positive")
    g = competitor_graph(family, L)
    grid = grid or GridSpec.default(s, mu)
    # melted tails spread over twice the length, so the target half-lines are doubled
    target_grid = GridSpec(grid.mesh_size, 2 * grid.truncation) if family in (Family.TADPOLE, Family.FORK3) else grid
    mesh = Mesh(g, target_grid)

    def phi(x):
        return cf.soliton_value(s, mu, x)

    edges = g.edges
    if family == Family.TWO_CIRCLES:
        loop, ring = L
        arc = ring / 2

        def f(k, x):
            e = edges[k]
            if e.is_half_line:
                return phi(loop / 2 + arc + x)
            if e.is_loop:
                return phi(x - loop / 2)
            return phi(loop / 2 + arc - x)  # arc from v (low end) to w

    elif family == Family.SIGNPOST:
        loop, post = L
        band = _band_profile(s, mu, loop / 2, post / 2, grid)

        def f(k, x):
            e = edges[k]
            if e.is_half_line:
                return phi(loop / 2 + post / 2 + x)
            if e.is_loop:
                return phi(x - loop / 2)
            return band.sample(post - x)  # post from v to w, largest value at w

    elif family == Family.TERMINAL_EDGE:
        (ell,) = L
        band = _interval_profile(s, mu, ell, grid)

        def f(k, x):
            e = edges[k]
            if e.is_half_line:
                return phi(ell / 2 + x)
            return band.sample(ell - x)  # pendant from v to the free end

    elif family == Family.TADPOLE:
        (loop,) = L
        tails = _melted_tails(s, mu, loop / 2, grid)

        def f(k, x):
            e = edges[k]
            if e.is_half_line:
                return tails.sample(x)
            return phi(x - loop / 2)

    else:
        s1, s2, s3 = L
        top = (s2 + s3) / 2  # half the upper loop
        tails = _melted_tails(s, mu, top + s1, grid)
        spike_profile = {}
        for i, ln in enumerate(L):
            if ln == 0:
                continue
            tip = f"t{len(spike_profile) + 1}"
            if i == 0:
                spike_profile[tip] = (lambda d: phi(top + d))
            elif i == 1:
                spike_profile[tip] = (lambda d: phi(d - top))
            else:
                spike_profile[tip] = (lambda d: phi(top - d))

        def f(k, x):
            e = edges[k]
            if e.is_half_line:
                # handle of the fork (the opened ring arc) followed by the melted tails
                return np.where(x <= s1, phi(top + x), tails.sample(np.maximum(x - s1, 0.0)))
            tip = e.a if e.b == "v" else e.b
            dist = e.length - x if e.a == tip else x  # distance from the hub
            return spike_profile[tip](dist)

    u = DiscreteFunction.from_edge_function(mesh, f, vertex_tol=1e-6)
    return mass_project(u, mu)


def competitor_certificate(u: DiscreteFunction, mu: float, s: SolitonModel, tol: float = 1e-6) -> CompetitorCertificate:
    """Compare the competitor's energy against the soliton level at mass ``mu``."""
    e = energy(u, s.p)
    e_line = cf.soliton_energy_line(s, mu)
    return CompetitorCertificate(mass=mass(u), energy=e, soliton_energy=e_line, certified=bool(e <= e_line + tol))


# -- stretch surgery --------------------------------------------------------------

@dataclass(frozen=True)
class SurgeryResult:
    function: DiscreteFunction
    ell: float
    ell_prime: float  # realized on the grid
    delta: float
    stretch: int
    piece_kinetic: float  # (1/2) int |u'|^2 over one removed piece
    removed_kinetic: float  # same, summed over all removed pieces
    stretched_kinetic: float
    energy_before: float
    energy_after: float

    @property
    def piece_reduction(self) -> float:
        """Stretched kinetic energy over that of one removed piece (equals 1/N)."""
        return self.stretched_kinetic / self.piece_kinetic if self.piece_kinetic else math.nan

    @property
    def total_reduction(self) -> float:
        """Stretched kinetic energy over that of all N removed pieces (equals 1/N^2)."""
        return self.stretched_kinetic / self.removed_kinetic if self.removed_kinetic else math.nan


def stretch_surgery(u: DiscreteFunction, ell_prime: float, stretch: int | None = None,
                    p: float = 4.0, agree_tol: float = 1e-6) -> SurgeryResult:
    """Lengthen the pendant of a star-with-pendant state from ``ell`` to ``ell_prime``.

    Each of the N half-lines loses its initial piece ``[0, delta)`` with
    ``delta = (ell_prime - ell) / N``; the common piece is stretched by the
    factor N onto a new segment of length ``N delta`` inserted between the
    hub and the old pendant.  Mass and all L^r norms are unchanged and the
    kinetic energy of the piece drops by the factor 1/N.  ``delta`` is
    rounded to a whole number of cells; half-lines keep their truncation
    length by padding zeros at the far end.  The output graph carries a
    degree-two vertex ``v1`` where the old pendant starts.
    """
    mesh = u.mesh
    g = mesh.graph
    hl = g.half_lines
    fin = g.finite_edges
    if len(fin) != 1 or len(hl) < 2 or len({g.edges[k].a for k in hl}) != 1:
        raise ValueError("expected a star of half-lines with one terminal edge")
    N = len(hl) if stretch is None else int(stretch)
    if N != len(hl):
        raise ValueError("the stretch factor must equal the number of half-lines")
    pend = g.edges[fin[0]]
    hub = g.edges[hl[0]].a
    if pend.a != hub:
        raise ValueError("terminal edge must start at the hub")
    ell = pend.length
    h = float(mesh.spacing[hl[0]])
    if any(abs(mesh.spacing[k] - h) > 1e-15 * h for k in hl):
        raise ValueError("half-lines must share one grid")
    j = int(round((ell_prime - ell) / N / h))
    if ell_prime < ell or j < 0:
        raise ValueError("ell_prime must not be shorter than ell")

    tails = np.array([u.edge_values(k) for k in hl])
    spread = float(np.max(np.abs(tails - tails.mean(axis=0))))
    if spread > agree_tol * float(np.max(np.abs(tails))):
        raise ValueError(f"half-line restrictions disagree by {spread:.3e}")
    tail = tails.mean(axis=0)
    if j == 0:
        return SurgeryResult(u, ell, ell, 0.0, N, 0.0, 0.0, 0.0, energy(u, p), energy(u, p))
    if j >= len(tail) - 2:
        raise ValueError("delta does not fit inside the truncated half-lines")

    delta = j * h
    piece = tail[: j + 1]
    # new graph: hub v, stretched segment v-v1, old pendant v1-w
    tip = pend.b
    verts = [hub, "v1", tip] if "v1" not in g.vertices else None
    if verts is None or not (hub < "v1" < tip):
        raise ValueError("unexpected vertex names; expected hub 'v' and tip 'w'")
    new_g = gm.build_graph({
        "vertices": verts,
        "edges": [{"a": hub, "b": gm.INF, "length": gm.INF} for _ in hl]
        + [{"a": hub, "b": "v1", "length": N * delta}, {"a": "v1", "b": tip, "length": ell}],
    })
    counts = [mesh.counts[k] for k in hl] + [j, mesh.counts[fin[0]]]
    new_mesh = Mesh(new_g, GridSpec(h, mesh.grid.truncation), counts=counts)
    new_tail = np.concatenate([tail[j:], np.zeros(j)])
    stretched = piece[::-1]
    pend_vals = u.edge_values(fin[0])

    def f(k, x):
        if k < N:
            return new_tail
        if k == N:
            return stretched
        return pend_vals

    v = mass_project(DiscreteFunction.from_edge_function(new_mesh, f, vertex_tol=1e-12), mass(u))
    piece_kin = 0.5 * float(np.sum(np.diff(piece) ** 2) / h)
    stretched_kin = 0.5 * float(np.sum(np.diff(stretched) ** 2) / (N * h))
    return SurgeryResult(function=v, ell=ell, ell_prime=ell + N * delta, delta=delta, stretch=N,
                         piece_kinetic=piece_kin, removed_kinetic=N * piece_kin,
                         stretched_kinetic=stretched_kin, energy_before=energy(u, p), energy_after=energy(v, p))
