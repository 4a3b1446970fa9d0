"""Existence decisions, the star-with-pendant threshold and broom evidence.

Everything here is measured in the scale-invariant length ``mu^beta ell``.
Scans fix ``mu = 1``; a run at another mass maps lengths by the dilation
group and must reproduce the same decisions.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize

from . import closed_forms as cf
from . import graph_model as gm
from .closed_forms import SolitonModel
from .function_space import DiscreteFunction, GridSpec, Mesh, energy, mass_project
from .minimize import MinimizeConfig, MinimizeResult, Seed, Status, minimize


class Decision(str, enum.Enum):
    EXISTS = "EXISTS"
    VANISHES = "VANISHES"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class ExistenceDecision:
    decision: Decision
    energy: float  # lowest energy reached (infimum estimate when vanishing)
    normalized_gap: float  # mu^(-2 beta - 1) (energy - soliton level)
    statuses: tuple[str, ...]  # per seed vertex
    seed_vertices: tuple[str, ...]
    truncation_stable: bool | None
    best: MinimizeResult | None = field(default=None, repr=False, compare=False)


def seed_vertices(g: gm.MetricGraph) -> list[str]:
    """One core vertex per class of (degree, sorted incident lengths)."""
    core = {x for k in g.finite_edges for x in (g.edges[k].a, g.edges[k].b)} or set(g.vertices)
    seen, out = set(), []
    for v in g.vertices:
        if v not in core:
            continue
        sig = (g.degree(v), tuple(sorted(round(g.edges[k].length, 12) for k in g.incident(v))))
        if sig not in seen:
            seen.add(sig)
            out.append(v)
    return out


def decide_existence(g: gm.MetricGraph, mu: float, s: SolitonModel,
                     cfg: MinimizeConfig = MinimizeConfig()) -> ExistenceDecision:
    """Run the solver from a half-soliton seed at each distinct core vertex.

    EXISTS: some run converges to a state at or below the soliton level
    (within ``cfg.existence_tolerance`` in normalized units).  VANISHES:
    every run vanishes and the verdict survives doubling the truncation.
    Anything else is INCONCLUSIVE.
    """
    verts = seed_vertices(g)
    runs = [minimize(g, mu, s, replace(cfg, seed_profile=Seed.HALF_SOLITON_AT_CORE, seed_vertex=v,
                                       audit_truncation=False)) for v in verts]
    e_line = cf.soliton_energy_line(s, mu)
    norm = mu ** (-2 * s.beta - 1)
    statuses = tuple(r.status.value for r in runs)
    conv = [r for r in runs if r.status == Status.CONVERGED]
    if conv:
        best = min(conv, key=lambda r: r.energy)
        return ExistenceDecision(Decision.EXISTS, best.energy, (best.energy - e_line) * norm,
                                 statuses, tuple(verts), None, best)
    best = min(runs, key=lambda r: r.infimum_estimate)
    if all(r.status == Status.VANISHING for r in runs):
        stable = True
        inf = best.infimum_estimate
        if cfg.audit_truncation:
            wide = replace(cfg, truncation=2 * cfg.grid(s, mu).truncation, audit_truncation=False)
            again = [minimize(g, mu, s, replace(wide, seed_vertex=v)) for v in verts]
            stable = all(r.status == Status.VANISHING for r in again)
            inf = min([inf] + [r.infimum_estimate for r in again])
        decision = Decision.VANISHES if stable else Decision.INCONCLUSIVE
        return ExistenceDecision(decision, inf, (inf - e_line) * norm, statuses, tuple(verts), stable, best)
    return ExistenceDecision(Decision.INCONCLUSIVE, best.energy, (best.energy - e_line) * norm,
                             statuses, tuple(verts), None, best)


# -- threshold scan ----------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdSample:
    ell: float  # scale-invariant length mu^beta ell
    decision: Decision
    energy: float  # normalized energy mu^(-2 beta - 1) E


@dataclass(frozen=True)
class ThresholdResult:
    p: float
    N: int
    mu: float
    bracket: tuple[float, float] | None  # scale-invariant units; None when decisions are not monotone
    samples: tuple[ThresholdSample, ...]
    monotone: bool

    def to_dict(self) -> dict:
        return {
            "p": self.p, "N": self.N, "mass": self.mu,
            "bracket": None if self.bracket is None else list(self.bracket),
            "monotone": self.monotone,
            "samples": [{"ell": x.ell, "decision": x.decision.value, "energy": x.energy} for x in self.samples],
        }


DEFAULT_COARSE_GRID = (0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 20.0)


def _threshold_point(args) -> ThresholdSample:
    N, x, mu, s, cfg = args
    ell = x * mu ** (-s.beta)
    d = decide_existence(gm.star_with_pendant(N, ell), mu, s, cfg)
    return ThresholdSample(x, d.decision, d.normalized_gap + (-s.theta))


def _sample_many(N, xs, mu, s, cfg, jobs):
    tasks = [(N, x, mu, s, cfg) for x in xs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_threshold_point, tasks))
    return [_threshold_point(t) for t in tasks]


def _is_monotone(samples) -> bool:
    seq = [x.decision for x in sorted(samples, key=lambda x: x.ell)]
    if Decision.INCONCLUSIVE in seq:
        return False
    first_exist = next((i for i, d in enumerate(seq) if d == Decision.EXISTS), len(seq))
    return all(d == Decision.EXISTS for d in seq[first_exist:])


def scan_threshold(N: int, p: float, cfg: MinimizeConfig = MinimizeConfig(), mu: float = 1.0,
                   coarse=DEFAULT_COARSE_GRID, bracket_tolerance: float = 1e-2,
                   jobs: int = 1) -> ThresholdResult:
    """Bracket the critical scale-invariant pendant length for N half-lines.

    Decisions on a coarse grid are checked for monotonicity; the interval
    where they flip is then bisected down to ``bracket_tolerance``.
    """
    if N < 3:
        raise ValueError("the threshold needs at least three half-lines")
    s = cf.soliton_constants(p)
    samples = _sample_many(N, sorted(coarse), mu, s, cfg, jobs)
    if not _is_monotone(samples):
        return ThresholdResult(p, N, mu, None, tuple(samples), False)
    lows = [x.ell for x in samples if x.decision == Decision.VANISHES]
    highs = [x.ell for x in samples if x.decision == Decision.EXISTS]
    if not lows or not highs:
        return ThresholdResult(p, N, mu, None, tuple(samples), True)
    lo, hi = max(lows), min(highs)
    while hi - lo > bracket_tolerance:
        mid = 0.5 * (lo + hi)
        smp = _threshold_point((N, mid, mu, s, cfg))
        samples.append(smp)
        if smp.decision == Decision.EXISTS:
            hi = mid
        elif smp.decision == Decision.VANISHES:
            lo = mid
        else:
            samples.sort(key=lambda x: x.ell)
            return ThresholdResult(p, N, mu, None, tuple(samples), False)
    samples.sort(key=lambda x: x.ell)
    return ThresholdResult(p, N, mu, (lo, hi), tuple(samples), _is_monotone(samples))


# -- long-pendant certificate ----------------------------------------------------------

@dataclass(frozen=True)
class PendantCertificate:
    certified: bool
    competitor_energy: float
    soliton_energy: float
    epsilon: float
    edge: int


def _terminal_edges(g: gm.MetricGraph) -> list[int]:
    return [k for k in g.finite_edges if not g.edges[k].is_loop
            and (g.degree(g.edges[k].a) == 1 or g.degree(g.edges[k].b) == 1)]


def _truncated_energy(s: SolitonModel, mu: float, eps: float) -> float:
    """Continuous energy of the renormalized (phi_{2 mu} - eps)^+ on a half-line."""
    x_eps = cf.soliton_inverse(s, 2 * mu, eps)

    def q(f):
        return integrate.quad(f, 0.0, x_eps, epsabs=0.0, epsrel=1e-12, limit=200)[0]

    m = q(lambda x: (cf.soliton_value(s, 2 * mu, x) - eps) ** 2)
    t = q(lambda x: cf.soliton_derivative(s, 2 * mu, x) ** 2)
    v = q(lambda x: (cf.soliton_value(s, 2 * mu, x) - eps) ** s.p)
    c2 = mu / m
    return 0.5 * c2 * t - c2 ** (s.p / 2) * v / s.p


def pendant_certificate(g: gm.MetricGraph, mu: float, s: SolitonModel, grid: GridSpec | None = None,
                              epsilon: float | None = None, edge: int | None = None) -> PendantCertificate:
    """Existence certificate from a truncated half-soliton on a terminal edge.

    The profile ``(phi_{2 mu} - eps)^+`` is placed with its peak at the free
    end, extended by zero, renormalized to mass ``mu`` and evaluated on the
    mesh.  ``eps`` defaults to ``phi_{2 mu}(ell)``, the lowest cut for which
    the profile vanishes at the attaching vertex.
    """
    term = _terminal_edges(g)
    if not term:
        raise ValueError("graph has no terminal edge")
    k = term[0] if edge is None else edge
    if k not in term:
        raise ValueError(f"edge {k} is not a terminal edge")
    e = g.edges[k]
    ell = e.length
    top = cf.soliton_value(s, 2 * mu, 0.0)
    lo_eps = cf.soliton_value(s, 2 * mu, ell)
    if epsilon is None:
        # the energy increases with the cut level, so the lowest admissible cut is best
        epsilon = float(lo_eps)
    if not lo_eps <= epsilon < top:
        raise ValueError("epsilon must make the profile vanish at the attaching vertex")
    grid = grid or GridSpec.default(s, mu)
    mesh = Mesh(g, grid)
    free_end_at_b = g.degree(e.b) == 1

    def f(j, x):
        if j != k:
            return np.zeros_like(x)
        d = ell - x if free_end_at_b else x  # distance from the free end
        return np.maximum(cf.soliton_value(s, 2 * mu, d) - epsilon, 0.0)

    u = mass_project(DiscreteFunction.from_edge_function(mesh, f), mu)
    E = energy(u, s.p)
    e_line = cf.soliton_energy_line(s, mu)
    return PendantCertificate(bool(E <= e_line), E, e_line, float(epsilon), k)


def pendant_constant(p: float, refinement: int | None = None) -> float:
    """Smallest mu^beta ell certified by the truncated half-soliton (mu = 1).

    The support length of ``(phi_2 - eps)^+`` grows as ``eps`` decreases while
    its energy improves, so the constant is the support length at the largest
    ``eps`` whose energy reaches the soliton level (found by root bracketing).
    With ``refinement = k`` the cut is restricted to the dyadic levels
    ``j / 2^k`` of the peak value; the grids are nested, so the result is an
    upper bound that decreases to the limit as ``k`` grows.
    """
    s = cf.soliton_constants(p)
    top = cf.soliton_value(s, 2.0, 0.0)
    e_line = cf.soliton_energy_line(s, 1.0)

    def excess(rel):
        return _truncated_energy(s, 1.0, rel * top) - e_line

    if refinement is None:
        rel = optimize.brentq(excess, 1e-6, 0.999, xtol=1e-15, rtol=1e-14)
        return cf.soliton_inverse(s, 2.0, rel * top)
    levels = np.arange(1, 2**refinement) / 2**refinement
    ok = [r for r in levels if excess(r) <= 0]
    if not ok:
        return math.inf
    return cf.soliton_inverse(s, 2.0, max(ok) * top)


# -- broom evidence ----------------------------------------------------------------------

@dataclass(frozen=True)
class NonexistenceEvidence:
    n: int
    ell: float
    mu: float
    p: float
    obstruction_ratio: float  # max(mu^beta diam K, 1 / (mu^beta |K|))
    decision: Decision
    energy_gap_to_soliton: float  # infimum estimate minus soliton level (absolute)
    infimum_estimate: float
    truncation_stable: bool | None

    def to_dict(self) -> dict:
        return {
            "n": self.n, "ell": self.ell, "mass": self.mu, "p": self.p,
            "obstructionRatio": self.obstruction_ratio, "decision": self.decision.value,
            "energyGapToSoliton": self.energy_gap_to_soliton, "infimumEstimate": self.infimum_estimate,
            "truncationStable": self.truncation_stable,
        }


def obstruction_ratio(g: gm.MetricGraph, mu: float, s: SolitonModel) -> float:
    core = gm.compact_core(g)
    scale = mu**s.beta
    return max(scale * core.diameter, 1.0 / (scale * core.total_length))


def broom_nonexistence(n: int, ell: float, mu: float, p: float,
                       cfg: MinimizeConfig = MinimizeConfig()) -> NonexistenceEvidence:
    """Solver evidence for the broom with ``n`` terminal edges of length ``ell``."""
    if n < 1 or not ell > 0:
        raise ValueError("need n >= 1 and ell > 0")
    s = cf.soliton_constants(p)
    g = gm.broom(n, ell)
    d = decide_existence(g, mu, s, cfg)
    e_line = cf.soliton_energy_line(s, mu)
    return NonexistenceEvidence(n=n, ell=ell, mu=mu, p=p, obstruction_ratio=obstruction_ratio(g, mu, s),
                                decision=d.decision, energy_gap_to_soliton=d.energy - e_line,
                                infimum_estimate=d.energy, truncation_stable=d.truncation_stable)
