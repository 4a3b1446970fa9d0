import math

import pytest

from nlsgraph import closed_forms as cf
from nlsgraph import graph_model as gm
from nlsgraph import phase_scan as ps
from nlsgraph.function_space import GridSpec
from nlsgraph.minimize import MinimizeConfig
from nlsgraph.phase_scan import Decision, ThresholdSample

CHEAP = MinimizeConfig(mesh_size=0.01, truncation=40.0)


# -- existence decisions -----------------------------------------------------------

def test_seed_vertices_deduplicate_symmetric_core():
    # the three spikes of a broom are interchangeable; hub and tips differ
    verts = ps.seed_vertices(gm.broom(3, 0.5))
    assert len(verts) == 2


def test_seed_vertices_of_star_is_its_hub():
    assert ps.seed_vertices(gm.star(3)) == ["v"]


def test_gallery_star_vanishes(gallery_decisions):
    d = gallery_decisions["star3"]
    assert d.decision == Decision.VANISHES
    assert d.truncation_stable is True
    assert abs(d.normalized_gap) < 1e-6


@pytest.mark.parametrize("name", ["tadpole", "half_line", "star_with_pendant", "signpost", "fork3"])
def test_gallery_existence(gallery_decisions, name):
    d = gallery_decisions[name]
    assert d.decision == Decision.EXISTS
    assert d.normalized_gap <= 1e-6


def test_half_line_decision_reaches_half_line_level(gallery_decisions, s4):
    d = gallery_decisions["half_line"]
    assert d.energy == pytest.approx(cf.soliton_energy_halfline(s4, 1.0), abs=1e-6)


def test_decision_is_scale_invariant(s4):
    g = gm.tadpole(1.0)
    mu = 2.0
    d1 = ps.decide_existence(g, 1.0, s4, CHEAP)
    d2 = ps.decide_existence(gm.dilate(g, mu ** (-s4.beta)), mu, s4,
                             MinimizeConfig(mesh_size=0.01 * mu ** (-s4.beta), truncation=40.0 * mu ** (-s4.beta)))
    assert d1.decision == d2.decision == Decision.EXISTS
    assert d2.normalized_gap == pytest.approx(d1.normalized_gap, abs=1e-6)


# -- threshold scan ------------------------------------------------------------------

def _samples(decisions):
    return [ThresholdSample(float(i), Decision(d), 0.0) for i, d in enumerate(decisions)]


@pytest.mark.parametrize("seq,expected", [
    (["VANISHES", "VANISHES", "EXISTS", "EXISTS"], True),
    (["VANISHES", "VANISHES"], True),
    (["EXISTS", "EXISTS"], True),
    (["VANISHES", "EXISTS", "VANISHES", "EXISTS"], False),
    (["EXISTS", "VANISHES"], False),
    (["VANISHES", "INCONCLUSIVE", "EXISTS"], False),
])
def test_monotonicity_check(seq, expected):
    assert ps._is_monotone(_samples(seq)) is expected


def test_threshold_needs_three_half_lines():
    with pytest.raises(ValueError):
        ps.scan_threshold(2, 4.0)


def test_threshold_bracket_on_cheap_grid():
    res = ps.scan_threshold(3, 4.0, CHEAP, coarse=(0.5, 1.0, 2.0, 4.0, 8.0), bracket_tolerance=0.25)
    assert res.monotone
    lo, hi = res.bracket
    assert 0 < hi - lo <= 0.25
    # no existence below the bracket, existence above it
    for x in res.samples:
        assert (x.decision == Decision.EXISTS) == (x.ell >= hi)
    d = res.to_dict()
    assert d["bracket"] == [lo, hi] and len(d["samples"]) == len(res.samples)


def test_threshold_reports_missing_flip():
    res = ps.scan_threshold(3, 4.0, CHEAP, coarse=(6.0, 8.0))
    assert res.bracket is None and res.monotone


# -- long-pendant certificate ----------------------------------------------------------

def test_pendant_constant_value():
    # support length where the truncated double-mass half-soliton meets the soliton level
    assert ps.pendant_constant(4.0) == pytest.approx(3.3611, abs=1e-4)


def test_pendant_constant_refinement_decreases_to_limit():
    limit = ps.pendant_constant(4.0)
    seq = [ps.pendant_constant(4.0, k) for k in range(1, 12)]
    assert all(b <= a for a, b in zip(seq, seq[1:]))
    assert all(x >= limit for x in seq)
    assert seq[-1] - limit < 1e-2


def test_pendant_constant_coarsest_level_is_vacuous():
    assert ps.pendant_constant(4.0, 1) == math.inf


@pytest.mark.parametrize("ell,expected", [(0.1, False), (3.0, False), (3.45, True), (5.0, True)])
def test_pendant_certificate_matches_constant(s4, ell, expected):
    cert = ps.pendant_certificate(gm.line_with_pendant(ell), 1.0, s4, GridSpec(0.005, 40.0))
    assert cert.certified is expected
    assert cert.soliton_energy == pytest.approx(-s4.theta)


def test_pendant_certificate_scale_invariance(s4):
    mu = 2.0
    ell = 5.0 * mu ** (-s4.beta)
    cert = ps.pendant_certificate(gm.line_with_pendant(ell), mu, s4)
    assert cert.certified
    assert cert.soliton_energy == pytest.approx(cf.soliton_energy_line(s4, mu))


def test_pendant_certificate_rejects_graph_without_terminal_edge(s4):
    with pytest.raises(ValueError):
        ps.pendant_certificate(gm.tadpole(1.0), 1.0, s4)


def test_pendant_certificate_rejects_bad_cut(s4):
    g = gm.line_with_pendant(5.0)
    top = cf.soliton_value(s4, 2.0, 0.0)
    with pytest.raises(ValueError):
        ps.pendant_certificate(g, 1.0, s4, GridSpec(0.01, 20.0), epsilon=top)


# -- broom evidence ----------------------------------------------------------------------

def test_obstruction_ratio_of_broom(s4):
    # core: n spikes of length ell at one hub
    g = gm.broom(5, 0.05)
    assert ps.obstruction_ratio(g, 1.0, s4) == pytest.approx(max(0.1, 1 / 0.25))


def test_three_fork_with_short_tines_exists():
    ev = ps.broom_nonexistence(3, 0.05, 1.0, 4.0)
    assert ev.decision == Decision.EXISTS
    assert ev.energy_gap_to_soliton < 0


@pytest.mark.slow
def test_many_short_spikes_vanish():
    # with many spikes the core is long while its diameter stays small
    few = ps.broom_nonexistence(5, 0.05, 1.0, 4.0)
    many = ps.broom_nonexistence(320, 0.05, 1.0, 4.0)
    assert many.obstruction_ratio < few.obstruction_ratio
    assert few.decision == Decision.EXISTS
    assert many.decision == Decision.VANISHES
    assert many.truncation_stable is True


def test_broom_rejects_bad_parameters():
    with pytest.raises(ValueError):
        ps.broom_nonexistence(0, 0.05, 1.0, 4.0)
    with pytest.raises(ValueError):
        ps.broom_nonexistence(3, 0.0, 1.0, 4.0)
