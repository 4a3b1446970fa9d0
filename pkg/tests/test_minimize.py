import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsgraph import closed_forms as cf
from nlsgraph import function_space as fs
from nlsgraph import graph_model as gm
from nlsgraph import minimize as mn
from nlsgraph.function_space import DiscreteFunction, GridSpec, Mesh
from nlsgraph.minimize import MinimizeConfig, Seed, Status

FAST = MinimizeConfig(mesh_size=0.01, truncation=40.0)


def test_config_invariants():
    with pytest.raises(ValueError):
        MinimizeConfig(step_size=0.0)
    with pytest.raises(ValueError):
        MinimizeConfig(gradient_tolerance=-1.0)
    with pytest.raises(ValueError):
        MinimizeConfig(seed_profile=Seed.CUSTOM)


def test_rejects_compact_graph_and_bad_mass(s4):
    compact = gm.build_graph({"vertices": ["v"], "edges": [{"a": "v", "b": "v", "length": 1.0}]})
    with pytest.raises(ValueError):
        mn.minimize(compact, 1.0, s4)
    with pytest.raises(ValueError):
        mn.minimize(gm.half_line(), 0.0, s4)


def test_line_ground_state(s4):
    r = mn.minimize(gm.real_line(), 1.0, s4)
    assert r.status == Status.CONVERGED
    assert r.energy == pytest.approx(-1 / 96, rel=1e-4)
    assert r.energy_monotone
    for fit in r.tail_fits:
        assert fit.m == pytest.approx(1.0, rel=1e-4) and abs(fit.y) < 1e-3


def test_half_line_ground_state(s4):
    r = mn.minimize(gm.half_line(), 1.0, s4)
    assert r.status == Status.CONVERGED
    assert r.energy == pytest.approx(-1 / 24, rel=1e-4)


def test_star_without_pendant_vanishes(s4):
    r = mn.minimize(gm.star(3), 1.0, s4)
    assert r.status == Status.VANISHING
    assert r.infimum_estimate == pytest.approx(-s4.theta, rel=1e-4)
    assert r.truncation_stable


def test_uniform_seed_reaches_the_same_level(s4):
    a = mn.minimize(gm.tadpole(1.0), 1.0, s4, FAST)
    b = mn.minimize(gm.tadpole(1.0), 1.0, s4, MinimizeConfig(mesh_size=0.01, truncation=40.0,
                                                             seed_profile=Seed.UNIFORM_BUMP))
    assert b.status == Status.CONVERGED
    assert b.energy == pytest.approx(a.energy, abs=1e-8)


def test_custom_seed(s4):
    mesh = Mesh(gm.tadpole(1.0), FAST.grid(s4, 1.0))
    seed = fs.random_function(mesh, 4, nonnegative=True)
    r = mn.minimize(gm.tadpole(1.0), 1.0, s4,
                    MinimizeConfig(mesh_size=0.01, truncation=40.0, seed_profile=Seed.CUSTOM, custom_seed=seed),
                    mesh=mesh)
    assert r.status == Status.CONVERGED


def test_restarts_agree(s4):
    energies = []
    for seed in range(5):
        cfg = MinimizeConfig(mesh_size=0.01, truncation=40.0, perturbation=0.3, seed=seed)
        r = mn.minimize(gm.tadpole(1.0), 1.0, s4, cfg)
        assert r.status == Status.CONVERGED
        energies.append(r.energy)
    assert max(energies) - min(energies) < 1e-6


# -- per-graph invariants of converged runs ---------------------------------------------

def test_converged_runs_respect_the_two_sided_bound(gallery_decisions, s4):
    lo, hi = cf.soliton_energy_halfline(s4, 1.0), cf.soliton_energy_line(s4, 1.0)
    for name, d in gallery_decisions.items():
        r = d.best
        if r.status == Status.CONVERGED:
            assert lo - 1e-6 <= r.energy <= hi + 1e-6, name
            assert abs(fs.mass(r.final_function) - 1.0) < 1e-10, name
            assert r.energy_monotone, name
            assert r.euler_lagrange_residual < 1e-4, name


def test_sup_on_core(gallery_decisions):
    for name, d in gallery_decisions.items():
        g = gm.gallery()[name]
        if d.best.status == Status.CONVERGED and len(g.half_lines) >= 2 and not gm.is_isometric_to_line(g):
            assert fs.evaluate(d.best.final_function, 4.0).sup_location.on_core, name


def test_assumption_H_forces_vanishing(gallery_decisions, s4):
    # the line and the two-circle tower are the known graphs with (H) that keep a ground state
    exceptional = {"line", "two_circles"}
    checked = 0
    for name, g in gm.gallery().items():
        if name in exceptional or len(g.half_lines) < 2 or not gm.satisfies_H(g):
            continue
        assert gallery_decisions[name].best.status == Status.VANISHING, name
        checked += 1
    assert checked >= 1
    assert mn.minimize(gm.star(4), 1.0, s4, FAST).status == Status.VANISHING


# -- multiplier and residual ----------------------------------------------------------------

def test_multiplier_of_soliton(s4):
    mesh = Mesh(gm.real_line(), GridSpec(1e-3, 120.0))
    for mu in (0.5, 1.0, 2.0):
        u = DiscreteFunction.from_edge_function(mesh.dilated(mu ** (-s4.beta)),
                                                lambda k, x: cf.soliton_value(s4, mu, x))
        lam = mn.multiplier(u, 4.0)
        assert lam > 0
        assert lam / mu ** (2 * s4.beta) == pytest.approx(s4.multiplier, rel=1e-5)


@settings(deadline=None, max_examples=20)
@given(st.integers(0, 10_000), st.floats(0.25, 4.0))
def test_multiplier_scaling(seed, t):
    s = cf.soliton_constants(4.0)
    u = fs.random_function(Mesh(gm.signpost(1.0, 1.0), GridSpec(0.02, 5.0)), seed)
    ratio = mn.multiplier(fs.rescale(u, t, s), 4.0) / mn.multiplier(u, 4.0)
    assert ratio == pytest.approx(t ** (2 * s.beta), rel=1e-8)


def test_multiplier_of_zero(coarse_grid):
    with pytest.raises(ValueError):
        mn.multiplier(DiscreteFunction.zeros(Mesh(gm.half_line(), coarse_grid)), 4.0)


@settings(deadline=None, max_examples=20)
@given(st.integers(0, 10_000), st.sampled_from(["tadpole", "star_with_pendant", "two_circles"]))
def test_gradient_matches_central_differences(seed, name):
    mesh = Mesh(gm.gallery()[name], GridSpec(0.02, 5.0))
    rng = np.random.default_rng(seed)
    u = fs.random_function(mesh, rng)
    grad = mn.energy_gradient(u, 4.0)
    for _ in range(3):
        d = fs.random_function(mesh, rng).values
        eps = 1e-6 * np.linalg.norm(u.values) / np.linalg.norm(d)
        fd = (fs.energy(u.with_values(u.values + eps * d), 4.0)
              - fs.energy(u.with_values(u.values - eps * d), 4.0)) / (2 * eps)
        assert fd == pytest.approx(float(grad @ d), rel=1e-5)


# -- structure ---------------------------------------------------------------------------

def test_structure_of_long_pendant_state(s4):
    g = gm.star_with_pendant(3, 5.0)
    r = mn.minimize(g, 1.0, s4)
    rep = mn.verify_structure(r, g, s4)
    assert rep.sup_on_core and rep.shared_vertex and rep.equal_shift_asserted
    assert rep.tail_mass_spread < 1e-3 and rep.tail_shift_spread < 1e-3 and rep.min_shift >= -1e-3


def test_structure_of_line_state(s4):
    g = gm.real_line()
    r = mn.minimize(g, 1.0, s4)
    rep = mn.verify_structure(r, g, s4)
    assert rep.tail_shift_spread < 1e-6
    assert rep.sup_on_core


def test_structure_single_half_line_not_asserted(s4):
    g = gm.tadpole(1.0)
    rep = mn.verify_structure(mn.minimize(g, 1.0, s4, FAST), g, s4)
    assert not rep.equal_shift_asserted


def test_structure_needs_convergence(s4):
    r = mn.minimize(gm.star(3), 1.0, s4, FAST)
    with pytest.raises(ValueError):
        mn.verify_structure(r, gm.star(3), s4)


def test_normalized_quantities_across_masses(s4):
    g = gm.star_with_pendant(3, 5.0)
    reps = []
    for mu in (0.5, 1.0, 2.0):
        gm_mu = gm.dilate(g, mu ** (-s4.beta))
        reps.append(mn.verify_structure(mn.minimize(gm_mu, mu, s4), gm_mu, s4))
    for a in reps[1:]:
        assert a.normalized_kinetic == pytest.approx(reps[0].normalized_kinetic, rel=1e-6)
        assert a.normalized_potential == pytest.approx(reps[0].normalized_potential, rel=1e-6)
        assert a.normalized_sup == pytest.approx(reps[0].normalized_sup, rel=1e-6)


# -- energy level curve ------------------------------------------------------------------------

def test_half_line_level_curve(s4):
    curve = mn.energy_level_curve(gm.half_line(), [1.0, 2.0, 3.0], s4)
    for smp in curve:
        assert smp.energy == pytest.approx(cf.soliton_energy_halfline(s4, smp.mu), rel=1e-4)


def test_level_curve_reports_soliton_level_when_vanishing(s4):
    (smp,) = mn.energy_level_curve(gm.star(3), [1.5], s4, FAST)
    assert smp.status == Status.VANISHING
    assert smp.energy == cf.soliton_energy_line(s4, 1.5)


def test_level_curve_needs_increasing_masses(s4):
    with pytest.raises(ValueError):
        mn.energy_level_curve(gm.half_line(), [2.0, 1.0], s4)


def test_summary_is_json_ready(s4):
    import json
    r = mn.minimize(gm.tadpole(1.0), 1.0, s4, FAST)
    out = json.loads(json.dumps(r.summary()))
    assert out["status"] == "CONVERGED" and len(out["tailFits"]) == 1
