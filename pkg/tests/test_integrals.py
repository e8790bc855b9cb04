import itertools
import math

import numpy as np
import pytest
from conftest import rotation_23n
from hypothesis import given
from hypothesis import strategies as st

from lagrange_billiards.checks import random_state
from lagrange_billiards.flow import PhaseState, simulate
from lagrange_billiards.forces import LagrangeParams
from lagrange_billiards.integrals import (
    FirstIntegral,
    angular_momentum,
    bracket_table,
    casimir_C,
    drift_report,
    evaluate,
    integral_family,
    jacobian_rank,
    kinetic_sph_expanded,
    kinetic_sph_momenta,
    make,
    momentum_bracket_identity,
    poisson_bracket,
    projected_chart_energy,
)
from lagrange_billiards.projection import project_state
from lagrange_billiards.quadrics import QuadricWall, shape_from_focus
from lagrange_billiards.spaceform import SpaceForm

P = LagrangeParams(1.0, 0.8, -0.3, 0.5)


def _spaces(n, a=0.5):
    ch = SpaceForm.euclidean(n, a)
    hc = SpaceForm.euclidean(n, a, hyperbolic=True)
    return [ch, ch.curved, hc, hc.curved]


def test_free_particle_energy():
    sp = SpaceForm.euclidean(3, 1.0)
    F = make("E_sp", sp, LagrangeParams(0, 0, 0, 1.0))
    assert evaluate(F, PhaseState([0.3, 0.1, 0.2, -1], [1, 0, 0, 0])) == pytest.approx(0.25)


def test_angular_momentum_example():
    s = PhaseState([0, 1, 0, -1], [0, 0, 1, 0])
    assert angular_momentum(s, 2, 3) == 1.0
    assert angular_momentum(s, 3, 2) == -1.0


def test_kinetic_forms_agree(rng):
    x = rng.normal(size=(10_000, 3))
    v = rng.normal(size=(10_000, 3))
    worst = max(abs(kinetic_sph_expanded(a, b) - kinetic_sph_momenta(a, b)) / (1 + kinetic_sph_momenta(a, b)) for a, b in zip(x, v))
    assert worst < 1e-12


def test_casimir_examples(rng):
    q = np.append(rng.normal(size=3), -1)
    v = np.append(rng.normal(size=3), 0)
    assert casimir_C(q, 3, v) == pytest.approx(angular_momentum(q, 2, 3, v) ** 2, rel=1e-14)
    q5 = np.append(rng.normal(size=5), -1)
    v5 = np.append(rng.normal(size=5), 0)
    direct = sum(angular_momentum(q5, i, 5, v5) ** 2 for i in range(2, 5))
    assert casimir_C(q5, 5, v5) - casimir_C(q5, 4, v5) == pytest.approx(direct, rel=1e-12)
    assert casimir_C(q5, 2, v5) == 0.0


@given(
    q=st.lists(st.floats(-3, 3), min_size=5, max_size=5),
    lam=st.floats(-3, 3),
    v1=st.floats(-3, 3),
)
def test_parallel_velocity_has_no_transverse_momentum(q, lam, v1):
    q = np.append(q, -1.0)
    v = lam * q
    v[0] = v1
    v[-1] = 0.0
    for i, j in itertools.combinations(range(2, 6), 2):
        assert abs(angular_momentum(q, i, j, v)) < 1e-12


@given(
    q=st.lists(st.floats(-3, 3), min_size=5, max_size=5),
    v=st.lists(st.floats(-3, 3), min_size=5, max_size=5),
)
def test_casimirs_nondecreasing(q, v):
    q, v = np.append(q, -1.0), np.append(v, 0.0)
    vals = [casimir_C(q, k, v) for k in range(2, 6)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_index_errors():
    sp = SpaceForm.euclidean(3, 0.5)
    with pytest.raises(IndexError):
        make("L_ij", sp, P, 2, 2)
    with pytest.raises(IndexError):
        make("C_k", sp, P, 4)
    with pytest.raises(IndexError):
        casimir_C(np.zeros(4), 4, np.zeros(4))
    with pytest.raises(ValueError):
        FirstIntegral("E_sph", sp, P)
    with pytest.raises(ValueError):
        FirstIntegral("E_hyp", SpaceForm.sphere(3, 0.5), P)
    with pytest.raises(ValueError):
        FirstIntegral("nope", sp, P)


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("hyp", [False, True])
def test_projection_identities(n, hyp, rng):
    chart = SpaceForm.euclidean(n, 0.5, hyperbolic=hyp)
    curved = chart.curved
    e_curved = "E_hyp" if hyp else "E_sph"
    pairs = [
        (make("E_sp", chart, P), make("E_sp_hat", curved, P)),
        (make("E_sph_chart", chart, P), make(e_curved, curved, P)),
    ] + [(make("C_k", chart, P, k), make("C_hat_k", curved, P, k)) for k in range(3, n + 1)]
    for _ in range(50):
        s = random_state(chart, rng)
        q, v = project_state(curved, s.q, s.v)
        for F, G in pairs:
            assert F(s.q, s.v) == pytest.approx(G(q, v), abs=1e-10 * max(1, abs(F(s.q, s.v))))


def test_hatted_energy_near_equator():
    s = SpaceForm.sphere(3, 0.5)
    F = make("E_sp_hat", s, P)
    vals = []
    for eps in (1e-1, 1e-2, 1e-3):
        q = np.array([0, math.sqrt(1 - eps * eps), 0, -eps])
        vals.append(F(q, np.array([0, 0, 1.0, 0])))
    assert all(math.isfinite(v) for v in vals)
    # the Hooke term f |x|^2 with f < 0 grows like 1/eps^2
    assert vals[-1] > vals[0] > 0
    with pytest.raises(ZeroDivisionError):
        projected_chart_energy(s, P, [0, 1, 0, 0], [0, 0, 1, 0])


def test_rotation_invariance_of_curved_energy_in_chart(rng):
    for hyp in (False, True):
        sp = SpaceForm.euclidean(5, 0.5, hyperbolic=hyp)
        F = make("E_sph_chart", sp, P)
        for _ in range(20):
            s = random_state(sp, rng)
            R = rotation_23n(rng, 5)
            assert F(R @ s.q, R @ s.v) == pytest.approx(F(s.q, s.v), abs=1e-12 * max(1, abs(F(s.q, s.v))))


@pytest.mark.parametrize("space", _spaces(3))
def test_self_bracket_vanishes(space, rng):
    fam = integral_family(space, P)
    s = random_state(space, rng)
    for F in fam:
        assert abs(poisson_bracket(F, F, s)) < 1e-9


def test_energy_commutes_with_angular_momentum(rng):
    sp = SpaceForm.euclidean(3, 0.5)
    E, L = make("E_sp", sp, P), make("L_ij", sp, P, 2, 3)
    for _ in range(30):
        assert abs(poisson_bracket(E, L, random_state(sp, rng))) < 1e-6


def test_bracket_is_not_trivially_zero(rng):
    # oracle sanity: {x-momentum-like, L_12} is nonzero when a = 0
    sp = SpaceForm.euclidean(3, 0.0)
    s = random_state(sp, rng)
    L12, L23 = make("L_ij", sp, LagrangeParams(0, 0, 0), 1, 2), make("L_ij", sp, LagrangeParams(0, 0, 0), 2, 3)
    val = poisson_bracket(L12, L23, s)
    assert val == pytest.approx(momentum_bracket_identity(s, 1, 2, 2, 3), abs=1e-6)
    assert abs(val) > 1e-3


def test_momentum_bracket_identity_all_patterns(rng):
    sp = SpaceForm.euclidean(4, 0.0)
    p0 = LagrangeParams(0, 0, 0)
    pairs = [(i, j) for i in range(1, 5) for j in range(1, 5) if i != j]
    for _ in range(3):
        s = random_state(sp, rng)
        for (k1, k2), (l1, l2) in itertools.product(pairs, pairs):
            lhs = poisson_bracket(make("L_ij", sp, p0, k1, k2), make("L_ij", sp, p0, l1, l2), s)
            assert lhs == pytest.approx(momentum_bracket_identity(s, k1, k2, l1, l2), abs=1e-6)


def test_momentum_bracket_identity_transverse_with_foci(rng):
    # with a != 0 the metric rescales the first axis, so only indices >= 2 obey the identity
    sp = SpaceForm.euclidean(5, 0.5)
    pairs = [(i, j) for i in range(2, 6) for j in range(2, 6) if i != j]
    s = random_state(sp, rng)
    for (k1, k2), (l1, l2) in itertools.product(pairs, pairs):
        lhs = poisson_bracket(make("L_ij", sp, P, k1, k2), make("L_ij", sp, P, l1, l2), s)
        assert lhs == pytest.approx(momentum_bracket_identity(s, k1, k2, l1, l2), abs=1e-6)


@pytest.mark.parametrize("space", _spaces(3) + _spaces(5))
def test_family_in_involution_and_independent(space, rng):
    fam = integral_family(space, P)
    for _ in range(10):
        s = random_state(space, rng)
        assert max(abs(v) for v in bracket_table(fam, s).values()) < 1e-6
        assert jacobian_rank(fam, s) == space.n


def test_duplicate_integral_keeps_rank(rng):
    sp = SpaceForm.euclidean(3, 0.5)
    fam = integral_family(sp, P)
    s = random_state(sp, rng)
    assert jacobian_rank(fam + [fam[0]], s) == jacobian_rank(fam, s) == 3
    assert jacobian_rank([fam[0], fam[0]], s) == 1


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("kind", ["chart", "sphere", "hyperbolic"])
def test_conservation_without_walls(n, kind, rng):
    chart = SpaceForm.euclidean(n, 0.5, hyperbolic=kind == "hyperbolic")
    space = chart if kind == "chart" else chart.curved
    s = random_state(space, rng, radius=0.4, speed=0.5)
    T = 2.0
    tr = simulate(space, P, [], s, T=T)
    assert tr.status.value == "time-limit"
    for entry in drift_report(tr, integral_family(space, P)).values():
        assert entry.max_drift / T < 1e-9


def test_free_ball_billiard_energy_drift():
    sp = SpaceForm.euclidean(3, 0.0)
    p = LagrangeParams(0, 0, 0)
    w = QuadricWall(sp, "spheroid", 1.0, 1.0)
    tr = simulate(sp, p, [w], PhaseState([0.1, 0.2, 0.3, -1], [0.9, -0.4, 0.3, 0]), max_reflections=100)
    assert len(tr.events) == 100
    assert drift_report(tr, [make("E_sp", sp, p)])["E_sp"].max_drift < 1e-10


def test_angular_momentum_jumps_at_reflections():
    sp = SpaceForm.euclidean(3, 0.5)
    w = QuadricWall(sp, "spheroid", 1.5, shape_from_focus("spheroid", 0.5, 1.5, sp))
    tr = simulate(sp, P, [w], PhaseState([0.1, 0.4, 0.2, -1], [1.2, 1.5, -1.4, 0]), max_reflections=20)
    rep = drift_report(tr, [make("L_ij", sp, P, 2, 3)])["L_23"]
    assert len(rep.reflection_jumps) == 20
    assert rep.max_jump < 1e-12
