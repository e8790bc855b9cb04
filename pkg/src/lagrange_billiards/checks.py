"""Property checks shared by the CLI and the acceptance suite."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flow import PhaseState, Status, reflect, simulate
from .forces import LagrangeParams
from .integrals import bracket_table, integral_family, jacobian_rank
from .projection import project_point, project_state, push_velocity
from .quadrics import QuadricWall, WallKind, focal_distance_residual, sample_wall, shape_from_focus
from .spaceform import SpaceForm, tangent_project

CORRESPONDENCE_TOL = 1e-6
COMMUTATION_TOL = 1e-10
BRACKET_TOL = 1e-6
FOCAL_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.value < self.tol)

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tol": self.tol, "passed": self.passed, **self.details}


def random_chart_state(space: SpaceForm, rng: np.random.Generator, radius: float = 0.6, speed: float = 1.0, clearance: float = 0.15):
    """Random chart state away from the Kepler centers (inside the Klein ball if hyperbolic)."""
    chart = space.chart
    n = chart.n
    centers = [np.eye(n)[0] * chart.a, -np.eye(n)[0] * chart.a]
    while True:
        x = rng.uniform(-radius, radius, size=n)
        if chart.curvature < 0 and np.dot(x, x) > 0.8:
            continue
        if min(np.linalg.norm(x - c) for c in centers) < clearance:
            continue
        break
    v = speed * rng.normal(size=n)
    return np.append(x, -1.0), np.append(v, 0.0)


def random_state(space: SpaceForm, rng: np.random.Generator, **kw) -> PhaseState:
    qt, vt = random_chart_state(space, rng, **kw)
    if space.is_curved:
        qt, vt = project_state(space, qt, vt)
    return PhaseState(qt, vt)


def correspondence(chart: SpaceForm, params: LagrangeParams, qt, vt, T: float, rtol=1e-10, atol=1e-12) -> CheckResult:
    """Max distance between the projected chart run and the curved run at matched ``tau``."""
    curved = chart.curved
    chart_run = simulate(chart, params, [], PhaseState(qt, vt), T=T, rtol=rtol, atol=atol)
    if chart_run.status is not Status.TIME_LIMIT:
        return CheckResult("correspondence", math.inf, CORRESPONDENCE_TOL, {"status": chart_run.status.value})
    q0, v0 = project_state(curved, qt, vt)
    taus = np.array(chart_run.taus)
    curved_run = simulate(curved, params, [], PhaseState(q0, v0), T=float(taus[-1]), rtol=rtol, atol=atol)
    if curved_run.status is not Status.TIME_LIMIT:
        return CheckResult("correspondence", math.inf, CORRESPONDENCE_TOL, {"status": curved_run.status.value})
    q_curved = curved_run.positions_at(taus)
    q_chart = np.array([project_point(curved, q) for q in chart_run.qs])
    dev = float(np.max(np.linalg.norm(q_curved - q_chart, axis=1)))
    return CheckResult(
        "correspondence",
        dev,
        CORRESPONDENCE_TOL,
        {"geometry": curved.kind.value, "samples": len(taus), "tau_end": float(taus[-1])},
    )


def confocal_walls(chart: SpaceForm) -> list[QuadricWall]:
    """One spheroid and one two-sheeted hyperboloid with foci at the Kepler centers."""
    a = chart.a
    k = chart.curvature
    walls = []
    A_sph = a + 0.5 if k > 0 else 0.5 * (a + 1.0)
    walls.append(QuadricWall(chart, WallKind.SPHEROID, A_sph, shape_from_focus(WallKind.SPHEROID, a, A_sph, chart), id="spheroid"))
    A_hyp = 0.5 * a
    walls.append(QuadricWall(chart, WallKind.TWO_SHEET, A_hyp, shape_from_focus(WallKind.TWO_SHEET, a, A_hyp, chart), id="two_sheet"))
    return walls


def reflection_commutation(chart: SpaceForm, wall: QuadricWall, rng: np.random.Generator, count: int = 100) -> CheckResult:
    """``|push(reflect_chart(v)) - reflect_curved(push(v))|`` over random wall points."""
    curved = chart.curved
    cwall = QuadricWall(curved, wall.kind, wall.A, wall.B, wall.sheet, wall.id)
    worst = 0.0
    worst_flat = 0.0
    for qt in sample_wall(wall, count, rng):
        while True:
            vt = np.append(rng.normal(size=chart.n), 0.0)
            try:
                v_out = reflect(chart, wall, qt, vt)
                break
            except Exception:
                continue
        lhs = push_velocity(curved, qt, v_out)
        q, v = project_state(curved, qt, vt)
        rhs = reflect(curved, cwall, q, v)
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
        worst_flat = max(worst_flat, abs(focal_distance_residual(cwall, q)))
    return CheckResult(
        f"reflection[{curved.kind.value}/{wall.kind.value}]",
        worst,
        COMMUTATION_TOL,
        {"points": count, "max_curved_focal_residual": worst_flat},
    )


def euclidean_reflection_isometry(chart: SpaceForm, wall: QuadricWall, rng: np.random.Generator, count: int = 100) -> CheckResult:
    """Chart reflections preserve the chart norm and are involutions."""
    from .spaceform import norm

    worst = 0.0
    for qt in sample_wall(wall, count, rng):
        vt = np.append(rng.normal(size=chart.n), 0.0)
        v1 = reflect(chart, wall, qt, vt)
        v2 = reflect(chart, wall, qt, v1)
        worst = max(worst, abs(norm(chart, v1) - norm(chart, vt)) / norm(chart, vt), float(np.linalg.norm(v2 - vt)))
    return CheckResult(f"reflection[{chart.kind.value}/{wall.kind.value}]", worst, COMMUTATION_TOL, {"points": count})


def involution(space: SpaceForm, params: LagrangeParams, rng: np.random.Generator, count: int = 100) -> CheckResult:
    """Largest pairwise bracket of the integral family, and the minimum Jacobian rank."""
    fam = integral_family(space, params)
    worst = 0.0
    ranks = []
    for _ in range(count):
        state = random_state(space, rng)
        table = bracket_table(fam, state)
        worst = max(worst, max((abs(v) for v in table.values()), default=0.0))
        ranks.append(jacobian_rank(fam, state))
    return CheckResult(
        f"involution[{space.kind.value}, n={space.n}]",
        worst,
        BRACKET_TOL,
        {"integrals": [F.name for F in fam], "min_rank": min(ranks), "max_rank": max(ranks), "states": count},
    )


def tangent_defect(space: SpaceForm, q, v) -> float:
    return float(np.linalg.norm(tangent_project(space, q, v) - v))
