"""Lagrange problem: two Kepler centers plus a Hooke center at their midpoint.

Chart centers sit at ``(+-a, 0, ..., 0, -1)`` and ``(0, ..., 0, -1)``; curved
centers are their central projections. Configurations specify chart masses;
the curved system uses ``m_hat = m * sqrt(1 + kappa a^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CenterCollision, EquatorSingularity
from .projection import EQUATOR_EPS, chart_scale, project_point
from .spaceform import Geometry, SpaceForm, _vec, center_angle, check_on_surface, tangent_project

COLLISION_EPS = 1e-9


@dataclass(frozen=True)
class LagrangeParams:
    m1: float
    m2: float
    f: float
    a: float = 0.0

    def __post_init__(self):
        for name in ("m1", "m2", "f", "a"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, val)

    def hatted(self, space: SpaceForm) -> tuple[float, float]:
        s = math.sqrt(space.chart_x_factor)
        return self.m1 * s, self.m2 * s


@dataclass(frozen=True)
class Centers:
    """Center positions for one space form (ambient coordinates)."""

    space: SpaceForm

    @cached_property
    def chart(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Z1, Z2, Z0) in the chart."""
        d = self.space.dim
        z0 = np.zeros(d)
        z0[-1] = -1.0
        z1 = z0.copy()
        z1[0] = self.space.a
        z2 = z0.copy()
        z2[0] = -self.space.a
        return z1, z2, z0

    @cached_property
    def curved(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Z1, Z2, Z0) on the sphere / hyperboloid."""
        return tuple(project_point(self.space, z) for z in self.chart)

    @cached_property
    def antipodes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(-z for z in self.curved)


def _check(space: SpaceForm, params: LagrangeParams) -> None:
    if not math.isclose(space.a, params.a, rel_tol=0.0, abs_tol=1e-15):
        raise ValueError(f"space a={space.a} and params a={params.a} disagree")


def _chart_norm(space: SpaceForm, d: np.ndarray) -> float:
    return math.sqrt(d[0] * d[0] / space.chart_x_factor + float(np.dot(d[1:-1], d[1:-1])))


def _kepler_offsets(space: SpaceForm, params: LagrangeParams, qt: np.ndarray):
    z1, z2, _ = Centers(space.chart).chart
    out = []
    for m, z in ((params.m1, z1), (params.m2, z2)):
        d = qt - z
        d[-1] = 0.0
        if m != 0.0 and math.sqrt(float(np.dot(d, d))) < COLLISION_EPS:
            raise CenterCollision("particle hit a Kepler center")
        out.append((m, d))
    return out


def force_function_chart(space: SpaceForm, params: LagrangeParams, qt) -> float:
    """``m1/|q-Z1|_a + m2/|q-Z2|_a + f |q-Z0|_a^2`` in the chart norm."""
    space = space.chart
    _check(space, params)
    qt = _vec(space, qt)
    u = 0.0
    for m, d in _kepler_offsets(space, params, qt):
        if m != 0.0:
            u += m / _chart_norm(space, d)
    d0 = qt.copy()
    d0[-1] = 0.0
    return u + params.f * _chart_norm(space, d0) ** 2


def force_chart(space: SpaceForm, params: LagrangeParams, qt) -> np.ndarray:
    """Metric gradient of :func:`force_function_chart`."""
    space = space.chart
    _check(space, params)
    qt = _vec(space, qt)
    force = np.zeros(space.dim)
    for m, d in _kepler_offsets(space, params, qt):
        if m != 0.0:
            force -= m * d / _chart_norm(space, d) ** 3
    d0 = qt.copy()
    d0[-1] = 0.0
    force += 2.0 * params.f * d0
    return force


def force_function_curved(space: SpaceForm, params: LagrangeParams, q, whole_sphere: bool = False) -> float:
    """Spherical ``m cot + f tan^2`` or hyperbolic ``m coth + f tanh^2`` force function.

    With ``whole_sphere`` the antipodal centers carry sign-flipped factors
    (sphere only); otherwise ``q`` must lie in the lower hemisphere.
    """
    space = space.curved
    _check(space, params)
    q = check_on_surface(space, q)
    mh1, mh2 = params.hatted(space)
    z1, z2, z0 = Centers(space).curved
    sphere = space.kind is Geometry.SPHERE
    if whole_sphere and not sphere:
        raise ValueError("whole_sphere is only meaningful on the sphere")
    if not whole_sphere and q[-1] >= -EQUATOR_EPS:
        raise EquatorSingularity("hemispherical force function needs q[n] < 0")

    def kepler(m, z):
        if m == 0.0:
            return 0.0
        th = center_angle(space, q, z)
        if th < COLLISION_EPS or (sphere and math.pi - th < COLLISION_EPS):
            raise CenterCollision("point at a Kepler center or its antipode")
        return m / (math.tan(th) if sphere else math.tanh(th))

    def hooke(z):
        if params.f == 0.0:
            return 0.0
        th = center_angle(space, q, z)
        if sphere:
            if abs(math.cos(th)) < EQUATOR_EPS:
                raise EquatorSingularity("tan^2 is singular on the equator")
            return params.f * math.tan(th) ** 2
        return params.f * math.tanh(th) ** 2

    u = kepler(mh1, z1) + kepler(mh2, z2) + hooke(z0)
    if whole_sphere:
        a1, a2, a0 = Centers(space).antipodes
        u -= kepler(mh1, a1) + kepler(mh2, a2) + hooke(a0)
    return u


def curved_force_unchecked(space: SpaceForm, params: LagrangeParams, q: np.ndarray) -> np.ndarray:
    """Curved force at a point assumed to be on the model (no validation)."""
    qt = q / (-q[-1])
    n = chart_scale(space, qt)
    w = n ** 3 * force_chart(space.chart, params, qt)
    if space.kind is Geometry.SPHERE:
        return w - float(np.dot(w, q)) * q
    wq = float(np.dot(w[:-1], q[:-1]) - w[-1] * q[-1])
    return w + wq * q


def force_curved(space: SpaceForm, params: LagrangeParams, q) -> np.ndarray:
    """Force on the hemisphere / hyperboloid sheet.

    Evaluated by lifting to the chart, scaling the chart force by ``N^3`` and
    projecting onto the tangent space; this is the gradient of
    :func:`force_function_curved`.
    """
    space = space.curved
    _check(space, params)
    q = check_on_surface(space, q)
    if q[-1] >= -EQUATOR_EPS:
        raise EquatorSingularity("curved force needs q[n] < 0")
    return tangent_project(space, q, curved_force_unchecked(space, params, q))
