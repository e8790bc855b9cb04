"""Confocal quadric walls: spheroids and circular two-sheeted hyperboloids.

All walls use the homogeneous form

    q1^2/A^2 + s * (q2^2 + ... + qn^2)/B^2 - q_{n+1}^2

with ``s = +1`` (spheroid) or ``s = -1`` (two sheets). On the chart slice
``q_{n+1} = -1`` it reduces to the usual affine equation. On the sphere and the
hyperboloid it is the cone through the projected chart wall.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import WallError
from .projection import project_point
from .spaceform import SpaceForm, _vec, center_angle, tangent_project

FOCUS_TOL = 1e-9


class WallKind(str, Enum):
    SPHEROID = "spheroid"
    TWO_SHEET = "two_sheet_hyperboloid"


class Sheet(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    BOTH = "both"


def focal_parameter(kind, A: float, B: float, space: SpaceForm) -> float:
    """Focal half-distance ``a >= 0`` of the wall in the chart metric.

    Sphere branch: ``1 + a^2 = (A^2 + 1)/(B^2 + 1)`` for spheroids and
    ``(A^2 + 1)/(1 - B^2)`` for two sheets. The hyperbolic branch flips the
    sign of the ``B^2`` term in the denominator.
    """
    kind = WallKind(kind)
    A, B = float(A), float(B)
    if not (A > 0 and B > 0 and math.isfinite(A) and math.isfinite(B)):
        raise WallError(f"A and B must be positive and finite, got A={A}, B={B}")
    k = space.curvature
    if kind is WallKind.SPHEROID:
        num, den = A * A - B * B, 1.0 + k * B * B
    else:
        num, den = A * A + B * B, 1.0 - k * B * B
    if den <= 0.0:
        raise WallError(f"no real focal parameter for {kind.value} with A={A}, B={B}")
    a2 = num / den
    if a2 < -1e-15:
        raise WallError(f"{kind.value} with A={A} < B={B} has its foci off the first axis")
    a2 = max(a2, 0.0)
    if k < 0 and a2 >= 1.0:
        raise WallError(f"foci a={math.sqrt(a2)} fall outside the Klein ball")
    return math.sqrt(a2)


def shape_from_focus(kind, a: float, A: float, space: SpaceForm) -> float:
    """Solve the focal relation for ``B`` given ``a`` and ``A``."""
    kind = WallKind(kind)
    k = space.curvature
    fac = 1.0 + k * a * a
    b2 = (A * A - a * a) / fac if kind is WallKind.SPHEROID else (a * a - A * A) / fac
    if b2 <= 0.0:
        raise WallError(f"no {kind.value} with A={A} has foci at +-{a}")
    return math.sqrt(b2)


@dataclass(frozen=True)
class QuadricWall:
    space: SpaceForm
    kind: WallKind
    A: float
    B: float
    sheet: Sheet = Sheet.BOTH
    id: str = "wall"
    mask: Optional[Callable[[np.ndarray], bool]] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", WallKind(self.kind))
        object.__setattr__(self, "sheet", Sheet(self.sheet))
        object.__setattr__(self, "A", float(self.A))
        object.__setattr__(self, "B", float(self.B))
        if self.kind is WallKind.SPHEROID and self.sheet is not Sheet.BOTH:
            raise WallError("sheet selection applies to two-sheeted hyperboloids only")
        focal_parameter(self.kind, self.A, self.B, self.space)

    @classmethod
    def from_focus(cls, space: SpaceForm, kind, A: float, **kw) -> "QuadricWall":
        """Wall with semi-axis ``A`` whose foci are the space's Kepler centers."""
        return cls(space, kind, A, shape_from_focus(kind, space.a, A, space), **kw)

    @property
    def a(self) -> float:
        return focal_parameter(self.kind, self.A, self.B, self.space)

    @property
    def sign(self) -> float:
        return 1.0 if self.kind is WallKind.SPHEROID else -1.0

    def foci(self) -> tuple[np.ndarray, np.ndarray]:
        chart = self.space.chart
        z = np.zeros(chart.dim)
        z[-1] = -1.0
        f1, f2 = z.copy(), z.copy()
        f1[0], f2[0] = self.a, -self.a
        if self.space.is_curved:
            return project_point(self.space, f1), project_point(self.space, f2)
        return f1, f2

    def accepts(self, q) -> bool:
        """Whether a hit at ``q`` belongs to the selected part of the wall."""
        if self.sheet is Sheet.POSITIVE and q[0] <= 0.0:
            return False
        if self.sheet is Sheet.NEGATIVE and q[0] >= 0.0:
            return False
        if self.mask is not None and not self.mask(np.asarray(q)):
            return False
        return True


def implicit_value(wall: QuadricWall, q) -> float:
    """Signed homogeneous quadric value: 0 on the wall, -1 at the center of a chart spheroid."""
    q = _vec(wall.space, q)
    rest = float(np.dot(q[1:-1], q[1:-1]))
    return q[0] ** 2 / wall.A ** 2 + wall.sign * rest / wall.B ** 2 - q[-1] ** 2


def implicit_gradient(wall: QuadricWall, q) -> np.ndarray:
    """Euclidean gradient of :func:`implicit_value` in ambient coordinates."""
    q = _vec(wall.space, q)
    g = np.empty_like(q)
    g[0] = 2.0 * q[0] / wall.A ** 2
    g[1:-1] = 2.0 * wall.sign * q[1:-1] / wall.B ** 2
    g[-1] = -2.0 * q[-1]
    return g


def normal(wall: QuadricWall, q) -> np.ndarray:
    """Metric normal of the wall at ``q``, tangent to the model.

    Chart: metric gradient of the affine quadric. Curved: the ambient gradient
    with the index raised by the ambient form, then projected to the tangent space.
    """
    space = wall.space
    g = implicit_gradient(wall, q)
    if space.is_curved:
        g[-1] *= space.curvature
        nvec = tangent_project(space, q, g)
    else:
        g[0] *= space.chart_x_factor
        g[-1] = 0.0
        nvec = g
    if not np.any(np.abs(nvec) > 1e-300) or not np.all(np.isfinite(nvec)):
        raise WallError("degenerate wall point: zero normal")
    return nvec


def project_wall(wall: QuadricWall, target: Optional[SpaceForm] = None) -> QuadricWall:
    """Chart wall <-> curved wall with the same ``(kind, A, B)``."""
    if target is None:
        target = wall.space.chart if wall.space.is_curved else wall.space.curved
    if target.curvature != wall.space.curvature or target.n != wall.space.n:
        raise WallError("target space is not paired with the wall's space")
    if target.is_curved == wall.space.is_curved:
        raise WallError("project_wall maps between a chart and a curved model")
    return replace(wall, space=target)


def _distance(space: SpaceForm, q, z) -> float:
    if space.is_curved:
        return center_angle(space, q, z)
    d = np.asarray(q, dtype=float) - z
    return math.sqrt(d[0] ** 2 / space.chart_x_factor + float(np.dot(d[1:-1], d[1:-1])))


def _focal_combination(wall: QuadricWall, q) -> float:
    f1, f2 = wall.foci()
    d1, d2 = _distance(wall.space, q, f1), _distance(wall.space, q, f2)
    return d1 + d2 if wall.kind is WallKind.SPHEROID else abs(d1 - d2)


def vertex(wall: QuadricWall) -> np.ndarray:
    """Vertex of the wall on the positive first axis."""
    v = np.zeros(wall.space.dim)
    v[0], v[-1] = wall.A, -1.0
    return project_point(wall.space, v) if wall.space.is_curved else v


def focal_distance_residual(wall: QuadricWall, q) -> float:
    """Sum (spheroid) or |difference| (two sheets) of focal distances minus its vertex value."""
    return _focal_combination(wall, q) - _focal_combination(wall, vertex(wall))


def sample_wall(wall: QuadricWall, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random points on the wall (rows), respecting the sheet selection.

    Chart points come from the standard parametrization and are projected for
    curved walls; on the hyperbolic branch only points inside the Klein ball
    are kept.
    """
    chart = wall.space.chart
    n = chart.n
    pts = []
    tries = 0
    while len(pts) < count:
        tries += 1
        if tries > 1000 * max(count, 1):
            raise WallError("could not sample the wall inside the model")
        d = rng.normal(size=n - 1)
        d /= np.linalg.norm(d)
        x = np.empty(chart.dim)
        x[-1] = -1.0
        if wall.kind is WallKind.SPHEROID:
            t = rng.uniform(0.0, math.pi)
            x[0] = wall.A * math.cos(t)
            x[1:-1] = wall.B * math.sin(t) * d
        else:
            t = rng.uniform(-1.5, 1.5)
            side = 1.0 if wall.sheet is Sheet.POSITIVE else -1.0 if wall.sheet is Sheet.NEGATIVE else rng.choice([-1.0, 1.0])
            x[0] = side * wall.A * math.cosh(t)
            x[1:-1] = wall.B * math.sinh(t) * d
        if chart.curvature < 0 and float(np.dot(x[:-1], x[:-1])) >= 1.0 - 1e-6:
            continue
        if chart.curvature > 0 and wall.space.is_curved and float(np.dot(x[:-1], x[:-1])) > 1e6:
            continue
        if not wall.accepts(x):
            continue
        pts.append(project_point(wall.space, x) if wall.space.is_curved else x)
    return np.array(pts).reshape(count, chart.dim)


def check_confocal(walls, space: SpaceForm, tol: float = FOCUS_TOL) -> None:
    """Reject wall lists whose foci differ from the space's Kepler centers."""
    for w in walls:
        if w.space != space:
            raise WallError(f"wall {w.id!r} lives in {w.space}, expected {space}")
        if abs(w.a - abs(space.a)) > tol:
            raise WallError(f"wall {w.id!r} has focal parameter {w.a}, but the Kepler centers sit at +-{space.a}")


__all__ = [
    "WallKind",
    "Sheet",
    "QuadricWall",
    "focal_parameter",
    "shape_from_focus",
    "implicit_value",
    "implicit_gradient",
    "normal",
    "project_wall",
    "vertex",
    "focal_distance_residual",
    "sample_wall",
    "check_confocal",
]
