"""Central projection between the flat chart and the curved models.

A chart point ``qt = (x, -1)`` maps to ``qt / N`` where ``N = sqrt(1 + kappa |x|^2)``
is the Euclidean length (sphere) or Minkowski length (hyperboloid) of ``qt``.
Curved motion is parametrized by the time ``tau`` with ``d/dtau = N^2 d/dt``.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import EquatorSingularity, OffSurfaceError
from .spaceform import SURFACE_TOL, SpaceForm, _vec, check_on_surface

EQUATOR_EPS = 1e-12


def _check_chart_point(space: SpaceForm, qt) -> np.ndarray:
    qt = _vec(space, qt)
    if abs(qt[-1] + 1.0) > SURFACE_TOL:
        raise OffSurfaceError(f"chart points must have last coordinate -1, got {qt[-1]}")
    return qt


def chart_scale(space: SpaceForm, qt) -> float:
    """``N`` such that ``qt / N`` lies on the curved model."""
    qt = _check_chart_point(space, qt)
    x = qt[:-1]
    n2 = 1.0 + space.curvature * float(np.dot(x, x))
    if n2 <= 0.0:
        raise EquatorSingularity("chart point outside the Beltrami-Klein ball")
    return math.sqrt(n2)


def time_rescale_factor(space: SpaceForm, qt) -> float:
    """``N^2 = dt/dtau`` at the chart point ``qt``."""
    return chart_scale(space, qt) ** 2


def project_point(space: SpaceForm, qt) -> np.ndarray:
    """Chart point -> point on the lower hemisphere / lower hyperboloid sheet."""
    target = space.curved
    return np.asarray(qt, dtype=float) / chart_scale(target, qt)


def lift_point(space: SpaceForm, q) -> np.ndarray:
    """Curved point -> chart point, i.e. ``q / (-q[n])``."""
    target = space.curved
    q = check_on_surface(target, q)
    if q[-1] >= -EQUATOR_EPS:
        raise EquatorSingularity(f"q[n] = {q[-1]:.3e} is on or above the equator")
    return q / (-q[-1])


def push_velocity(space: SpaceForm, qt, vt) -> np.ndarray:
    """Chart velocity ``d qt/dt`` -> curved velocity ``dq/dtau``."""
    target = space.curved
    qt = _check_chart_point(target, qt)
    vt = _vec(target, vt)
    if abs(vt[-1]) > SURFACE_TOL:
        raise ValueError("chart velocities must have last coordinate 0")
    n = chart_scale(target, qt)
    dn = target.curvature * float(np.dot(qt[:-1], vt[:-1])) / n
    return n * vt - dn * qt


def pull_velocity(space: SpaceForm, q, qp) -> np.ndarray:
    """Curved velocity ``dq/dtau`` -> chart velocity ``d qt/dt``."""
    target = space.curved
    q = check_on_surface(target, q)
    qp = _vec(target, qp)
    if q[-1] >= -EQUATOR_EPS:
        raise EquatorSingularity(f"q[n] = {q[-1]:.3e} is on or above the equator")
    out = qp[-1] * q - q[-1] * qp
    out[-1] = 0.0
    return out


def project_state(space: SpaceForm, qt, vt):
    """Chart state -> curved state (point and tau-velocity)."""
    return project_point(space, qt), push_velocity(space, qt, vt)


def lift_state(space: SpaceForm, q, qp):
    return lift_point(space, q), pull_velocity(space, q, qp)


def intrinsic_chart_jacobian(space: SpaceForm, x) -> np.ndarray:
    """Jacobian ``d q / d x`` of ``x -> (x, -1) / N(x)``; shape ``(n+1, n)``.

    Used to express curved states in gnomonic (sphere) or Klein
    (hyperboloid) coordinates.
    """
    target = space.curved
    x = np.asarray(x, dtype=float)
    k = target.curvature
    n2 = 1.0 + k * float(np.dot(x, x))
    if n2 <= 0.0:
        raise EquatorSingularity("chart point outside the Beltrami-Klein ball")
    n = math.sqrt(n2)
    big_x = np.append(x, -1.0)
    jac = np.zeros((target.dim, target.n))
    jac[: target.n, :] = np.eye(target.n) / n
    jac -= k * np.outer(big_x, x) / n ** 3
    return jac

