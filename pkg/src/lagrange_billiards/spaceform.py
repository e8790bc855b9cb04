"""Ambient models of the three space forms and their metrics.

Every point and vector lives in ambient coordinates of length ``n + 1``:

* the flat chart is the affine slice ``q[n] == -1`` carrying the
  anisotropic metric ``x1**2 / (1 + kappa * a**2) + x2**2 + ... + xn**2``;
* the sphere is the unit sphere of R^{n+1} with the round metric;
* the hyperboloid is the sheet ``|x|**2 - q[n]**2 == -1`` of R^{n,1}
  with the restricted Minkowski form.

``kappa`` is the curvature sign of the curved model a chart belongs to:
``+1`` for the sphere (norm ``||.||_a``), ``-1`` for the hyperboloid
(norm ``||.||_ia``, Beltrami-Klein ball).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionError, OffSurfaceError

SURFACE_TOL = 1e-10


class Geometry(str, Enum):
    EUCLIDEAN = "euclidean"
    SPHERE = "sphere"
    HYPERBOLIC = "hyperbolic"


@dataclass(frozen=True)
class SpaceForm:
    """Geometry tag, intrinsic dimension ``n`` and focal parameter ``a``.

    For ``EUCLIDEAN`` the ``curvature`` field selects which curved model the
    chart is paired with; for the curved kinds it is fixed by the kind.
    """

    kind: Geometry
    n: int
    a: float = 0.0
    curvature: int = 1

    def __post_init__(self):
        kind = Geometry(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is Geometry.SPHERE:
            object.__setattr__(self, "curvature", 1)
        elif kind is Geometry.HYPERBOLIC:
            object.__setattr__(self, "curvature", -1)
        if self.curvature not in (1, -1):
            raise ValueError(f"curvature must be +1 or -1, got {self.curvature}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        a = float(self.a)
        if not math.isfinite(a):
            raise ValueError("focal parameter a must be finite")
        if self.curvature < 0 and a * a >= 1.0:
            raise ValueError(f"hyperbolic branch needs a**2 < 1, got a={a}")
        object.__setattr__(self, "a", a)

    @classmethod
    def euclidean(cls, n: int, a: float = 0.0, hyperbolic: bool = False) -> "SpaceForm":
        return cls(Geometry.EUCLIDEAN, n, a, -1 if hyperbolic else 1)

    @classmethod
    def sphere(cls, n: int, a: float = 0.0) -> "SpaceForm":
        return cls(Geometry.SPHERE, n, a)

    @classmethod
    def hyperbolic(cls, n: int, a: float = 0.0) -> "SpaceForm":
        return cls(Geometry.HYPERBOLIC, n, a)

    @property
    def dim(self) -> int:
        """Ambient dimension ``n + 1``."""
        return self.n + 1

    @property
    def is_curved(self) -> bool:
        return self.kind is not Geometry.EUCLIDEAN

    @property
    def chart(self) -> "SpaceForm":
        """The flat chart paired with this space (itself for a chart)."""
        if not self.is_curved:
            return self
        return SpaceForm(Geometry.EUCLIDEAN, self.n, self.a, self.curvature)

    @property
    def curved(self) -> "SpaceForm":
        """The curved model paired with this space (itself if curved)."""
        if self.is_curved:
            return self
        kind = Geometry.SPHERE if self.curvature > 0 else Geometry.HYPERBOLIC
        return SpaceForm(kind, self.n, self.a)

    @property
    def chart_x_factor(self) -> float:
        """``1 + kappa a^2``: the first chart coordinate is divided by this."""
        return 1.0 + self.curvature * self.a * self.a

    def weights(self) -> np.ndarray:
        """Diagonal of the bilinear form in ambient coordinates."""
        w = np.ones(self.dim)
        if self.is_curved:
            w[-1] = float(self.curvature)
        else:
            w[0] = 1.0 / self.chart_x_factor
            w[-1] = 0.0
        return w

    def ambient_weights(self) -> np.ndarray:
        """Diagonal of the ambient form of the paired curved model."""
        w = np.ones(self.dim)
        w[-1] = float(self.curvature)
        return w


def _vec(space: SpaceForm, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (space.dim,):
        raise DimensionError(f"expected ambient vector of length {space.dim}, got shape {u.shape}")
    return u


def inner(space: SpaceForm, u, v) -> float:
    """Metric pairing of two ambient vectors."""
    u, v = _vec(space, u), _vec(space, v)
    return float(np.dot(space.weights() * u, v))


def ambient_inner(space: SpaceForm, u, v) -> float:
    """Euclidean (sphere) or Minkowski (hyperbolic) form on R^{n+1}."""
    u, v = _vec(space, u), _vec(space, v)
    return float(np.dot(space.ambient_weights() * u, v))


def norm(space: SpaceForm, v) -> float:
    """``sqrt(|inner(v, v)|)``.

    On the hyperboloid this is the Minkowski norm, so positions on the sheet
    have norm 1 and tangent (spacelike) vectors their Riemannian length.
    """
    v = _vec(space, v)
    s = inner(space, v, v)
    if space.kind is Geometry.HYPERBOLIC and s == 0.0 and np.any(v != 0.0):
        raise ValueError("null Minkowski vector has no positive norm")
    return math.sqrt(abs(s))


def surface_defect(space: SpaceForm, q) -> float:
    """Deviation of the defining quadratic form (0 on the model)."""
    q = _vec(space, q)
    if space.kind is Geometry.SPHERE:
        return float(np.dot(q, q) - 1.0)
    if space.kind is Geometry.HYPERBOLIC:
        return float(np.dot(q[:-1], q[:-1]) - q[-1] ** 2 + 1.0)
    return float(q[-1] + 1.0)


def check_on_surface(space: SpaceForm, q, tol: float = SURFACE_TOL) -> np.ndarray:
    q = _vec(space, q)
    if not np.all(np.isfinite(q)):
        raise OffSurfaceError("non-finite coordinates")
    if abs(surface_defect(space, q)) > tol:
        raise OffSurfaceError(f"point off the {space.kind.value} model by {surface_defect(space, q):.3e}")
    if space.kind is Geometry.HYPERBOLIC and q[-1] >= 0.0:
        raise OffSurfaceError("point is on the upper sheet of the hyperboloid")
    return q


def renormalize(space: SpaceForm, q, v):
    """Pull a drifted state back onto the model.

    The point is rescaled along its ray from the origin and the velocity is
    made tangent. Charts only get their last coordinates reset.
    """
    q = np.array(q, dtype=float)
    v = np.array(v, dtype=float)
    if space.kind is Geometry.SPHERE:
        q /= math.sqrt(np.dot(q, q))
        v -= np.dot(v, q) * q
    elif space.kind is Geometry.HYPERBOLIC:
        w = space.ambient_weights()
        q /= math.sqrt(-np.dot(w * q, q))
        v += np.dot(w * v, q) * q
    else:
        q[-1] = -1.0
        v[-1] = 0.0
    return q, v


def tangent_project(space: SpaceForm, q, w) -> np.ndarray:
    """Orthogonal projection of ``w`` onto the tangent space at ``q``."""
    w = _vec(space, w)
    if space.kind is Geometry.EUCLIDEAN:
        out = w.copy()
        out[-1] = 0.0
        return out
    q = check_on_surface(space, q)
    if space.kind is Geometry.SPHERE:
        return w - np.dot(w, q) * q
    return w + ambient_inner(space, w, q) * q


def center_angle(space: SpaceForm, q, z) -> float:
    """Spherical angle or hyperbolic distance between two model points.

    Uses the chord length (half-angle formulas) rather than arccos/arccosh so
    that small angles keep full relative accuracy.
    """
    q = check_on_surface(space, q)
    z = check_on_surface(space, z)
    if space.kind is Geometry.SPHERE:
        c = float(np.dot(q, z))
        if abs(c) > 1.0 + SURFACE_TOL:
            raise OffSurfaceError(f"|<q, Z>| = {abs(c)} exceeds 1")
        return 2.0 * math.atan2(np.linalg.norm(q - z), np.linalg.norm(q + z))
    if space.kind is Geometry.HYPERBOLIC:
        d = q - z
        chord2 = max(ambient_inner(space, d, d), 0.0)
        return 2.0 * math.asinh(0.5 * math.sqrt(chord2))
    raise ValueError("center_angle is defined on the sphere and the hyperboloid only")
