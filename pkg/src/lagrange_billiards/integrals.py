"""First integrals, numerical Poisson brackets and Jacobian rank checks.

Chart integrals take chart states ``(qt, vt)``; curved integrals take states on
the sphere or hyperboloid with ``tau``-velocities. Brackets are computed in
canonical coordinates ``(x, p)``: the chart itself for chart states, and the
intrinsic gnomonic / Klein chart ``x = qt[:n]`` for curved states.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .forces import LagrangeParams, _check, force_function_chart, force_function_curved
from .projection import EQUATOR_EPS, intrinsic_chart_jacobian
from .spaceform import Geometry, SpaceForm, _vec, ambient_inner, check_on_surface

FD_STEP = 1e-5
RANK_RTOL = 1e-8
BRACKET_TOL = 1e-6

CHART_IDS = ("E_sp", "E_sph_chart", "L_ij", "C_k")
CURVED_IDS = ("E_sph", "E_hyp", "E_sp_hat", "L_hat_ij", "C_hat_k")


def _pair_index(space: SpaceForm, i: int, j: int) -> None:
    if not (1 <= i <= space.n and 1 <= j <= space.n) or i == j:
        raise IndexError(f"angular momentum indices must be distinct in 1..{space.n}, got ({i}, {j})")


def _casimir_index(space: SpaceForm, k: int) -> None:
    if not 2 <= k <= space.n:
        raise IndexError(f"C_k needs 2 <= k <= {space.n}, got {k}")


def angular_momentum(state_or_q, i: int, j: int, v=None, space: SpaceForm | None = None) -> float:
    """``L_ij = q_i v_j - q_j v_i`` with 1-based coordinate indices.

    Works for chart and ambient curved states alike (the curved version is the
    hatted component).
    """
    q, v = _qv(state_or_q, v)
    if space is not None:
        _pair_index(space, i, j)
    elif i == j or min(i, j) < 1 or max(i, j) > q.size - 1:
        raise IndexError(f"bad angular momentum indices ({i}, {j})")
    return float(q[i - 1] * v[j - 1] - q[j - 1] * v[i - 1])


def casimir_C(state_or_q, k: int, v=None) -> float:
    """``C_k = sum_{2 <= i < j <= k} L_ij^2``."""
    q, v = _qv(state_or_q, v)
    if not 2 <= k <= q.size - 1:
        raise IndexError(f"C_k needs 2 <= k <= {q.size - 1}, got {k}")
    qs, vs = q[1:k], v[1:k]
    lm = np.outer(qs, vs) - np.outer(vs, qs)
    return float(0.5 * np.sum(lm * lm))


def _qv(state_or_q, v):
    if v is None:
        return np.asarray(state_or_q.q, dtype=float), np.asarray(state_or_q.v, dtype=float)
    return np.asarray(state_or_q, dtype=float), np.asarray(v, dtype=float)


def _sum_sq_momenta(x: np.ndarray, xd: np.ndarray) -> float:
    # sum_{i<j} L_ij^2 = |x|^2 |xd|^2 - (x.xd)^2
    return float(np.dot(x, x) * np.dot(xd, xd) - np.dot(x, xd) ** 2)


def energy_chart(space: SpaceForm, params: LagrangeParams, qt, vt) -> float:
    """``E_sp = |v|_a^2 / 2 - U`` in the chart."""
    fac = space.chart_x_factor
    vt = np.asarray(vt, dtype=float)
    kin = 0.5 * (vt[0] ** 2 / fac + float(np.dot(vt[1:-1], vt[1:-1])))
    return kin - force_function_chart(space, params, qt)


def curved_energy_in_chart(space: SpaceForm, params: LagrangeParams, qt, vt) -> float:
    """Spherical (kappa = 1) or hyperbolic (kappa = -1) energy written on the chart."""
    k = space.curvature
    a = space.a
    fac = space.chart_x_factor
    x = np.asarray(qt, dtype=float)[:-1]
    xd = np.asarray(vt, dtype=float)[:-1]
    mh1, mh2 = params.hatted(space)
    kin = 0.5 * (float(np.dot(xd, xd)) + k * _sum_sq_momenta(x, xd))
    r2 = float(np.dot(x[1:], x[1:]))
    pot = params.f * float(np.dot(x, x))
    for m, s in ((mh1, 1.0), (mh2, -1.0)):
        if m != 0.0:
            pot += m * (1.0 + s * k * a * x[0]) / math.sqrt((x[0] - s * a) ** 2 + fac * r2)
    return kin - pot


def kinetic_sph_expanded(qt, vt) -> float:
    """Expanded quadratic form of the spherical kinetic energy in a 3-dimensional chart."""
    x, y, z = np.asarray(qt, dtype=float)[:3]
    xd, yd, zd = np.asarray(vt, dtype=float)[:3]
    return 0.5 * (
        (y * y + z * z + 1) * xd * xd
        + (x * x + z * z + 1) * yd * yd
        + (x * x + y * y + 1) * zd * zd
        - 2 * x * y * xd * yd
        - 2 * x * z * xd * zd
        - 2 * y * z * yd * zd
    )


def kinetic_sph_momenta(qt, vt) -> float:
    """Same kinetic energy written with the angular momenta."""
    x, y, z = np.asarray(qt, dtype=float)[:3]
    xd, yd, zd = np.asarray(vt, dtype=float)[:3]
    return 0.5 * (xd * xd + yd * yd + zd * zd + (x * yd - y * xd) ** 2 + (y * zd - z * yd) ** 2 + (z * xd - x * zd) ** 2)


def energy_curved(space: SpaceForm, params: LagrangeParams, q, qp) -> float:
    """``E_sph`` or ``E_hyp``: half the squared speed minus the cot/coth force function."""
    kin = 0.5 * ambient_inner(space, qp, qp)
    return kin - force_function_curved(space, params, q)


def projected_chart_energy(space: SpaceForm, params: LagrangeParams, q, qp) -> float:
    """Chart energy written in ambient coordinates of the curved model."""
    q = np.asarray(q, dtype=float)
    qp = np.asarray(qp, dtype=float)
    qn, qnp = q[-1], qp[-1]
    if abs(qn) <= EQUATOR_EPS:
        raise ZeroDivisionError("projected chart energy is singular on the equator")
    fac = space.chart_x_factor
    a = space.a
    w = qn * qp - q * qnp
    kin = 0.5 * (w[0] ** 2 / fac + float(np.dot(w[1:-1], w[1:-1])))
    rest = float(np.dot(q[1:-1], q[1:-1])) / qn ** 2
    pot = params.f * (q[0] ** 2 / (qn ** 2 * fac) + rest)
    for m, s in ((params.m1, 1.0), (params.m2, -1.0)):
        if m != 0.0:
            pot += m / math.sqrt((-q[0] / qn - s * a) ** 2 / fac + rest)
    return kin - pot


@dataclass(frozen=True)
class FirstIntegral:
    """A named first integral bound to a model and force parameters."""

    id: str
    space: SpaceForm
    params: LagrangeParams
    i: int = 0
    j: int = 0
    k: int = 0

    def __post_init__(self):
        if self.id not in CHART_IDS + CURVED_IDS:
            raise ValueError(f"unknown integral id {self.id!r}")
        _check(self.space, self.params)
        if self.id in CHART_IDS and self.space.is_curved:
            raise ValueError(f"{self.id} is evaluated on chart states")
        if self.id in CURVED_IDS and not self.space.is_curved:
            raise ValueError(f"{self.id} is evaluated on curved states")
        if self.id == "E_sph" and self.space.kind is not Geometry.SPHERE:
            raise ValueError("E_sph lives on the sphere")
        if self.id == "E_hyp" and self.space.kind is not Geometry.HYPERBOLIC:
            raise ValueError("E_hyp lives on the hyperboloid")
        if self.id in ("L_ij", "L_hat_ij"):
            _pair_index(self.space, self.i, self.j)
        if self.id in ("C_k", "C_hat_k"):
            _casimir_index(self.space, self.k)

    @property
    def name(self) -> str:
        if self.id in ("L_ij", "L_hat_ij"):
            return f"{self.id[:-3]}_{self.i}{self.j}"
        if self.id in ("C_k", "C_hat_k"):
            return f"{self.id[:-2]}_{self.k}"
        return self.id

    def __call__(self, q, v) -> float:
        sp, pr = self.space, self.params
        if self.id == "E_sp":
            return energy_chart(sp, pr, q, v)
        if self.id == "E_sph_chart":
            return curved_energy_in_chart(sp, pr, q, v)
        if self.id in ("E_sph", "E_hyp"):
            return energy_curved(sp, pr, q, v)
        if self.id == "E_sp_hat":
            return projected_chart_energy(sp, pr, q, v)
        if self.id in ("L_ij", "L_hat_ij"):
            return angular_momentum(q, self.i, self.j, v)
        return casimir_C(q, self.k, v)


def make(id: str, space: SpaceForm, params: LagrangeParams, *idx: int) -> FirstIntegral:
    """Build an integral; ``make("L_ij", s, p, 2, 3)``, ``make("C_k", s, p, 4)``."""
    if id in ("L_ij", "L_hat_ij"):
        return FirstIntegral(id, space, params, i=idx[0], j=idx[1])
    if id in ("C_k", "C_hat_k"):
        return FirstIntegral(id, space, params, k=idx[0])
    return FirstIntegral(id, space, params)


def integral_family(space: SpaceForm, params: LagrangeParams) -> list[FirstIntegral]:
    """The ``n`` commuting integrals of the Lagrange problem on ``space``.

    For ``n = 3`` the angular part is ``L_23``; otherwise ``C_3, ..., C_n``.
    """
    n = space.n
    if space.is_curved:
        energy = "E_sph" if space.kind is Geometry.SPHERE else "E_hyp"
        fam = [make(energy, space, params), make("E_sp_hat", space, params)]
        lid, cid = "L_hat_ij", "C_hat_k"
    else:
        fam = [make("E_sp", space, params), make("E_sph_chart", space, params)]
        lid, cid = "L_ij", "C_k"
    if n == 3:
        fam.append(make(lid, space, params, 2, 3))
    else:
        fam.extend(make(cid, space, params, k) for k in range(3, n + 1))
    return fam


def evaluate(integral: FirstIntegral, state) -> float:
    """Value of ``integral`` at a :class:`~lagrange_billiards.flow.PhaseState`."""
    q = _vec(integral.space, state.q)
    v = _vec(integral.space, state.v)
    if integral.space.is_curved:
        check_on_surface(integral.space, q)
    val = integral(q, v)
    if not math.isfinite(val):
        raise FloatingPointError(f"{integral.name} is not finite at this state")
    return val


eval_integral = evaluate


# --- canonical coordinates -------------------------------------------------


class _Chart:
    """Conversion between model states and chart coordinates ``(x, w)`` / ``(x, p)``."""

    def __init__(self, space: SpaceForm):
        self.space = space
        self.n = space.n
        self.k = space.curvature
        self.eta = np.ones(space.dim)
        self.eta[-1] = self.k

    def to_xw(self, q, v) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        v = np.asarray(v, dtype=float)
        if not self.space.is_curved:
            return np.concatenate([q[:-1], v[:-1]])
        qn = q[-1]
        if qn >= -EQUATOR_EPS:
            raise ZeroDivisionError("intrinsic chart needs q[n] < 0")
        x = q[:-1] / (-qn)
        w = (v[-1] * q - qn * v)[:-1] / qn ** 2
        return np.concatenate([x, w])

    def from_xw(self, z):
        n = self.n
        x, w = z[:n], z[n:]
        if not self.space.is_curved:
            return np.append(x, -1.0), np.append(w, 0.0)
        n2 = 1.0 + self.k * float(np.dot(x, x))
        if n2 <= 0.0:
            raise ZeroDivisionError("outside the Klein ball")
        q = np.append(x, -1.0) / math.sqrt(n2)
        jac = intrinsic_chart_jacobian(self.space, x)
        return q, jac @ w

    def metric(self, x) -> np.ndarray:
        if not self.space.is_curved:
            g = np.eye(self.n)
            g[0, 0] = 1.0 / self.space.chart_x_factor
            return g
        jac = intrinsic_chart_jacobian(self.space, x)
        return jac.T @ (self.eta[:, None] * jac)

    def to_xp(self, q, v) -> np.ndarray:
        z = self.to_xw(q, v)
        x, w = z[: self.n], z[self.n :]
        return np.concatenate([x, self.metric(x) @ w])

    def from_xp(self, z):
        x, p = z[: self.n], z[self.n :]
        w = np.linalg.solve(self.metric(x), p)
        return self.from_xw(np.concatenate([x, w]))


def _gradient(fun, z: np.ndarray) -> np.ndarray:
    g = np.empty_like(z)
    for i in range(z.size):
        h = FD_STEP * (1.0 + abs(z[i]))
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        g[i] = (fun(zp) - fun(zm)) / (2.0 * h)
    return g


def _check_space(integrals: Sequence[FirstIntegral], state):
    space = integrals[0].space
    for F in integrals:
        if F.space != space:
            raise ValueError("all integrals must live on the same model")
    q = _vec(space, state.q)
    v = _vec(space, state.v)
    if space.is_curved:
        check_on_surface(space, q)
    return space, q, v


def canonical_gradient(F: FirstIntegral, state) -> np.ndarray:
    """Central-difference gradient of ``F`` in ``(x, p)``."""
    space, q, v = _check_space([F], state)
    chart = _Chart(space)
    z = chart.to_xp(q, v)
    return _gradient(lambda zz: F(*chart.from_xp(zz)), z)


def poisson_bracket(F: FirstIntegral, G: FirstIntegral, state) -> float:
    """``sum_i dF/dx_i dG/dp_i - dF/dp_i dG/dx_i`` by central differences."""
    space, q, v = _check_space([F, G], state)
    n = space.n
    chart = _Chart(space)
    z = chart.to_xp(q, v)
    gf = _gradient(lambda zz: F(*chart.from_xp(zz)), z)
    gg = _gradient(lambda zz: G(*chart.from_xp(zz)), z)
    return float(np.dot(gf[:n], gg[n:]) - np.dot(gf[n:], gg[:n]))


def bracket_table(integrals: Sequence[FirstIntegral], state) -> dict[tuple[str, str], float]:
    """All pairwise brackets ``{F_i, F_j}`` for ``i < j``."""
    space, q, v = _check_space(integrals, state)
    n = space.n
    chart = _Chart(space)
    z = chart.to_xp(q, v)
    grads = [_gradient(lambda zz, F=F: F(*chart.from_xp(zz)), z) for F in integrals]
    out = {}
    for (a, ga), (b, gb) in itertools.combinations(zip(integrals, grads), 2):
        out[(a.name, b.name)] = float(np.dot(ga[:n], gb[n:]) - np.dot(ga[n:], gb[:n]))
    return out


def jacobian_matrix(integrals: Sequence[FirstIntegral], state) -> np.ndarray:
    """Stacked gradients in position-velocity coordinates of the (intrinsic) chart."""
    space, q, v = _check_space(integrals, state)
    chart = _Chart(space)
    z = chart.to_xw(q, v)
    return np.array([_gradient(lambda zz, F=F: F(*chart.from_xw(zz)), z) for F in integrals])


def jacobian_rank(integrals: Sequence[FirstIntegral], state, rtol: float = RANK_RTOL) -> int:
    """Numerical rank: singular values above ``rtol`` times the largest."""
    s = np.linalg.svd(jacobian_matrix(integrals, state), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def momentum_bracket_identity(state, k1: int, k2: int, l1: int, l2: int) -> float:
    """Right-hand side of ``{L_k1k2, L_l1l2}`` in terms of angular momenta."""

    def L(i, j):
        return 0.0 if i == j else angular_momentum(state, i, j)

    d = lambda i, j: 1.0 if i == j else 0.0
    return d(k1, l1) * L(k2, l2) + d(k2, l2) * L(k1, l1) - d(k1, l2) * L(k2, l1) - d(k2, l1) * L(k1, l2)


# --- trajectories ----------------------------------------------------------


def sample_integrals(traj, integrals: Iterable[FirstIntegral]) -> dict[str, np.ndarray]:
    """Integral values at every trajectory sample (post-reflection velocities)."""
    out = {}
    for F in integrals:
        out[F.name] = np.array([F(q, v) for q, v in zip(traj.qs, traj.vs)])
    return out


@dataclass
class DriftEntry:
    name: str
    initial: float
    max_drift: float
    reflection_jumps: list

    @property
    def max_jump(self) -> float:
        return max(self.reflection_jumps, default=0.0)

    def as_dict(self) -> dict:
        return {
            "initial": self.initial,
            "max_drift": self.max_drift,
            "max_jump": self.max_jump,
            "reflection_jumps": list(self.reflection_jumps),
        }


def drift_report(traj, integrals: Iterable[FirstIntegral]) -> dict[str, DriftEntry]:
    """Relative drift ``|F(t) - F(0)| / max(1, |F(0)|)`` and per-reflection jumps."""
    report = {}
    for F in integrals:
        if len(traj) == 0:
            report[F.name] = DriftEntry(F.name, math.nan, 0.0, [])
            continue
        vals = np.array([F(q, v) for q, v in zip(traj.qs, traj.vs)])
        left = np.array([F(q, v) for q, v in zip(traj.qs, traj.v_left)])
        f0 = vals[0]
        scale = max(1.0, abs(f0))
        drift = float(np.max(np.abs(np.concatenate([vals, left]) - f0))) / scale
        jumps = [float(abs(vals[i] - left[i])) / scale for i in traj.event_indices]
        report[F.name] = DriftEntry(F.name, float(f0), drift, jumps)
    return report


__all__ = [
    "FirstIntegral",
    "make",
    "integral_family",
    "evaluate",
    "angular_momentum",
    "casimir_C",
    "energy_chart",
    "curved_energy_in_chart",
    "energy_curved",
    "projected_chart_energy",
    "kinetic_sph_expanded",
    "kinetic_sph_momenta",
    "poisson_bracket",
    "bracket_table",
    "canonical_gradient",
    "jacobian_matrix",
    "jacobian_rank",
    "momentum_bracket_identity",
    "sample_integrals",
    "drift_report",
    "DriftEntry",
]
