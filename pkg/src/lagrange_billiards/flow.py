"""Newtonian flow, wall detection and elastic reflection in all three models.

Chart runs use the chart time ``t`` and also integrate ``tau`` through
``dtau/dt = 1/N^2``. Curved runs are parametrized by ``tau`` directly.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import integrator as rk
from .errors import CenterCollision, EquatorSingularity, GrazingHit, SingularityError
from .forces import COLLISION_EPS, LagrangeParams, _check
from .projection import EQUATOR_EPS
from .quadrics import QuadricWall, check_confocal, implicit_gradient, implicit_value, normal
from .spaceform import SpaceForm, _vec, inner, renormalize

log = logging.getLogger(__name__)

H_MIN = 1e-14
GRAZING_TOL = 1e-10
NUDGE = 1e-12
SUBSAMPLES = 8
BISECTION_ITERS = 40
NEWTON_ITERS = 12
HIT_TOL = 1e-12
# step-size underflow this close to a Kepler center counts as a collision
COLLISION_NEAR = 1e-6


class Status(str, Enum):
    RUNNING = "running"
    TIME_LIMIT = "time-limit"
    REFLECTION_COUNT = "reflection-count"
    COLLISION = "collision"
    SINGULAR = "singular"
    GRAZING = "grazing"


@dataclass
class PhaseState:
    q: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).copy()
        self.v = np.asarray(self.v, dtype=float).copy()
        self.t = float(self.t)


@dataclass(frozen=True)
class ReflectionEvent:
    t_hit: float
    q_hit: np.ndarray
    v_in: np.ndarray
    v_out: np.ndarray
    wall_id: str


@dataclass
class Trajectory:
    """Accepted-step samples of one run plus its reflection events.

    ``v_left[i]`` is the velocity just before ``times[i]``; it differs from
    ``vs[i]`` only at reflection samples.
    """

    space: SpaceForm
    times: list = field(default_factory=list)
    qs: list = field(default_factory=list)
    vs: list = field(default_factory=list)
    v_left: list = field(default_factory=list)
    taus: list = field(default_factory=list)
    events: list = field(default_factory=list)
    event_indices: list = field(default_factory=list)
    status: Status = Status.RUNNING
    message: str = ""
    n_steps: int = 0
    n_rejected: int = 0
    integral_samples: Optional[dict] = None

    def _append(self, t, q, v, tau=None, v_left=None):
        self.times.append(float(t))
        self.qs.append(np.array(q))
        self.vs.append(np.array(v))
        self.v_left.append(np.array(v if v_left is None else v_left))
        if tau is not None:
            self.taus.append(float(tau))

    def __len__(self):
        return len(self.times)

    def states(self):
        return [PhaseState(q, v, t) for t, q, v in zip(self.times, self.qs, self.vs)]

    @property
    def final_state(self) -> PhaseState:
        return PhaseState(self.qs[-1], self.vs[-1], self.times[-1])

    def positions_at(self, t) -> np.ndarray:
        """Cubic Hermite interpolation of positions at times ``t``."""
        times = np.asarray(self.times)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if len(times) < 2:
            raise ValueError("need at least two samples to interpolate")
        if np.any(t < times[0] - 1e-15) or np.any(t > times[-1] + 1e-15):
            raise ValueError("interpolation time outside the trajectory")
        idx = np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2)
        out = np.empty((t.size, self.space.dim))
        for row, (i, ti) in enumerate(zip(idx, t)):
            t0, t1 = times[i], times[i + 1]
            h = t1 - t0
            s = (ti - t0) / h
            h00 = 2 * s**3 - 3 * s**2 + 1
            h10 = s**3 - 2 * s**2 + s
            h01 = -2 * s**3 + 3 * s**2
            h11 = s**3 - s**2
            out[row] = h00 * self.qs[i] + h10 * h * self.vs[i] + h01 * self.qs[i + 1] + h11 * h * self.v_left[i + 1]
        return out


def _ambient_weights(space: SpaceForm) -> np.ndarray:
    w = np.ones(space.dim)
    w[-1] = float(space.curvature)
    return w


class _Dynamics:
    """Right-hand side and state packing for one (space, params) pair."""

    def __init__(self, space: SpaceForm, params: LagrangeParams):
        _check(space, params)
        self.space = space
        self.params = params
        self.d = space.dim
        self.curved = space.is_curved
        self.k = space.curvature
        self.w = _ambient_weights(space)
        self.size = 2 * self.d + (0 if self.curved else 1)
        fac = space.chart_x_factor
        n = space.n
        self.metric = np.ones(n)
        self.metric[0] = 1.0 / fac
        z = np.zeros(n)
        z[0] = space.a
        self.kepler = [(m, c) for m, c in ((params.m1, z), (params.m2, -z)) if m != 0.0]
        self.f2 = 2.0 * params.f
        # without forces the curved flow is plain geodesic motion and needs no chart
        self.free = not self.kepler and params.f == 0.0

    def chart_accel(self, x: np.ndarray) -> np.ndarray:
        acc = self.f2 * x
        for m, c in self.kepler:
            d = x - c
            r2 = float(np.dot(self.metric * d, d))
            if math.sqrt(float(np.dot(d, d))) < COLLISION_EPS:
                raise CenterCollision("particle hit a Kepler center")
            acc = acc - m * d / (r2 * math.sqrt(r2))
        return acc

    def rhs(self, t, y):
        d = self.d
        q, v = y[:d], y[d : 2 * d]
        out = np.zeros_like(y)
        out[:d] = v
        if self.curved:
            qq = float(np.dot(self.w * q, q))
            acc = -float(np.dot(self.w * v, v)) / qq * q
            if self.free:
                out[d : 2 * d] = acc
                return out
            if q[-1] >= -EQUATOR_EPS:
                raise EquatorSingularity("trajectory reached the equator")
            x = q[:-1] / (-q[-1])
            n2 = 1.0 + self.k * float(np.dot(x, x))
            if n2 <= 0.0:
                raise EquatorSingularity("trajectory left the hyperboloid chart")
            wf = np.zeros(d)
            wf[:-1] = n2 * math.sqrt(n2) * self.chart_accel(x)
            out[d : 2 * d] = acc + wf - float(np.dot(self.w * wf, q)) / qq * q
        else:
            x = q[:-1]
            n2 = 1.0 + self.k * float(np.dot(x, x))
            if n2 <= 0.0:
                raise EquatorSingularity("trajectory left the Beltrami-Klein ball")
            out[d : 2 * d - 1] = self.chart_accel(x)
            out[-1] = 1.0 / n2
        return out

    def center_distance(self, q) -> float:
        """Chart distance to the nearest Kepler center (inf without centers)."""
        if not self.kepler:
            return math.inf
        if self.curved:
            if q[-1] >= 0.0:
                return math.inf
            x = q[:-1] / (-q[-1])
        else:
            x = q[:-1]
        return min(float(np.linalg.norm(x - c)) for _, c in self.kepler)

    def pack(self, q, v, tau=0.0):
        y = np.empty(self.size)
        y[: self.d] = q
        y[self.d : 2 * self.d] = v
        if not self.curved:
            y[-1] = tau
        return y

    def unpack(self, y):
        tau = None if self.curved else float(y[-1])
        return y[: self.d].copy(), y[self.d : 2 * self.d].copy(), tau

    def clean(self, y):
        """Manifold renormalization (curved) or exact slice reset (chart)."""
        q, v, tau = self.unpack(y)
        q, v = renormalize(self.space, q, v)
        self.check_domain(q)
        return self.pack(q, v, 0.0 if tau is None else tau)

    def check_domain(self, q):
        if self.curved:
            if q[-1] >= -EQUATOR_EPS and not self.free:
                raise EquatorSingularity("trajectory reached the equator")
        elif self.k < 0 and float(np.dot(q[:-1], q[:-1])) >= 1.0 - EQUATOR_EPS:
            raise EquatorSingularity("trajectory reached the ideal boundary of the Klein ball")


def step(space: SpaceForm, params: LagrangeParams, state: PhaseState, h: float) -> PhaseState:
    """One Dormand-Prince 5(4) step of size ``h`` followed by renormalization."""
    if not h > 0:
        raise ValueError("step size must be positive")
    dyn = _Dynamics(space, params)
    y = dyn.pack(_vec(space, state.q), _vec(space, state.v))
    res = rk.rk_step(dyn.rhs, state.t, y, dyn.rhs(state.t, y), h, 1e-10, 1e-12)
    q, v, _ = dyn.unpack(dyn.clean(res.y))
    return PhaseState(q, v, state.t + h)


def reflect(space: SpaceForm, wall: QuadricWall, q, v) -> np.ndarray:
    """Elastic reflection ``v - 2 <v,n>/<n,n> n`` in the metric of ``space``."""
    q = _vec(space, q)
    v = _vec(space, v)
    nvec = normal(wall, q)
    vn = inner(space, v, nvec)
    nn = inner(space, nvec, nvec)
    vv = inner(space, v, v)
    if vv <= 0.0 or abs(vn) / math.sqrt(vv * nn) < GRAZING_TOL:
        raise GrazingHit(f"grazing hit on wall {wall.id!r}")
    return v - (2.0 * vn / nn) * nvec


def _snap_to_wall(space: SpaceForm, wall: QuadricWall, q: np.ndarray, v: np.ndarray):
    """One Newton projection of ``q`` onto the wall along its metric normal."""
    phi = implicit_value(wall, q)
    nvec = normal(wall, q)
    slope = float(np.dot(implicit_gradient(wall, q), nvec))
    if slope != 0.0:
        q = q - (phi / slope) * nvec
    return renormalize(space, q, v)


def _side(value: float) -> float:
    return 1.0 if value > 0.0 else -1.0


def initial_side(wall: QuadricWall, q, v) -> float:
    """Sign of the wall function on the side where a run starts.

    A start point lying on the wall is assigned the side ``v`` points into.
    """
    phi = implicit_value(wall, q)
    if abs(phi) > HIT_TOL:
        return _side(phi)
    return _side(float(np.dot(implicit_gradient(wall, q), v)))


def _bisect(wall, segment, lo, hi, side):
    for _ in range(BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        if _side(implicit_value(wall, segment(mid))) == side:
            lo = mid
        else:
            hi = mid
    return lo, hi


def _secant_polish(wall, segment, lo, hi):
    """Regula falsi inside ``[lo, hi]`` until ``|phi| < HIT_TOL``."""
    flo, fhi = implicit_value(wall, segment(lo)), implicit_value(wall, segment(hi))
    best = hi if abs(fhi) <= abs(flo) else lo
    for _ in range(NEWTON_ITERS):
        fb = implicit_value(wall, segment(best))
        if abs(fb) < HIT_TOL or fhi == flo:
            break
        th = hi - fhi * (hi - lo) / (fhi - flo)
        if not lo <= th <= hi:
            break
        ft = implicit_value(wall, segment(th))
        best = th
        if _side(ft) == _side(flo):
            lo, flo = th, ft
        else:
            hi, fhi = th, ft
    return best


def iter_crossings(wall: QuadricWall, segment, side: float, samples: int = SUBSAMPLES):
    """Yield ``(lo, hi, accepted)`` brackets of successive wall crossings along a segment.

    ``side`` is the sign of the wall function where the segment starts; it flips
    after every crossing, so rejected crossings (other sheet, masked out) are
    followed by crossings in the opposite direction.
    """
    thetas = np.linspace(0.0, 1.0, samples + 1)
    for k in range(samples):
        lo, hi = thetas[k], thetas[k + 1]
        if _side(implicit_value(wall, segment(hi))) == side:
            continue
        lo, hi = _bisect(wall, segment, lo, hi, side)
        accepted = wall.accepts(segment(hi))
        yield lo, hi, accepted
        if accepted:
            return
        side = -side


def detect_crossing(space: SpaceForm, wall: QuadricWall, segment, side: Optional[float] = None, samples: int = SUBSAMPLES):
    """Earliest accepted wall crossing along a dense segment.

    ``segment`` maps ``theta`` in [0, 1] to ambient positions. Sign changes are
    scanned on ``samples`` sub-intervals, bisected, then polished by regula
    falsi. Returns ``(theta, q)`` with ``q`` snapped onto the wall, or ``None``.
    """
    if wall.space != space:
        raise ValueError("wall and space disagree")
    if side is None:
        side = _side(implicit_value(wall, segment(0.0)))
    for lo, hi, accepted in iter_crossings(wall, segment, side, samples):
        if accepted:
            theta = _secant_polish(wall, segment, lo, hi)
            q = segment(theta)
            dq = segment(hi) - segment(lo)
            q, _ = _snap_to_wall(space, wall, q, dq)
            return theta, q
    return None


@dataclass
class _Hit:
    s: float
    wall: QuadricWall
    y: np.ndarray


def _polish_hit(dyn, t, y, f, res, wall, lo, hi, rtol, atol) -> _Hit:
    """Newton iteration on the hit time using genuine RK steps from the step start."""
    d = dyn.d
    s_lo, s_hi = lo * res.h, hi * res.h
    s = s_hi
    best = None
    for _ in range(NEWTON_ITERS):
        ys = rk.rk_step(dyn.rhs, t, y, f, s, rtol, atol).y
        q, v = ys[:d], ys[d : 2 * d]
        phi = implicit_value(wall, q)
        if best is None or abs(phi) < best[0]:
            best = (abs(phi), s, ys)
        if abs(phi) < HIT_TOL:
            break
        slope = float(np.dot(implicit_gradient(wall, q), v))
        if slope == 0.0:
            break
        s_new = s - phi / slope
        if not (0.5 * s_lo <= s_new <= s_hi + 0.5 * (s_hi - s_lo)) or s_new <= 0.0:
            break
        s = s_new
    return _Hit(best[1], wall, best[2])


def simulate(
    space: SpaceForm,
    params: LagrangeParams,
    walls: Sequence[QuadricWall],
    state0: PhaseState,
    T: float = math.inf,
    max_reflections: Optional[int] = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    h_max: float = math.inf,
    max_steps: int = 2_000_000,
    integrals: Optional[Sequence] = None,
) -> Trajectory:
    """Integrate a billiard run until ``t0 + T``, ``max_reflections`` or a stop status.

    ``integrals`` (first integrals from :mod:`integrals`) are evaluated at every
    sample and stored in ``trajectory.integral_samples``.
    """
    walls = list(walls)
    if walls:
        check_confocal(walls, space)
    if not math.isfinite(T) and max_reflections is None:
        raise ValueError("need a finite T or max_reflections")
    if T < 0:
        raise ValueError("T must be non-negative")
    dyn = _Dynamics(space, params)
    rhs = dyn.rhs
    d = dyn.d
    traj = Trajectory(space)
    t = state0.t
    t_end = t + T
    q0, v0 = renormalize(space, _vec(space, state0.q), _vec(space, state0.v))
    y = dyn.pack(q0, v0, 0.0)
    sides = [initial_side(w, q0, v0) for w in walls]
    try:
        dyn.check_domain(q0)
        f = rhs(t, y)
    except CenterCollision as exc:
        traj.status, traj.message = Status.COLLISION, str(exc)
        return _finish(traj, integrals)
    except SingularityError as exc:
        traj.status, traj.message = Status.SINGULAR, str(exc)
        return _finish(traj, integrals)
    traj._append(t, q0, v0, dyn.unpack(y)[2])
    h = min(rk.initial_step(rhs, t, y, f, rtol, atol), h_max)
    last_error: Exception | None = None

    while traj.status is Status.RUNNING:
        remaining = t_end - t
        if remaining <= 0.0:
            traj.status = Status.TIME_LIMIT
            break
        if traj.n_steps >= max_steps:
            traj.status, traj.message = Status.SINGULAR, "step budget exhausted"
            break
        h = min(h, h_max, remaining)
        if h < H_MIN and remaining > H_MIN:
            near = dyn.center_distance(y[:d]) < COLLISION_NEAR
            traj.status = Status.COLLISION if near or isinstance(last_error, CenterCollision) else Status.SINGULAR
            traj.message = f"step size underflow at t={t:.17g}: {last_error}"
            break
        try:
            res = rk.rk_step(rhs, t, y, f, h, rtol, atol)
        except SingularityError as exc:
            last_error = exc
            traj.n_rejected += 1
            h *= 0.25
            continue
        if not rk.error_is_acceptable(res.error):
            traj.n_rejected += 1
            last_error = None
            h = rk.next_step_size(h, res.error) if math.isfinite(res.error) else 0.25 * h
            continue
        h_next = rk.next_step_size(h, res.error)
        traj.n_steps += 1

        try:
            segment = lambda th: res.dense(th)[:d]
            found = []
            flips: dict[int, list[float]] = {}
            for idx, wall in enumerate(walls):
                for lo, hi, accepted in iter_crossings(wall, segment, sides[idx]):
                    if accepted:
                        found.append((lo, hi, idx))
                    else:
                        flips.setdefault(idx, []).append(hi)
            if not found:
                for idx, fl in flips.items():
                    if len(fl) % 2:
                        sides[idx] = -sides[idx]
                y = dyn.clean(res.y)
                t += res.h
                f = rhs(t, y) if dyn.curved else res.f
                q, v, tau = dyn.unpack(y)
                traj._append(t, q, v, tau)
                h = h_next
                continue

            lo, hi, idx = min(found)
            for j, fl in flips.items():
                if sum(1 for th in fl if th < hi) % 2:
                    sides[j] = -sides[j]
            hit = _polish_hit(dyn, t, y, f, res, walls[idx], lo, hi, rtol, atol)
            q, v, tau = dyn.unpack(dyn.clean(hit.y))
            q, v = _snap_to_wall(space, hit.wall, q, v)
            t_hit = t + hit.s
            try:
                v_out = reflect(space, hit.wall, q, v)
            except GrazingHit as exc:
                traj._append(t_hit, q, v, tau)
                traj.status, traj.message = Status.GRAZING, str(exc)
                break
            traj.events.append(ReflectionEvent(t_hit, q.copy(), v.copy(), v_out.copy(), hit.wall.id))
            traj._append(t_hit, q, v_out, tau, v_left=v)
            traj.event_indices.append(len(traj.times) - 1)
            q_n, v_n = renormalize(space, q + NUDGE * v_out, v_out)
            y = dyn.pack(q_n, v_n, 0.0 if tau is None else tau)
            t = t_hit
            f = rhs(t, y)
            h = max(min(h_next, h), 1e-3 * h)
            if max_reflections is not None and len(traj.events) >= max_reflections:
                traj.status = Status.REFLECTION_COUNT
        except CenterCollision as exc:
            traj.status, traj.message = Status.COLLISION, str(exc)
        except SingularityError as exc:
            traj.status, traj.message = Status.SINGULAR, str(exc)

    log.debug("run finished: %s after %d steps, %d events", traj.status.value, traj.n_steps, len(traj.events))
    return _finish(traj, integrals)


def _finish(traj: Trajectory, integrals) -> Trajectory:
    if integrals:
        from .integrals import sample_integrals

        traj.integral_samples = sample_integrals(traj, integrals)
    return traj
