"""JSON scenario files: geometry, forces, walls, initial state, stop rule and reports."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ScenarioError, WallError
from .flow import PhaseState
from .forces import LagrangeParams
from .projection import project_state
from .quadrics import QuadricWall, Sheet, WallKind, check_confocal, implicit_value, shape_from_focus
from .spaceform import Geometry, SpaceForm, check_on_surface

CHECKS = ("drift", "involution", "rank", "correspondence", "reflection")

DEFAULTS: dict[str, Any] = {
    "geometry": {"kind": "euclidean", "n": 3, "a": 0.5, "branch": "sphere"},
    "params": {"m1": 1.0, "m2": 0.8, "f": -0.3},
    "walls": "confocal",
    "initial": {"random": True, "speed": 3.0},
    "stop": {"T": 50.0, "max_reflections": 100},
    "tolerances": {"rtol": 1e-10, "atol": 1e-12, "drift": 1e-7, "jump": 1e-10},
    "reports": [],
    "samples": 100,
    "correspondence_T": 5.0,
    "seed": 0,
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _num(d: dict, key: str, where: str) -> float:
    try:
        val = float(d[key])
    except KeyError:
        raise ScenarioError(f"{where}: missing field {key!r}") from None
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}.{key} must be a number") from None
    if not math.isfinite(val):
        raise ScenarioError(f"{where}.{key} must be finite")
    return val


@dataclass
class Scenario:
    """Validated scenario. ``raw`` keeps the merged JSON document."""

    raw: dict
    space: SpaceForm
    params: LagrangeParams
    walls: list
    state0: PhaseState
    T: float
    max_reflections: int | None
    rtol: float
    atol: float
    reports: list
    seed: int

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        if not isinstance(doc, dict):
            raise ScenarioError("scenario must be a JSON object")
        raw = _merge(DEFAULTS, doc)
        space = _space(raw["geometry"])
        params = LagrangeParams(
            _num(raw["params"], "m1", "params"), _num(raw["params"], "m2", "params"), _num(raw["params"], "f", "params"), space.a
        )
        walls = _walls(raw["walls"], space)
        seed = int(raw["seed"])
        state0 = _initial(raw["initial"], space, walls, seed)
        stop = raw["stop"]
        T = float(stop.get("T", math.inf) if stop.get("T") is not None else math.inf)
        mr = stop.get("max_reflections")
        mr = None if mr is None else int(mr)
        if not math.isfinite(T) and mr is None:
            raise ScenarioError("stop needs T or max_reflections")
        if T < 0 or (mr is not None and mr < 0):
            raise ScenarioError("stop values must be non-negative")
        tol = raw["tolerances"]
        reports = list(raw["reports"])
        for r in reports:
            if r not in CHECKS:
                raise ScenarioError(f"unknown report {r!r}; expected one of {CHECKS}")
        return cls(raw, space, params, walls, state0, T, mr, float(tol["rtol"]), float(tol["atol"]), reports, seed)

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def _space(g: dict) -> SpaceForm:
    try:
        kind = Geometry(g["kind"])
    except (KeyError, ValueError):
        raise ScenarioError(f"geometry.kind must be one of {[k.value for k in Geometry]}") from None
    n = int(g.get("n", 3))
    a = _num(g, "a", "geometry") if "a" in g else 0.0
    try:
        if kind is Geometry.EUCLIDEAN:
            branch = g.get("branch", "sphere")
            if branch not in ("sphere", "hyperbolic"):
                raise ScenarioError("geometry.branch must be 'sphere' or 'hyperbolic'")
            return SpaceForm.euclidean(n, a, hyperbolic=branch == "hyperbolic")
        return SpaceForm.sphere(n, a) if kind is Geometry.SPHERE else SpaceForm.hyperbolic(n, a)
    except ValueError as exc:
        raise ScenarioError(f"invalid geometry: {exc}") from None


def default_walls(space: SpaceForm) -> list:
    """A single spheroid confocal with the Kepler centers."""
    a = space.a
    A = a + 0.5 if space.curvature > 0 else 0.5 * (a + 1.0)
    return [QuadricWall(space, WallKind.SPHEROID, A, shape_from_focus(WallKind.SPHEROID, a, A, space), id="spheroid")]


def _walls(cfg, space: SpaceForm) -> list:
    if cfg == "confocal":
        return default_walls(space)
    if not isinstance(cfg, list):
        raise ScenarioError("walls must be a list or the string 'confocal'")
    walls = []
    for i, w in enumerate(cfg):
        where = f"walls[{i}]"
        try:
            kind = WallKind(w.get("kind", "spheroid"))
            A = _num(w, "A", where)
            B = _num(w, "B", where) if "B" in w else shape_from_focus(kind, space.a, A, space)
            walls.append(QuadricWall(space, kind, A, B, Sheet(w.get("sheet", "both")), str(w.get("id", f"wall{i}"))))
        except (ValueError, WallError) as exc:
            raise ScenarioError(f"{where}: {exc}") from None
    ids = [w.id for w in walls]
    if len(set(ids)) != len(ids):
        raise ScenarioError("wall ids must be unique")
    try:
        check_confocal(walls, space)
    except WallError as exc:
        raise ScenarioError(str(exc)) from None
    return walls


def _inside(walls, q) -> bool:
    return all(implicit_value(w, q) < 0.0 for w in walls if w.kind is WallKind.SPHEROID)


def _initial(cfg: dict, space: SpaceForm, walls: list, seed: int) -> PhaseState:
    from .checks import random_chart_state

    n1 = space.dim
    if "q" in cfg or "v" in cfg:
        q = np.asarray(cfg.get("q"), dtype=float)
        v = np.asarray(cfg.get("v"), dtype=float)
        if q.shape != (n1,) or v.shape != (n1,):
            raise ScenarioError(f"initial q and v need {n1} ambient coordinates")
        if space.is_curved:
            try:
                check_on_surface(space, q)
            except ValueError as exc:
                raise ScenarioError(f"initial point: {exc}") from None
        elif abs(q[-1] + 1.0) > 1e-12 or v[-1] != 0.0:
            raise ScenarioError("chart states need q[n] = -1 and v[n] = 0")
    elif "chart_q" in cfg:
        qt = np.asarray(cfg["chart_q"], dtype=float)
        vt = np.asarray(cfg.get("chart_v"), dtype=float)
        if qt.shape == (n1 - 1,):
            qt, vt = np.append(qt, -1.0), np.append(vt, 0.0)
        if qt.shape != (n1,) or vt.shape != (n1,):
            raise ScenarioError(f"chart_q / chart_v need {n1 - 1} or {n1} coordinates")
        try:
            q, v = project_state(space, qt, vt) if space.is_curved else (qt, vt)
        except ValueError as exc:
            raise ScenarioError(f"initial chart state: {exc}") from None
    elif cfg.get("random"):
        rng = np.random.default_rng(seed)
        speed = float(cfg.get("speed", 3.0))
        for _ in range(10_000):
            qt, vt = random_chart_state(space, rng, radius=float(cfg.get("radius", 0.5)), speed=speed)
            if _inside(walls, qt):
                break
        else:
            raise ScenarioError("could not draw a random initial state inside the walls")
        q, v = project_state(space, qt, vt) if space.is_curved else (qt, vt)
    else:
        raise ScenarioError("initial needs q/v, chart_q/chart_v or random: true")
    if walls and not _inside(walls, q):
        raise ScenarioError("initial point lies outside a spheroid wall")
    return PhaseState(q, v, float(cfg.get("t", 0.0)))


def set_field(doc: dict, dotted: str, value) -> dict:
    """Copy of ``doc`` with ``a.b.c = value``."""
    out = copy.deepcopy(doc)
    node = out
    keys = dotted.split(".")
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ScenarioError(f"cannot set {dotted}: {k} is not an object")
    node[keys[-1]] = value
    return out
