"""Command-line entry point.

Exit codes: 0 all requested checks pass, 1 a check failed, 2 invalid
scenario or arguments, 3 the run stopped at a singularity.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import checks
from .errors import BilliardError, ScenarioError, WallError
from .flow import Status, Trajectory, simulate
from .integrals import drift_report, integral_family
from .scenario import CHECKS, Scenario, set_field

EXIT_OK, EXIT_CHECK, EXIT_INVALID, EXIT_SINGULAR = 0, 1, 2, 3
SINGULAR_STATUSES = (Status.COLLISION, Status.SINGULAR, Status.GRAZING)

log = logging.getLogger("lagrange_billiards")


def fmt(x) -> str:
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def trajectory_csv(traj: Trajectory, integrals=()) -> str:
    """One row per sample: ``t, q0.., v0.., integral values``."""
    d = traj.space.dim
    names = [F.name for F in integrals]
    header = ["t"] + [f"q{i}" for i in range(d)] + [f"v{i}" for i in range(d)] + names
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for t, q, v in zip(traj.times, traj.qs, traj.vs):
        vals = [F(q, v) for F in integrals]
        w.writerow([fmt(t)] + [fmt(x) for x in q] + [fmt(x) for x in v] + [fmt(x) for x in vals])
    return buf.getvalue()


def events_csv(traj: Trajectory) -> str:
    d = traj.space.dim
    header = ["index", "t_hit", "wall_id"] + [f"q{i}" for i in range(d)] + [f"v_in{i}" for i in range(d)] + [f"v_out{i}" for i in range(d)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for k, e in enumerate(traj.events):
        w.writerow([k, fmt(e.t_hit), e.wall_id] + [fmt(x) for x in e.q_hit] + [fmt(x) for x in e.v_in] + [fmt(x) for x in e.v_out])
    return buf.getvalue()


def bracket_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state", "F", "G", "bracket"])
    for r in rows:
        w.writerow([r[0], r[1], r[2], fmt(r[3])])
    return buf.getvalue()


def run_scenario(sc: Scenario, checks_requested: list, out: Path | None) -> tuple[int, dict]:
    """Run the simulation and requested checks; write artifacts into ``out``."""
    files: dict[str, str] = {}
    results = []
    summary: dict = {}
    code = EXIT_OK
    rng = np.random.default_rng(sc.seed)
    samples = int(sc.raw.get("samples", 100))
    tol = sc.raw["tolerances"]

    fam = integral_family(sc.space, sc.params)
    traj = simulate(sc.space, sc.params, sc.walls, sc.state0, T=sc.T, max_reflections=sc.max_reflections, rtol=sc.rtol, atol=sc.atol)
    files["trajectory.csv"] = trajectory_csv(traj, fam)
    files["events.csv"] = events_csv(traj)
    summary["status"] = traj.status.value
    summary["message"] = traj.message
    summary["samples"] = len(traj)
    summary["reflections"] = len(traj.events)
    summary["t_end"] = traj.times[-1] if len(traj) else sc.state0.t
    if traj.status in SINGULAR_STATUSES:
        summary["partial"] = True
        code = EXIT_SINGULAR

    report = drift_report(traj, fam)
    summary["drift"] = {k: v.as_dict() for k, v in report.items()}
    if "drift" in checks_requested:
        worst = max((e.max_drift for e in report.values()), default=0.0)
        worst_jump = max((e.max_jump for e in report.values()), default=0.0)
        results.append(checks.CheckResult("drift", worst, float(tol["drift"])))
        results.append(checks.CheckResult("reflection_jump", worst_jump, float(tol["jump"])))

    if "involution" in checks_requested or "rank" in checks_requested:
        from .integrals import bracket_table, jacobian_rank

        rows, worst, ranks = [], 0.0, []
        for s in range(samples):
            state = checks.random_state(sc.space, rng)
            for (a, b), val in bracket_table(fam, state).items():
                rows.append((s, a, b, val))
                worst = max(worst, abs(val))
            ranks.append(jacobian_rank(fam, state))
        files["brackets.csv"] = bracket_csv(rows)
        if "involution" in checks_requested:
            results.append(checks.CheckResult("involution", worst, checks.BRACKET_TOL, {"chart": _bracket_chart(sc)}))
        if "rank" in checks_requested:
            deficit = float(sum(r != sc.space.n for r in ranks))
            results.append(checks.CheckResult("rank", deficit, 0.5, {"expected": sc.space.n, "ranks": sorted(set(ranks))}))

    if "correspondence" in checks_requested:
        chart = sc.space.chart
        st = sc.state0
        if sc.space.is_curved:
            from .projection import lift_state

            qt, vt = lift_state(sc.space, st.q, st.v)
        else:
            qt, vt = st.q, st.v
        res = checks.correspondence(chart, sc.params, qt, vt, float(sc.raw.get("correspondence_T", 5.0)), sc.rtol, sc.atol)
        results.append(res)
        print(f"max correspondence deviation: {res.value:.3e}")

    if "reflection" in checks_requested:
        chart = sc.space.chart
        walls = [w for w in sc.walls] or checks.confocal_walls(chart)
        seen = set()
        for w in walls:
            if w.kind in seen:
                continue
            seen.add(w.kind)
            cw = type(w)(chart, w.kind, w.A, w.B, w.sheet, w.id)
            results.append(checks.reflection_commutation(chart, cw, rng, samples))
            results.append(checks.euclidean_reflection_isometry(chart, cw, rng, samples))

    failed = [r for r in results if not r.passed]
    if failed and code == EXIT_OK:
        code = EXIT_CHECK
    digest = hashlib.sha256((files["trajectory.csv"] + files["events.csv"]).encode()).hexdigest()
    doc = {
        "scenario": sc.to_dict(),
        "summary": summary,
        "checks": [r.as_dict() for r in results],
        "events": [
            {"t_hit": e.t_hit, "wall_id": e.wall_id, "q_hit": e.q_hit, "v_in": e.v_in, "v_out": e.v_out} for e in traj.events
        ],
        "digest": digest,
        "exit_code": code,
    }
    files["report.json"] = dump_json(doc)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.value:.3e} (tol {r.tol:.0e})")
    print(f"status={summary['status']} reflections={summary['reflections']} digest={digest[:16]}")
    return code, doc


def _bracket_chart(sc: Scenario) -> str:
    if not sc.space.is_curved:
        return "affine chart"
    return "gnomonic chart" if sc.space.curvature > 0 else "Beltrami-Klein chart"


def _parse_sweep(text: str):
    try:
        field, rng = text.split("=", 1)
        start, stop, steps = rng.split(":")
        start, stop, steps = float(start), float(stop), int(steps)
    except ValueError:
        raise ScenarioError(f"--sweep expects field=start:stop:steps, got {text!r}") from None
    if steps < 1:
        raise ScenarioError("--sweep needs at least one step")
    return field, np.linspace(start, stop, steps).tolist()


def _sweep_job(args):
    doc, checks_requested, out = args
    try:
        sc = Scenario.from_dict(doc)
        code, _ = run_scenario(sc, checks_requested, Path(out) if out else None)
    except (ScenarioError, WallError, ValueError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lagrange-billiards", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and optional property checks")
    r.add_argument("--scenario", type=Path)
    r.add_argument("--check", "--verify", dest="checks", action="append", choices=CHECKS, default=[])
    r.add_argument("--geometry", choices=["euclidean", "sphere", "hyperbolic"])
    r.add_argument("--n", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", type=Path)
    r.add_argument("--sweep", metavar="FIELD=START:STOP:STEPS")
    r.add_argument("--workers", type=int, default=None)
    return p


def _document(args) -> dict:
    doc = {}
    if args.scenario is not None:
        try:
            doc = json.loads(args.scenario.read_text())
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {args.scenario}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario {args.scenario} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ScenarioError("scenario must be a JSON object")
    if args.geometry is not None:
        doc = set_field(doc, "geometry.kind", args.geometry)
    if args.n is not None:
        doc = set_field(doc, "geometry.n", args.n)
    if args.seed is not None:
        doc = set_field(doc, "seed", args.seed)
    return doc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        doc = _document(args)
        requested = list(dict.fromkeys(args.checks or doc.get("reports", [])))
        if args.sweep:
            field, values = _parse_sweep(args.sweep)
            jobs = []
            for i, val in enumerate(values):
                out = args.out / f"sweep_{i:03d}" if args.out else None
                jobs.append((set_field(doc, field, val), requested, str(out) if out else None))
            Scenario.from_dict(jobs[0][0])
            with ProcessPoolExecutor(max_workers=args.workers) as ex:
                codes = list(ex.map(_sweep_job, jobs))
            for val, c in zip(values, codes):
                print(f"{field}={fmt(val)} exit={c}")
            if args.out:
                args.out.mkdir(parents=True, exist_ok=True)
                (args.out / "sweep.json").write_text(
                    dump_json({"field": field, "runs": [{"value": v, "dir": f"sweep_{i:03d}", "exit_code": c} for i, (v, c) in enumerate(zip(values, codes))]})
                )
            return max(codes)
        sc = Scenario.from_dict(doc)
        code, _ = run_scenario(sc, requested, args.out)
        return code
    except (ScenarioError, WallError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BilliardError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
