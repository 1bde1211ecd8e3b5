"""Run artifacts: trajectory CSV, window log CSV and the metrics JSON document.

Every file is written to a temporary sibling first and renamed into place, so a failed run
never leaves a partial file behind.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from typing import List, Optional

from .simulator import ScenarioResult

TRAJECTORY_HEADER = ("t", "vehicle_id", "lane", "p", "v", "u", "mode", "u_lower", "u_upper")
WINDOW_HEADER = ("vehicle_id", "node_id", "t_lo", "t_hi", "granted_at", "superseded", "p_node")


def _g(x: float) -> str:
    return "%.9g" % x


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def commit_all(files) -> None:
    """Write ``{path: text}`` via temporaries, renaming only after every write succeeded."""
    staged: List[tuple] = []
    try:
        for path, text in files.items():
            path = os.fspath(path)
            fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=os.path.dirname(os.path.abspath(path)))
            staged.append((tmp, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def trajectory_csv(result: ScenarioResult) -> str:
    rows = []
    for vid, lg in result.logs.items():
        for k in range(len(lg)):
            rows.append((lg.t[k], vid, lg.lane, lg.p[k], lg.v[k], lg.u[k], lg.mode[k], lg.u_lower[k], lg.u_upper[k]))
    rows.sort(key=lambda r: (r[0], r[1]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for t, vid, lane, p, v, u, mode, lo, hi in rows:
        w.writerow((_g(t), vid, lane, _g(p), _g(v), _g(u), mode, _g(lo), _g(hi)))
    return buf.getvalue()


def windows_csv(result: ScenarioResult) -> str:
    sc = result.scenario
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(WINDOW_HEADER)
    lane_of = {v.vehicle_id: v.lane for v in sc.vehicles}
    for g in result.grants:
        p_node = sc.lane(lane_of[g.vehicle_id]).nodes.get(g.node_id, math.nan)
        w.writerow((g.vehicle_id, g.node_id, _g(g.t_lo), _g(g.t_hi), _g(g.granted_at),
                    int(g.superseded), _g(p_node)))
    return buf.getvalue()


def _finite(x):
    return x if isinstance(x, float) and math.isfinite(x) else (None if isinstance(x, float) else x)


def metrics(result: ScenarioResult) -> dict:
    """Metrics tree; the ``compute`` block is the only machine-dependent part."""
    sc = result.scenario
    a = result.audit
    return {
        "scenario": sc.name,
        "controller": sc.controller,
        "seed": sc.seed,
        "dt_s": sc.dt,
        "t_end_s": sc.t_end,
        "vehicles": len(sc.vehicles),
        "J_u_mean": _finite(result.J_u_mean),
        "J_alpha_mean": _finite(result.J_alpha_mean),
        "J_u": {str(k): v for k, v in sorted(result.J_u.items())},
        "J_alpha": {str(k): v for k, v in sorted(result.J_alpha.items())},
        "audit": {
            "min_gap_m": _finite(a.min_gap),
            "rear_end_violations": a.rear_end_violations,
            "co_occupancy_violations": a.co_occupancy_violations,
            "compliance": {str(k): v for k, v in sorted(a.compliance.items())},
            "clean": a.clean,
            "details": list(a.details),
        },
        "planning_failures": {str(k): v for k, v in sorted(result.planning_failures.items())},
        "compute": dict(result.compute_stats, backend=result.backend),
    }


def metrics_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def write_run(result: ScenarioResult, out_dir, stem: Optional[str] = None) -> dict:
    """Write the three run files into ``out_dir``; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    stem = stem or result.scenario.controller
    paths = {
        "trajectory": os.path.join(out_dir, f"{stem}_trajectory.csv"),
        "windows": os.path.join(out_dir, f"{stem}_windows.csv"),
        "metrics": os.path.join(out_dir, f"{stem}_metrics.json"),
    }
    commit_all({
        paths["trajectory"]: trajectory_csv(result),
        paths["windows"]: windows_csv(result),
        paths["metrics"]: metrics_json(metrics(result)),
    })
    return paths


def read_csv(path) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
