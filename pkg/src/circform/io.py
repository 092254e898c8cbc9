"""Trace files.

A run directory holds:

``trace.csv``     ``t,agent,x,y,psi,e,theta,u_r,c,u_psi,bank`` one row per step per agent
``edges.csv``     ``t,agent,edge,e_theta,stale`` one row per step per agent per incident edge
``messages.csv``  one row per broadcast message with its delivery outcome
``config.resolved.yaml`` and ``summary.json``

Angle columns (psi, theta, bank, e_theta) are degrees and ``u_psi`` is deg/s.
Every CSV starts with a ``#`` line carrying the schema version and the config
hash.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import yaml

from . import config as config_mod
from .network import Message
from .sim import SimTrace

TRACE_COLUMNS = ("t", "agent", "x", "y", "psi", "e", "theta", "u_r", "c", "u_psi", "bank")
EDGE_COLUMNS = ("t", "agent", "edge", "e_theta", "stale")
MESSAGE_COLUMNS = ("t_send", "sender", "receiver", "edge", "delivered", "t_deliver", "reason")
DEGREE_COLUMNS = {"psi", "theta", "bank", "u_psi"}


class TraceFileError(ValueError):
    pass


def stamp(config_hash: str) -> str:
    return f"# schema_version={config_mod.SCHEMA_VERSION} config_hash={config_hash}"


def _read_stamp(path: Path) -> dict:
    with open(path) as fh:
        first = fh.readline().strip()
    if not first.startswith("#"):
        raise TraceFileError(f"{path}: missing schema stamp line")
    return dict(item.split("=", 1) for item in first[1:].split())


def write_trace(trace: SimTrace, out: Path, raw_config: dict, summary: dict | None = None) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    h = trace.meta["config_hash"]
    steps, n = trace.x.shape
    cols = []
    for name in TRACE_COLUMNS:
        if name == "t":
            v = np.repeat(trace.t, n)
        elif name == "agent":
            v = np.tile(np.arange(1, n + 1), steps)
        else:
            v = getattr(trace, name).reshape(-1)
            if name in DEGREE_COLUMNS:
                v = np.degrees(v)
        cols.append(v)
    fmt = ["%.17g", "%d"] + ["%.17g"] * (len(TRACE_COLUMNS) - 2)
    _write_csv(out / "trace.csv", h, TRACE_COLUMNS, np.column_stack(cols), fmt)

    rows = []
    for i in range(n):
        for k in range(len(trace.edges)):
            if np.isnan(trace.e_theta[0, i, k]):
                continue
            rows.append(np.column_stack([
                trace.t, np.full(steps, i + 1), np.full(steps, k + 1),
                np.degrees(trace.e_theta[:, i, k]), trace.stale[:, i, k].astype(float),
            ]))
    body = np.concatenate(rows) if rows else np.empty((0, 5))
    if len(body):
        body = body[np.lexsort((body[:, 2], body[:, 1], body[:, 0]))]
    _write_csv(out / "edges.csv", h, EDGE_COLUMNS, body, ["%.17g", "%d", "%d", "%.17g", "%d"])

    with open(out / "messages.csv", "w") as fh:
        fh.write(stamp(h) + "\n" + ",".join(MESSAGE_COLUMNS) + "\n")
        for m in trace.messages:
            fh.write(f"{float(m.t_send)!r},{m.sender},{m.receiver},{m.edge + 1},{int(m.delivered)},"
                     f"{float(m.t_deliver)!r},{m.reason}\n")

    with open(out / "config.resolved.yaml", "w") as fh:
        fh.write(stamp(h) + "\n")
        yaml.safe_dump(raw_config, fh, sort_keys=False)
    if summary is not None:
        payload = {"schema_version": config_mod.SCHEMA_VERSION, "config_hash": h, **summary}
        with open(out / "summary.json", "w") as fh:
            json.dump(payload, fh, indent=2, default=_json_default)
            fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o).__name__)


def _write_csv(path: Path, config_hash: str, columns, body: np.ndarray, fmt) -> None:
    with open(path, "w") as fh:
        fh.write(stamp(config_hash) + "\n" + ",".join(columns) + "\n")
        if len(body):
            np.savetxt(fh, body, fmt=fmt, delimiter=",")


def load_trace(run_dir: Path) -> SimTrace:
    """Rebuild a :class:`SimTrace` from a run directory (angles back to radians)."""
    run_dir = Path(run_dir)
    needed = ["trace.csv", "edges.csv", "config.resolved.yaml"]
    for name in needed:
        if not (run_dir / name).exists():
            raise TraceFileError(f"{run_dir}: missing {name}")
    stamp_info = _read_stamp(run_dir / "trace.csv")
    raw = yaml.safe_load((run_dir / "config.resolved.yaml").read_text())
    cfg = config_mod.build(raw)
    try:
        data = np.loadtxt(run_dir / "trace.csv", delimiter=",", comments="#", skiprows=2, ndmin=2)
    except ValueError as exc:
        raise TraceFileError(f"{run_dir / 'trace.csv'}: unreadable ({exc})") from exc
    n = len(cfg.agents)
    if data.shape[1] != len(TRACE_COLUMNS) or len(data) % n:
        raise TraceFileError(f"{run_dir / 'trace.csv'}: truncated or malformed ({len(data)} rows for {n} agents)")
    steps = len(data) // n
    if steps != cfg.steps + 1:
        raise TraceFileError(f"{run_dir / 'trace.csv'}: truncated, {steps} of {cfg.steps + 1} steps")
    cube = data.reshape(steps, n, len(TRACE_COLUMNS))
    fields = {}
    for j, name in enumerate(TRACE_COLUMNS[2:], start=2):
        v = cube[:, :, j]
        fields[name] = np.radians(v) if name in DEGREE_COLUMNS else v
    m = cfg.graph.edge_count
    e_theta = np.full((steps, n, m), np.nan)
    stale = np.zeros((steps, n, m), dtype=bool)
    edge_lines = (run_dir / "edges.csv").read_text().splitlines()[2:]
    edges = np.loadtxt(edge_lines, delimiter=",", ndmin=2) if edge_lines else np.empty((0, 5))
    if len(edges):
        step_idx = np.rint((edges[:, 0] - cube[0, 0, 0]) / cfg.dt).astype(int)
        ai = edges[:, 1].astype(int) - 1
        ei = edges[:, 2].astype(int) - 1
        e_theta[step_idx, ai, ei] = np.radians(edges[:, 3])
        stale[step_idx, ai, ei] = edges[:, 4] > 0
    messages = []
    if (run_dir / "messages.csv").exists():
        with open(run_dir / "messages.csv") as fh:
            lines = fh.read().splitlines()[2:]
        for line in lines:
            t_send, snd, rcv, edge, ok, t_del, reason = line.split(",")
            messages.append(Message(float(t_send), int(snd), int(rcv), int(edge) - 1, (math.nan, math.nan),
                                    float(t_del), bool(int(ok)), reason))
    f = cfg.formation
    meta = {
        "name": cfg.name, "config_hash": stamp_info.get("config_hash"), "backend": "file",
        "center": cfg.path.center, "dt": cfg.dt, "speeds": [a.speed for a in cfg.agents],
        "zero_field_holds": [], "connected": cfg.connected, "band": cfg.band, "dwell": cfg.dwell,
        "transient": cfg.transient, "linearity": cfg.linearity, "k_r": f.k_r if f else 0.0,
    }
    return SimTrace(
        t=cube[:, 0, 0].copy(), e_theta=e_theta, stale=stale, edges=cfg.graph.edges,
        z_star=f.z_star if f else (0.0,) * m, radius=getattr(cfg.path, "radius", float("nan")),
        max_offset=f.max_offset if f else 0.0, messages=messages, meta=meta, **fields,
    )
