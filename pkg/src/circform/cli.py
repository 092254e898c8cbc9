"""``circform`` command line.

Exit codes: 0 success, 2 validation failure, 3 runtime degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, config as config_mod, io
from ._kernels import load as load_kernel
from .graph import (
    FormationGraph,
    GraphError,
    consensus_matrix,
    incidence_matrix,
    is_acyclic,
    is_connected,
    verify_hurwitz,
)
from .sim import DegenerateGeometryError, run_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_DEGENERATE = 0, 2, 3

log = logging.getLogger("circform")


class Output:
    """Human-readable text plus ``section,key,value`` rows for machines."""

    def __init__(self, command: str, config_hash: str = "-") -> None:
        self.command = command
        self.config_hash = config_hash
        self.rows: list[tuple[str, str, object]] = []
        self.text: list[str] = []

    def line(self, s: str = "") -> None:
        self.text.append(s)

    def row(self, section: str, key: str, value: object) -> None:
        self.rows.append((section, key, value))

    def emit(self, fmt: str, rows_path: str | None = None) -> None:
        head = f"# schema_version={config_mod.SCHEMA_VERSION} config_hash={self.config_hash} command={self.command}"
        if fmt == "json":
            payload = {"schema_version": config_mod.SCHEMA_VERSION, "config_hash": self.config_hash,
                       "command": self.command,
                       "rows": [{"section": s, "key": k, "value": _plain(v)} for s, k, v in self.rows]}
            print(json.dumps(payload, indent=2))
        else:
            print(head)
            for s in self.text:
                print(s)
            print()
            print("section,key,value")
            for s, k, v in self.rows:
                print(f"{s},{k},{_fmt(v)}")
        if rows_path:
            with open(rows_path, "w", newline="") as fh:
                fh.write(head + "\n")
                w = csv.writer(fh)
                w.writerow(["section", "key", "value"])
                for s, k, v in self.rows:
                    w.writerow([s, k, _fmt(v)])


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _fmt(v) -> str:
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _add_common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", required=True, help="scenario file or bundled name " + ", ".join(config_mod.BUNDLED))
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry on a dotted path (repeatable)")
        p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--rows", default=None, metavar="CSV", help="also write the machine-readable rows here")


def _load_config(args) -> config_mod.ScenarioConfig:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    return config_mod.load(args.config, overrides)


def _report_rows(out: Output, rep: analysis.ConvergenceReport) -> None:
    for k, v in rep.settling.items():
        out.row("settling", f"edge{k + 1}", v)
    for k, v in rep.rates.items():
        out.row("fitted_rate", f"edge{k + 1}", v)
        out.row("fit_r2", f"edge{k + 1}", rep.r2[k])
    for k, v in rep.diagnostics.items():
        out.row("fit_diagnostic", f"edge{k + 1}", v)
    out.row("run", "settled", rep.settled)
    out.row("run", "half_error_time", rep.half_error_time)
    out.row("confinement", "max_distance", rep.max_distance)
    out.row("confinement", "predicted", rep.predicted_confinement)
    out.row("confinement", "overshoot", rep.overshoot)


def _report_text(out: Output, rep: analysis.ConvergenceReport) -> None:
    band = math.degrees(rep.band)
    for k, v in rep.settling.items():
        state = f"settled at t={v:.2f} s" if v is not None else "not settled"
        out.line(f"edge {k + 1}: {state} (band +/-{band:g} deg held {rep.dwell:g} s)")
    for k, v in rep.rates.items():
        if v is None:
            out.line(f"edge {k + 1}: decay fit rejected: {rep.diagnostics.get(k)}")
        else:
            out.line(f"edge {k + 1}: fitted decay rate {v:.5f} 1/s (R^2 {rep.r2[k]:.4f})")
    if rep.half_error_time is not None:
        out.line(f"half-error time: {rep.half_error_time:.2f} s")
    if math.isfinite(rep.predicted_confinement):
        out.line(f"max distance from center: {rep.max_distance:.3f} m "
                 f"(predicted disc {rep.predicted_confinement:.3f} m, overshoot {rep.overshoot:.3f} m)")
    else:
        out.line(f"max distance from center: {rep.max_distance:.3f} m")


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    kernel = load_kernel(args.backend) if args.backend else None
    trace = run_scenario(cfg, kernel)
    rep = analysis.fit_decay(trace)
    summary = analysis.summarize(trace, rep)
    out_dir = Path(args.out)
    io.write_trace(trace, out_dir, cfg.raw, summary)
    out = Output("simulate", cfg.config_hash)
    out.line(f"scenario {cfg.name}: {len(cfg.agents)} agents, t=[{trace.t[0]:g}, {trace.t[-1]:g}] s, "
             f"backend {trace.meta['backend']}")
    out.line(f"wrote {out_dir}/trace.csv, edges.csv, messages.csv, config.resolved.yaml, summary.json")
    _report_text(out, rep)
    if summary.get("max_path_error_post_transient") is not None:
        out.line(f"max path error after transient: {summary['max_path_error_post_transient']:.4g}")
    if "slow_fast_ok" in summary:
        flag = "ok" if summary["slow_fast_ok"] else "FLAGGED (outside the tracking-assumption regime)"
        out.line(f"slow-fast tracking ratio {summary['slow_fast_ratio']:.3g}: {flag}")
    _report_rows(out, rep)
    for key in ("messages_sent", "messages_delivered", "zero_field_holds", "slow_fast_ratio", "slow_fast_ok"):
        if key in summary:
            out.row("run", key, summary[key])
    out.emit(args.format, args.rows)
    return EXIT_OK


def _parse_grid(items: list[str]) -> list[tuple[str, list]]:
    grid = []
    for item in items:
        key, _, values = item.partition("=")
        if not key:
            raise config_mod.ConfigError([f"grid {item!r}: expected key=v1,v2,..."])
        vals = [config_mod.parse_override(f"x={v}")[1] for v in values.split(",") if v.strip()]
        grid.append((key.strip(), vals))
    return grid


def _parse_seeds(spec: str) -> list[int]:
    if ":" in spec:
        a, b = spec.split(":", 1)
        return list(range(int(a), int(b)))
    return [int(s) for s in spec.split(",") if s.strip()]


def _sweep_one(job: tuple[str, list[str], str | None]) -> dict:
    source, overrides, backend = job
    row: dict = {"overrides": " ".join(overrides)}
    try:
        cfg = config_mod.load(source, overrides)
    except config_mod.ConfigError as exc:
        row.update(status="rejected", detail=str(exc))
        return row
    try:
        trace = run_scenario(cfg, load_kernel(backend) if backend else None)
    except DegenerateGeometryError as exc:
        row.update(status="error", detail=str(exc))
        return row
    rep = analysis.fit_decay(trace)
    summ = analysis.summarize(trace, rep)
    settle = [v for v in rep.settling.values() if v is not None]
    row.update(
        status="ok", detail="", config_hash=cfg.config_hash, settled=rep.settled,
        settling_time=max(settle) if rep.settled and settle else None,
        half_error_time=rep.half_error_time, max_distance=rep.max_distance,
        predicted_confinement=rep.predicted_confinement, confinement_violation=rep.overshoot > 0,
        fitted_slowest_rate=rep.slowest_rate, predicted_slowest_rate=summ.get("predicted_slowest_rate"),
    )
    return row


SWEEP_COLUMNS = ("overrides", "status", "detail", "config_hash", "settled", "settling_time", "half_error_time",
                 "max_distance", "predicted_confinement", "confinement_violation", "fitted_slowest_rate",
                 "predicted_slowest_rate")


def cmd_sweep(args) -> int:
    base = config_mod.resolve(config_mod.read_raw(args.config), args.overrides)
    base_hash = config_mod.config_hash(base)
    grid = _parse_grid(args.grid)
    seeds = _parse_seeds(args.seeds) if args.seeds else [None]
    combos = list(itertools.product(*[[(k, v) for v in vals] for k, vals in grid]))
    jobs = []
    for combo in combos:
        for seed in seeds:
            ov = list(args.overrides) + [f"{k}={json.dumps(v)}" for k, v in combo]
            if seed is not None:
                ov.append(f"run.seed={seed}")
            jobs.append((args.config, ov, args.backend))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    out = Output("sweep", base_hash)
    out.line(f"{len(rows)} runs over {len(combos)} grid points x {len(seeds)} seeds")
    groups: dict[str, list[dict]] = {}
    for (combo_seed_row, job) in zip(rows, jobs):
        key = " ".join(o for o in job[1][len(args.overrides):] if not o.startswith("run.seed="))
        groups.setdefault(key or "(base)", []).append(combo_seed_row)
    for key, rs in groups.items():
        ok = [r for r in rs if r["status"] == "ok"]
        rejected = sum(r["status"] == "rejected" for r in rs)
        failed = sum(r["status"] == "error" for r in rs)
        frac = (sum(bool(r["settled"]) for r in ok) / len(ok)) if ok else float("nan")
        viol = sum(bool(r["confinement_violation"]) for r in ok)
        out.line(f"{key}: settled {frac:.2f} of {len(ok)} ok runs, {viol} confinement violations, "
                 f"{rejected} rejected, {failed} failed")
        out.row(key, "settled_fraction", frac)
        out.row(key, "confinement_violations", viol)
        out.row(key, "rejected", rejected)
        out.row(key, "failed", failed)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(f"# schema_version={config_mod.SCHEMA_VERSION} config_hash={base_hash}\n")
            w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, extrasaction="ignore")
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(r.get(k)) for k in SWEEP_COLUMNS})
        out.line(f"wrote {args.out}")
    out.emit(args.format, args.rows)
    return EXIT_OK


def _graph_from_args(args) -> tuple[FormationGraph, str]:
    if args.config:
        cfg = config_mod.load(args.config, args.overrides)
        return cfg.graph, cfg.config_hash
    if args.vertices is None:
        raise config_mod.ConfigError(["graph-check: give --config or --vertices/--edges"])
    edges = []
    for item in (args.edges or "").split(","):
        if item.strip():
            a, b = item.split("-")
            edges.append((int(a), int(b)))
    try:
        return FormationGraph(args.vertices, tuple(edges)), "-"
    except GraphError as exc:
        raise config_mod.ConfigError([f"graph: {exc}"]) from exc


def cmd_graph_check(args) -> int:
    graph, h = _graph_from_args(args)
    b = incidence_matrix(graph)
    a = consensus_matrix(graph)
    rep = verify_hurwitz(a, args.tolerance)
    out = Output("graph-check", h)
    out.line(f"vertices {graph.vertex_count}, edges {list(graph.edges)}")
    out.line("incidence matrix B:")
    out.line(np.array2string(b))
    out.line("consensus matrix A = -B^T B:")
    out.line(np.array2string(a))
    out.line("eigenvalues of A: " + ", ".join(f"{v:.6g}" for v in rep.eigenvalues))
    out.line(f"acyclic: {is_acyclic(graph)}  connected: {is_connected(graph)}  Hurwitz: {rep.is_hurwitz}")
    for i, rowv in enumerate(b, start=1):
        out.row("B", f"row{i}", " ".join(str(int(x)) for x in rowv))
    for k, rowv in enumerate(a, start=1):
        out.row("A", f"row{k}", " ".join(str(int(x)) for x in rowv))
    for k, v in enumerate(rep.eigenvalues, start=1):
        out.row("eigenvalue", str(k), v)
    out.row("graph", "acyclic", is_acyclic(graph))
    out.row("graph", "connected", is_connected(graph))
    out.row("graph", "hurwitz", rep.is_hurwitz)
    out.row("graph", "max_real_eigenvalue", rep.max_real_eigenvalue)
    out.emit(args.format, args.rows)
    return EXIT_OK


def _need_formation(cfg: config_mod.ScenarioConfig):
    if cfg.formation is None:
        raise config_mod.ConfigError(["formation: scenario has no formation graph"])
    return cfg.formation


def cmd_linearize(args) -> int:
    cfg = _load_config(args)
    spec = _need_formation(cfg)
    speed = args.speed if args.speed is not None else min(a.speed for a in cfg.agents)
    lin = analysis.linearize(spec, speed)
    out = Output("linearize", cfg.config_hash)
    out.line(f"linearized error dynamics at speed {speed:g} m/s: de/dt = ({lin.scale:.6g}) * A e")
    out.line(np.array2string(lin.matrix, precision=6))
    out.line("eigenvalues (1/s): " + ", ".join(f"{v:.6g}" for v in lin.eigenvalues))
    if lin.slowest_rate > 0:
        out.line(f"slowest decay rate {lin.slowest_rate:.6g} 1/s, half-life {math.log(2) / lin.slowest_rate:.2f} s")
    out.row("linearize", "speed", speed)
    out.row("linearize", "scale", lin.scale)
    for k, v in enumerate(lin.eigenvalues, start=1):
        out.row("eigenvalue", str(k), v)
    out.row("linearize", "slowest_rate", lin.slowest_rate)
    out.emit(args.format, args.rows)
    return EXIT_OK


def cmd_confinement(args) -> int:
    cfg = _load_config(args)
    spec = _need_formation(cfg)
    radius = analysis.predicted_confinement(spec)
    out = Output("confinement", cfg.config_hash)
    out.line(f"confinement disc radius r + pi*k_r*max|N_i| = {spec.radius:g} + pi*{spec.k_r:g}*"
             f"{spec.graph.max_degree} = {radius:.4f} m")
    out.line(f"gain margin r - pi*k_r*max|N_i| = {spec.gain_margin:.4f} m")
    out.row("confinement", "predicted", radius)
    out.row("confinement", "gain_margin", spec.gain_margin)
    if args.trace:
        trace = io.load_trace(Path(args.trace))
        dmax = float(np.nanmax(trace.distance()))
        out.line(f"trace max distance {dmax:.4f} m, overshoot {max(0.0, dmax - radius):.4f} m")
        out.row("confinement", "max_distance", dmax)
        out.row("confinement", "overshoot", max(0.0, dmax - radius))
    out.emit(args.format, args.rows)
    return EXIT_OK


def cmd_metrics(args) -> int:
    trace = io.load_trace(Path(args.trace))
    window = tuple(float(v) for v in args.window.split(",")) if args.window else None
    rep = analysis.fit_decay(trace, window=window, source=args.source)
    out = Output("metrics", trace.meta["config_hash"])
    out.line(f"trace {args.trace}: t=[{trace.t[0]:g}, {trace.t[-1]:g}] s, {trace.n_agents} agents")
    if rep.window:
        out.line(f"fit window [{rep.window[0]:.2f}, {rep.window[1]:.2f}] s, source {args.source}")
    _report_text(out, rep)
    _report_rows(out, rep)
    out.emit(args.format, args.rows)
    return EXIT_OK


def delivery_gaps(trace, min_gap: float) -> list[tuple[int, int, float, float]]:
    """Intervals longer than ``min_gap`` with no delivery on a directed link."""
    by_link: dict[tuple[int, int], list[float]] = {}
    for m in trace.messages:
        by_link.setdefault((m.sender, m.receiver), [])
        if m.delivered:
            by_link[(m.sender, m.receiver)].append(m.t_deliver)
    gaps = []
    t0, t1 = float(trace.t[0]), float(trace.t[-1])
    for (s, r), times in sorted(by_link.items()):
        marks = [t0] + sorted(times) + [t1]
        for a, b in zip(marks[:-1], marks[1:]):
            if b - a > min_gap:
                gaps.append((s, r, a, b))
    return gaps


def cmd_plotdata(args) -> int:
    trace = io.load_trace(Path(args.trace))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    every = max(1, args.every)
    idx = np.arange(0, len(trace.t), every)
    h = trace.meta["config_hash"]
    stamp = io.stamp(h)
    band = math.degrees(trace.meta.get("band", math.radians(10.0)))
    with open(out_dir / "errors.csv", "w") as fh:
        fh.write(stamp + "\nt,edge,agent,e_theta,band_low,band_high\n")
        for k, (tail, head) in enumerate(trace.edges):
            for agent in (tail, head):
                for i in idx:
                    fh.write(f"{_fmt(trace.t[i])},{k + 1},{agent},{_fmt(math.degrees(trace.e_theta[i, agent - 1, k]))},"
                             f"{-band},{band}\n")
    with open(out_dir / "xy.csv", "w") as fh:
        fh.write(stamp + "\nt,agent,x,y\n")
        for a in range(trace.n_agents):
            for i in idx:
                fh.write(f"{_fmt(trace.t[i])},{a + 1},{_fmt(trace.x[i, a])},{_fmt(trace.y[i, a])}\n")
    cx, cy = trace.meta.get("center", (0.0, 0.0))
    with open(out_dir / "circles.csv", "w") as fh:
        fh.write(stamp + "\ncurve,x,y\n")
        ang = np.linspace(0.0, 2.0 * np.pi, 361)
        if math.isfinite(trace.radius):
            for name, rad in (("target", trace.radius), ("confinement", trace.radius + trace.max_offset)):
                for a in ang:
                    fh.write(f"{name},{_fmt(cx + rad * math.cos(a))},{_fmt(cy + rad * math.sin(a))}\n")
    period = float(np.median(np.diff(sorted({m.t_send for m in trace.messages})))) if len(trace.messages) > 2 else 0.0
    gaps = delivery_gaps(trace, 2.0 * period) if period else []
    with open(out_dir / "gaps.csv", "w") as fh:
        fh.write(stamp + "\nsender,receiver,gap_start,gap_end\n")
        for s, r, a, b in gaps:
            fh.write(f"{s},{r},{_fmt(a)},{_fmt(b)}\n")
    out = Output("plotdata", h)
    out.line(f"wrote errors.csv, xy.csv, circles.csv, gaps.csv to {out_dir} ({len(idx)} samples per series)")
    out.row("plotdata", "samples", len(idx))
    out.row("plotdata", "delivery_gaps", len(gaps))
    out.emit(args.format, args.rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="circform", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario and write its traces")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=("python", "cython"), default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run a parameter grid over seeds")
    _add_common(p)
    p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2,...")
    p.add_argument("--seeds", default=None, help="'a:b' range or comma list")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="per-run table CSV")
    p.add_argument("--backend", choices=("python", "cython"), default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("graph-check", help="incidence/consensus matrices and Hurwitz check")
    p.add_argument("--config", default=None)
    p.add_argument("--set", dest="overrides", action="append", default=[])
    p.add_argument("--vertices", type=int, default=None)
    p.add_argument("--edges", default=None, help="e.g. 1-2,2-3")
    p.add_argument("--tolerance", type=float, default=1e-9)
    _add_common(p, config=False)
    p.set_defaults(func=cmd_graph_check)

    p = sub.add_parser("linearize", help="eigenvalues of the linearized formation error dynamics")
    _add_common(p)
    p.add_argument("--speed", type=float, default=None)
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("confinement", help="predicted confinement disc (and a trace's measured extent)")
    _add_common(p)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_confinement)

    p = sub.add_parser("metrics", help="settling, decay fit and confinement metrics of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--window", default=None, help="t0,t1")
    p.add_argument("--source", choices=("true", "local"), default="true")
    _add_common(p, config=False)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("plotdata", help="downsampled CSV series for plotting")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--every", type=int, default=10)
    _add_common(p, config=False)
    p.set_defaults(func=cmd_plotdata)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except config_mod.ConfigError as exc:
        print("validation failed:", file=sys.stderr)
        for err in exc.errors:
            print(f"  {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except io.TraceFileError as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DegenerateGeometryError as exc:
        print(f"runtime degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
