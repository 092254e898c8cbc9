"""Offline analysis: linearized formation dynamics, decay fits, settling, confinement.

Speed scaling: a vehicle of speed ``s`` riding the circle of radius
``r + u_r`` has phase rate ``s / (r + u_r)``. For edge ``k = (i, j)`` this
gives ``de_k/dt = s/(r + u_i) - s/(r + u_j)`` with ``u = k_r * B^T``-row
products, and linearizing at ``e = 0`` yields
``de/dt = (s * k_r / r**2) * A e`` with ``A = -B^T B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .formation import FormationSpec
from .graph import FormationGraph, consensus_matrix, is_acyclic
from .sim import SimTrace


class DecayFitError(ValueError):
    """The data do not support an exponential-decay fit."""


@dataclass(frozen=True)
class LinearizedFormation:
    matrix: np.ndarray
    eigenvalues: tuple[float, ...]
    scale: float

    @property
    def slowest_rate(self) -> float:
        """Decay rate (1/s) of the slowest mode; 0 when there is no convergence."""
        return -max(self.eigenvalues) if self.eigenvalues else 0.0


def linearize(spec: FormationSpec, speed: float = 1.0) -> LinearizedFormation:
    if not is_acyclic(spec.graph):
        raise ValueError("graph has a cycle; the linearized system is not Hurwitz")
    scale = speed * spec.k_r / spec.radius**2
    a = consensus_matrix(spec.graph)
    base = np.linalg.eigvalsh(a.astype(float)) if a.size else np.array([])
    return LinearizedFormation(scale * a, tuple(float(scale * v) for v in base), scale)


def predicted_confinement(spec: FormationSpec) -> float:
    """Radius of the disc that contains every commanded circle."""
    return spec.radius + math.pi * spec.k_r * spec.graph.max_degree


def tracking_overshoot(trace: SimTrace) -> float:
    """Largest distance any agent goes beyond its commanded circle ``r + u_r(t)``.

    Counted per agent from the first step it reaches that circle, so the
    initial approach from outside does not count.
    """
    excess = np.hypot(trace.x, trace.y) - (trace.radius + trace.u_r)
    worst = 0.0
    for col in excess.T:
        crossed = np.nonzero(col[1:] * col[:-1] <= 0.0)[0]
        if len(crossed):
            worst = max(worst, float(col[crossed[0] + 1:].max()))
    return worst


@dataclass(frozen=True)
class ExpFit:
    amplitude: float
    rate: float
    r2: float
    points: int


def fit_exponential(t: np.ndarray, y: np.ndarray, min_points: int = 8) -> ExpFit:
    """Least-squares fit of ``log|y| = log a - b t``; rejects non-decaying data."""
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    ok = np.isfinite(y) & (y > 0)
    t, y = t[ok], y[ok]
    if len(t) < min_points:
        raise DecayFitError(f"only {len(t)} usable samples (need {min_points})")
    if np.ptp(t) == 0:
        raise DecayFitError("window has zero duration")
    logs = np.log(y)
    slope, intercept = np.polyfit(t - t[0], logs, 1)
    pred = intercept + slope * (t - t[0])
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    if not slope < 0:
        raise DecayFitError(f"signal is not decaying (fitted rate {-slope:.3g} 1/s)")
    return ExpFit(float(math.exp(intercept + slope * (0 - t[0]))), float(-slope), r2, len(t))


def settling_time(t: np.ndarray, err: np.ndarray, band: float, dwell: float) -> float | None:
    """Earliest time after which ``|err| <= band`` holds for at least ``dwell`` seconds.

    ``err`` may be 2-D; a sample counts as inside only if every column is.
    NaN samples count as inside.
    """
    e = np.abs(np.asarray(err, dtype=float))
    inside = np.all(np.isnan(e) | (e <= band), axis=1) if e.ndim == 2 else (np.isnan(e) | (e <= band))
    start = None
    for i, flag in enumerate(inside):
        if flag:
            if start is None:
                start = i
            if t[i] - t[start] >= dwell - 1e-9:
                return float(t[start])
        else:
            start = None
    return None


def half_error_time(t: np.ndarray, err: np.ndarray) -> float | None:
    """Time from the first sample until ``max_k |err_k|`` first drops to half its initial value."""
    e = np.abs(np.asarray(err, dtype=float))
    if e.ndim == 2:
        e = np.nanmax(e, axis=1)
    target = 0.5 * e[0]
    hit = np.nonzero(e <= target)[0]
    return float(t[hit[0]] - t[0]) if len(hit) else None


def slow_fast_ratio(trace: SimTrace, transient: float, level_floor: float = 1.0) -> float:
    """Worst ratio of residual path error to the level step that caused it.

    For every level change after the transient, the path error just before
    the next change is compared with the size of the change. Level steps
    smaller than ``level_floor`` are ignored.
    """
    worst = 0.0
    t0 = trace.t[0] + transient
    for i in range(trace.n_agents):
        c = trace.c[:, i]
        changes = np.nonzero(np.diff(c))[0] + 1
        for prev, nxt in zip(changes[:-1], changes[1:]):
            if trace.t[prev] < t0:
                continue
            step = abs(c[prev] - c[prev - 1])
            if step < level_floor:
                continue
            worst = max(worst, abs(trace.e[nxt - 1, i]) / step)
    return worst


@dataclass
class ConvergenceReport:
    settling: dict[int, float | None]
    rates: dict[int, float | None]
    r2: dict[int, float | None]
    diagnostics: dict[int, str]
    window: tuple[float, float] | None
    max_distance: float
    predicted_confinement: float
    half_error_time: float | None
    band: float
    dwell: float
    extra: dict = field(default_factory=dict)

    @property
    def settled(self) -> bool:
        return bool(self.settling) and all(v is not None for v in self.settling.values())

    @property
    def overshoot(self) -> float:
        return max(0.0, self.max_distance - self.predicted_confinement)

    @property
    def slowest_rate(self) -> float | None:
        vals = [v for v in self.rates.values() if v is not None]
        return min(vals) if vals else None


def local_edge_errors(trace: SimTrace, edge: int) -> np.ndarray:
    """``(steps + 1, 2)`` errors for ``edge`` as computed by its tail and head agents."""
    tail, head = trace.edges[edge]
    return np.stack([trace.e_theta[:, tail - 1, edge], trace.e_theta[:, head - 1, edge]], axis=1)


def auto_window(t: np.ndarray, errors: np.ndarray, linearity: float, transient: float) -> tuple[float, float]:
    """From the later of ``start + transient`` and the last exit from the linear regime, to the end."""
    big = np.nonzero(np.nanmax(np.abs(errors), axis=1) > linearity)[0]
    first = min(big[-1] + 1, len(t) - 1) if len(big) else 0
    return float(max(t[first], t[0] + transient)), float(t[-1])


def fit_decay(
    trace: SimTrace,
    window: tuple[float, float] | None = None,
    source: str = "true",
    band: float | None = None,
    dwell: float | None = None,
    linearity: float | None = None,
    transient: float | None = None,
    path_gate: float | None = None,
    floor: float = 1e-7,
) -> ConvergenceReport:
    """Settling times, exponential decay rates and confinement for one trace.

    ``source="true"`` fits the errors rebuilt from recorded phases;
    ``"local"`` uses the tail agent's own estimate of each edge.
    """
    meta = trace.meta
    band = meta.get("band", math.radians(10.0)) if band is None else band
    dwell = meta.get("dwell", 60.0) if dwell is None else dwell
    linearity = meta.get("linearity", 0.3) if linearity is None else linearity
    transient = meta.get("transient", 20.0) if transient is None else transient
    if path_gate is None:
        path_gate = 0.01 * trace.radius**2 if math.isfinite(trace.radius) else 0.01
    m = len(trace.edges)
    true_err = trace.true_edge_errors()
    if source == "true":
        errors = true_err
    elif source == "local":
        errors = np.stack([trace.e_theta[:, trace.edges[k][0] - 1, k] for k in range(m)], axis=1) if m else true_err
    else:
        raise ValueError(f"unknown error source {source!r}")

    settling = {}
    for k in range(m):
        settling[k] = settling_time(trace.t, local_edge_errors(trace, k), band, dwell)

    rates: dict[int, float | None] = {}
    r2: dict[int, float | None] = {}
    diag: dict[int, str] = {}
    win = None
    if m:
        win = window or auto_window(trace.t, errors, linearity, transient)
        path_ok = np.nanmax(np.abs(trace.e), axis=1) <= path_gate
        sel = (trace.t >= win[0]) & (trace.t <= win[1]) & path_ok
        for k in range(m):
            ek = errors[sel, k]
            use = np.abs(ek) > floor
            try:
                fit = fit_exponential(trace.t[sel][use], ek[use])
            except DecayFitError as exc:
                rates[k], r2[k], diag[k] = None, None, str(exc)
            else:
                rates[k], r2[k] = fit.rate, fit.r2
    max_offset = trace.max_offset
    predicted = (trace.radius + max_offset) if math.isfinite(trace.radius) else float("nan")
    return ConvergenceReport(
        settling=settling,
        rates=rates,
        r2=r2,
        diagnostics=diag,
        window=win,
        max_distance=float(np.nanmax(trace.distance())),
        predicted_confinement=predicted,
        half_error_time=half_error_time(trace.t, true_err) if m else None,
        band=band,
        dwell=dwell,
    )


def summarize(trace: SimTrace, report: ConvergenceReport | None = None) -> dict:
    """Flat run summary for JSON output."""
    rep = report or fit_decay(trace)
    meta = trace.meta
    transient = meta.get("transient", 20.0)
    post = trace.t >= trace.t[0] + transient
    sent = len(trace.messages)
    delivered = sum(1 for msg in trace.messages if msg.delivered)
    out = {
        "name": meta.get("name"),
        "config_hash": meta.get("config_hash"),
        "backend": meta.get("backend"),
        "t_start": float(trace.t[0]),
        "t_end": float(trace.t[-1]),
        "settled": rep.settled,
        "settling_time": {str(k + 1): v for k, v in rep.settling.items()},
        "band_deg": math.degrees(rep.band),
        "dwell_s": rep.dwell,
        "half_error_time": rep.half_error_time,
        "fitted_rate": {str(k + 1): v for k, v in rep.rates.items()},
        "fit_r2": {str(k + 1): v for k, v in rep.r2.items()},
        "fit_diagnostics": {str(k + 1): v for k, v in rep.diagnostics.items()},
        "fit_window": list(rep.window) if rep.window else None,
        "max_distance": rep.max_distance,
        "predicted_confinement": rep.predicted_confinement,
        "confinement_overshoot": rep.overshoot,
        "tracking_overshoot": tracking_overshoot(trace),
        "max_path_error_post_transient": float(np.max(np.abs(trace.e[post]))) if post.any() else None,
        "messages_sent": sent,
        "messages_delivered": delivered,
        "zero_field_holds": len(meta.get("zero_field_holds", [])),
        "connected": meta.get("connected", True),
    }
    if trace.edges:
        ratio = float(slow_fast_ratio(trace, transient))
        out["slow_fast_ratio"] = ratio
        out["slow_fast_ok"] = bool(ratio <= 0.1)
        speeds = meta.get("speeds") or [1.0]
        k_r = meta.get("k_r", 0.0)
        if math.isfinite(trace.radius) and k_r > 0:
            a = consensus_matrix(FormationGraph(trace.n_agents, tuple(trace.edges))).astype(float)
            out["predicted_slowest_rate"] = float(
                -np.linalg.eigvalsh(a)[-1] * min(speeds) * k_r / trace.radius**2
            )
    return out

