"""Fixed-step multi-agent simulation.

Per step ``k`` at ``t_k = start + k*dt``:

1. on broadcast ticks, every agent broadcasts its position;
2. due messages are handed to receivers;
3. on broadcast ticks, controllers recompute ``u_r`` and the level ``c``;
4. the state is recorded and each agent is advanced by one closed-loop RK4
   step (with stiffness-driven substeps) toward its current level set.

The loop is single-threaded and the only randomness comes from the seeded
network, so identical configs give bit-identical traces.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from types import ModuleType

import numpy as np

from ._kernels import kernel as default_kernel
from .config import ScenarioConfig
from .formation import AgentController, NeighborSnapshot
from .guidance import bank_angle
from .network import Message, Network

log = logging.getLogger(__name__)


class DegenerateGeometryError(RuntimeError):
    """An agent reached a point where the guidance field is undefined."""

    def __init__(self, t: float, agent: int, detail: str) -> None:
        self.t = t
        self.agent = agent
        super().__init__(f"t={t:.3f}s agent {agent}: {detail}")


@dataclass
class AgentState:
    position: tuple[float, float]
    psi: float
    speed: float
    level: float = 0.0


def step_unicycle(state: AgentState, u_psi: float, dt: float, kernel: ModuleType | None = None) -> AgentState:
    """Advance the open-loop unicycle one RK4 step with a held yaw rate."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    k = kernel or default_kernel
    x, y, psi = k.unicycle_rk4(state.position[0], state.position[1], state.psi, state.speed, u_psi, dt)
    return AgentState((x, y), psi, state.speed, state.level)


@dataclass
class SimTrace:
    """Time-indexed record of a run. Arrays are ``(steps + 1, agents[, edges])``."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    e: np.ndarray
    theta: np.ndarray
    u_r: np.ndarray
    c: np.ndarray
    u_psi: np.ndarray
    bank: np.ndarray
    e_theta: np.ndarray
    stale: np.ndarray
    edges: tuple[tuple[int, int], ...]
    z_star: tuple[float, ...]
    radius: float
    max_offset: float
    messages: list[Message] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_agents(self) -> int:
        return self.x.shape[1]

    def distance(self) -> np.ndarray:
        """Distance of every agent from the path center."""
        cx, cy = self.meta.get("center", (0.0, 0.0))
        return np.hypot(self.x - cx, self.y - cy)

    def true_edge_errors(self) -> np.ndarray:
        """``wrap(theta_tail - theta_head - z*)`` from the recorded phases."""
        out = np.empty((len(self.t), len(self.edges)))
        for k, (tail, head) in enumerate(self.edges):
            d = self.theta[:, tail - 1] - self.theta[:, head - 1] - self.z_star[k]
            out[:, k] = wrap_array(d)
        return out


def wrap_array(a: np.ndarray) -> np.ndarray:
    w = a - 2.0 * np.pi * np.floor(a / (2.0 * np.pi) + 0.5)
    w = np.where(w <= -np.pi, w + 2.0 * np.pi, w)
    return np.where(w > np.pi, w - 2.0 * np.pi, w)


def run_scenario(config: ScenarioConfig, kernel: ModuleType | None = None) -> SimTrace:
    k = kernel or default_kernel
    n = len(config.agents)
    m = config.graph.edge_count
    steps = config.steps
    every = config.ticks_every
    dt = config.dt
    path = config.path
    alpha, beta, gamma = path.coefficients
    cx, cy = path.center
    k_e, k_d = config.gains.k_e, config.gains.k_d
    wx, wy = config.wind

    shape = (steps + 1, n)
    t = config.start_time + dt * np.arange(steps + 1)
    rec = {name: np.zeros(shape) for name in ("x", "y", "psi", "e", "theta", "u_r", "c", "u_psi", "bank")}
    e_theta = np.full((steps + 1, n, m), np.nan)
    stale = np.zeros((steps + 1, n, m), dtype=bool)

    controllers: list[AgentController | None] = []
    levels = []
    for i, a in enumerate(config.agents, start=1):
        if config.formation is not None:
            ctl = AgentController(i, config.formation, path)
            if a.initial_errors:
                ctl.preload(a.initial_errors)
            controllers.append(ctl)
            levels.append(ctl.level)
        else:
            controllers.append(None)
            levels.append(a.level)

    network = Network(config.network, config.graph)
    xs = [a.x - cx for a in config.agents]
    ys = [a.y - cy for a in config.agents]
    psis = [a.psi for a in config.agents]
    speeds = [a.speed for a in config.agents]
    u_hold = [0.0] * n
    holds: list[tuple[float, int]] = []
    max_substeps = 0

    for step in range(steps + 1):
        now = float(t[step])
        tick = step % every == 0
        if m and tick:
            network.tick(now, {i + 1: (xs[i] + cx, ys[i] + cy) for i in range(n)})
        if m:
            for msg in network.due(now):
                ctl = controllers[msg.receiver - 1]
                if ctl is not None:
                    ctl.receive(NeighborSnapshot(msg.sender, msg.position, msg.t_send))
        for i in range(n):
            ctl = controllers[i]
            if ctl is not None:
                if tick:
                    try:
                        ctl.update(now, (xs[i] + cx, ys[i] + cy))
                    except ValueError as exc:
                        raise DegenerateGeometryError(now, i + 1, str(exc)) from exc
                levels[i] = ctl.level
                rec["u_r"][step, i] = ctl.u_r
                for e_idx in ctl.edges:
                    e_theta[step, i, e_idx] = ctl.errors[e_idx]
                    stale[step, i, e_idx] = ctl.stale[e_idx]
            rec["c"][step, i] = levels[i]

            x0, y0, p0 = xs[i], ys[i], psis[i]
            if step < steps:
                x1, y1, p1, u0, e0, nsub, status = k.advance(
                    alpha, beta, gamma, levels[i], k_e, k_d, speeds[i], wx, wy, x0, y0, p0, dt, u_hold[i]
                )
                max_substeps = max(max_substeps, nsub)
            else:
                u0, e0, _, _, _, _, status = k.field(alpha, beta, gamma, levels[i], k_e, k_d, speeds[i], x0, y0, p0)
                if status == 2:
                    u0 = u_hold[i]
            if status == 1:
                raise DegenerateGeometryError(now, i + 1, "reached the path center, guidance field undefined")
            if status == 2:
                holds.append((now, i + 1))
                log.warning("t=%.3f agent %d: zero guidance field, holding previous yaw rate", now, i + 1)
            rec["x"][step, i] = x0 + cx
            rec["y"][step, i] = y0 + cy
            rec["psi"][step, i] = p0
            rec["e"][step, i] = e0
            rec["theta"][step, i] = k.phase(x0, y0) if (x0 or y0) else math.nan
            rec["u_psi"][step, i] = u0
            rec["bank"][step, i] = bank_angle(u0, speeds[i], config.gravity, config.bank_limit)
            u_hold[i] = u0
            if step < steps:
                xs[i], ys[i], psis[i] = x1, y1, p1

    z_star = config.formation.z_star if config.formation is not None else (0.0,) * m
    max_offset = config.formation.max_offset if config.formation is not None else 0.0
    radius = getattr(path, "radius", float("nan"))
    meta = {
        "name": config.name,
        "config_hash": config.config_hash,
        "backend": k.BACKEND,
        "center": (cx, cy),
        "dt": dt,
        "speeds": speeds,
        "zero_field_holds": holds,
        "max_substeps": max_substeps,
        "connected": config.connected,
        "band": config.band,
        "dwell": config.dwell,
        "transient": config.transient,
        "linearity": config.linearity,
        "k_r": config.formation.k_r if config.formation is not None else 0.0,
    }
    return SimTrace(
        t=t, e_theta=e_theta, stale=stale, edges=config.graph.edges, z_star=tuple(z_star),
        radius=radius, max_offset=max_offset, messages=network.log, meta=meta, **rec,
    )
