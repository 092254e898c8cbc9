"""Distributed radius-offset formation controller.

Each agent shifts the circle it tracks from radius ``r`` to ``r + u_r`` with
``u_r = k_r * B_i . e_theta``, where ``e_theta`` holds the wrapped
inter-vehicle angle errors of the agent's incident edges. Because every
error component lives in (-pi, pi], ``|u_r| <= pi * k_r * deg(i)``; the
gain condition keeps every commanded radius positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike

from ._kernels import kernel
from .graph import FormationGraph, GraphError, incidence_matrix, is_acyclic
from .paths import Circle, level_for_radius_offset, phase


class GainConditionError(ValueError):
    """``r - pi * k_r * max_degree`` is not strictly positive."""

    def __init__(self, radius: float, k_r: float, max_degree: int) -> None:
        self.margin = radius - math.pi * k_r * max_degree
        super().__init__(
            f"gain condition violated: r - pi*k_r*max|N_i| = {radius:g} - pi*{k_r:g}*{max_degree} "
            f"= {self.margin:.6g} <= 0"
        )


def wrap_angle(x: float) -> float:
    """Wrap to (-pi, pi]; an exact tie at -pi maps to +pi."""
    return kernel.wrap(float(x))


def inter_vehicle_angle(theta_tail: float, theta_head: float) -> float:
    return wrap_angle(theta_tail - theta_head)


@dataclass(frozen=True)
class FormationSpec:
    """Graph, desired inter-vehicle angles (rad), consensus gain and target radius."""

    graph: FormationGraph
    z_star: tuple[float, ...]
    k_r: float
    radius: float

    def __post_init__(self) -> None:
        z = tuple(wrap_angle(v) for v in self.z_star)
        if len(z) != self.graph.edge_count:
            raise ValueError(f"z_star has {len(z)} entries for {self.graph.edge_count} edges")
        if self.k_r < 0:
            raise ValueError("k_r must be non-negative")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not is_acyclic(self.graph):
            raise GraphError("formation graph contains a cycle; the consensus matrix is not Hurwitz")
        object.__setattr__(self, "z_star", z)

    @property
    def gain_margin(self) -> float:
        return self.radius - math.pi * self.k_r * self.graph.max_degree

    @property
    def max_offset(self) -> float:
        """Largest radius offset any agent can command."""
        return math.pi * self.k_r * self.graph.max_degree


def validate_gains(spec: FormationSpec) -> float:
    """Return the margin ``r - pi*k_r*max|N_i|``; raise if it is not positive."""
    margin = spec.gain_margin
    if not margin > 0:
        raise GainConditionError(spec.radius, spec.k_r, spec.graph.max_degree)
    return margin


@dataclass(frozen=True)
class NeighborSnapshot:
    neighbor: int
    position: tuple[float, float]
    time: float


def snapshot_from_relative(
    neighbor: int, own_position: ArrayLike, offset: ArrayLike, time: float
) -> NeighborSnapshot:
    """Snapshot built from a sensed neighbor offset instead of a broadcast position."""
    p = np.asarray(own_position, dtype=float) + np.asarray(offset, dtype=float)
    return NeighborSnapshot(neighbor, (float(p[0]), float(p[1])), time)


@dataclass
class LocalFormationError:
    """Per incident edge (0-based index): wrapped error, staleness, freshness."""

    errors: dict[int, float] = field(default_factory=dict)
    staleness: dict[int, float] = field(default_factory=dict)
    missing: set[int] = field(default_factory=set)

    def vector(self, edge_count: int) -> np.ndarray:
        v = np.zeros(edge_count)
        for k, e in self.errors.items():
            v[k] = e
        return v


def local_error(
    agent: int,
    snapshots: Mapping[int, NeighborSnapshot],
    spec: FormationSpec,
    own_position: ArrayLike,
    path: Circle,
    now: float = 0.0,
) -> LocalFormationError:
    """Edge errors seen by ``agent`` from its own position and neighbor snapshots.

    ``snapshots`` maps neighbor id to its last received position. Edges
    without a snapshot are left out of ``errors`` and listed in ``missing``.
    """
    out = LocalFormationError()
    theta_own = phase(path, own_position)
    for k in spec.graph.incident_edges(agent):
        tail, head = spec.graph.edges[k]
        other = head if tail == agent else tail
        snap = snapshots.get(other)
        if snap is None:
            out.missing.add(k)
            out.staleness[k] = math.inf
            continue
        theta_other = phase(path, snap.position)
        if tail == agent:
            z = inter_vehicle_angle(theta_own, theta_other)
        else:
            z = inter_vehicle_angle(theta_other, theta_own)
        out.errors[k] = wrap_angle(z - spec.z_star[k])
        out.staleness[k] = now - snap.time
    return out


def radius_control(agent: int, errors: Sequence[float] | np.ndarray, spec: FormationSpec) -> float:
    """``u_r = k_r * B_i . e`` over the full edge error vector."""
    row = incidence_matrix(spec.graph)[agent - 1]
    return spec.k_r * float(row @ np.asarray(errors, dtype=float))


def level_command(u_r: float, r: float) -> float:
    return level_for_radius_offset(r, u_r)


class AgentController:
    """Per-agent controller state machine.

    Holds the neighbor snapshots and the last computed error per incident
    edge. On :meth:`update`, an edge whose neighbor snapshot is newer than
    the one last used is recomputed; otherwise its error stays frozen (0 if
    nothing was ever received) and is reported stale.
    """

    def __init__(self, agent: int, spec: FormationSpec, path: Circle) -> None:
        self.agent = agent
        self.spec = spec
        self.path = path
        self.edges = spec.graph.incident_edges(agent)
        self.row = incidence_matrix(spec.graph)[agent - 1].astype(float)
        self.snapshots: dict[int, NeighborSnapshot] = {}
        self.errors = np.zeros(spec.graph.edge_count)
        self.stale = {k: True for k in self.edges}
        self.ever_received = {k: False for k in self.edges}
        self._used_time: dict[int, float] = {}
        self.u_r = 0.0
        self.level = 0.0

    def preload(self, errors: Mapping[int, float]) -> None:
        """Seed frozen edge errors (rad), as if they had been computed earlier."""
        for k, value in errors.items():
            if k in self.edges:
                self.errors[k] = wrap_angle(value)
        self._apply()

    def receive(self, snapshot: NeighborSnapshot) -> None:
        prev = self.snapshots.get(snapshot.neighbor)
        if prev is not None and snapshot.time < prev.time:
            return  # out-of-order delivery; keep the newer snapshot
        self.snapshots[snapshot.neighbor] = snapshot

    def _neighbor(self, k: int) -> int:
        tail, head = self.spec.graph.edges[k]
        return head if tail == self.agent else tail

    def update(self, now: float, own_position: ArrayLike) -> LocalFormationError:
        fresh = {}
        for k in self.edges:
            snap = self.snapshots.get(self._neighbor(k))
            if snap is not None and self._used_time.get(k) != snap.time:
                fresh[snap.neighbor] = snap
        local = local_error(self.agent, fresh, self.spec, own_position, self.path, now)
        for k in self.edges:
            if k in local.errors:
                self.errors[k] = local.errors[k]
                self._used_time[k] = fresh[self._neighbor(k)].time
                self.stale[k] = False
                self.ever_received[k] = True
            else:
                self.stale[k] = True
        self._apply()
        return local

    def _apply(self) -> None:
        self.u_r = self.spec.k_r * float(self.row @ self.errors)
        self.level = level_command(self.u_r, self.spec.radius)
