"""Periodic broadcast of positions over the graph edges with seeded loss.

At every broadcast tick each edge carries two messages, tail->head then
head->tail, visited in edge order. One uniform draw decides each message's
fate, taken even when a blackout would drop it anyway, so changing the
blackout windows never shifts the draws of other messages.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import FormationGraph


@dataclass(frozen=True)
class NetworkModel:
    period: float = 0.5
    loss: float = 0.0
    delay: float = 0.0
    blackouts: tuple[tuple[float, float], ...] = ()
    seed: int = 0
    position_noise: float = 0.0

    def __post_init__(self) -> None:
        if not self.period > 0:
            raise ValueError("broadcast period must be positive")
        if not 0.0 <= self.loss <= 1.0:
            raise ValueError(f"loss probability must lie in [0, 1], got {self.loss}")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")
        if self.position_noise < 0:
            raise ValueError("position_noise must be non-negative")
        windows = tuple((float(a), float(b)) for a, b in self.blackouts)
        for a, b in windows:
            if b < a:
                raise ValueError(f"blackout window [{a}, {b}] ends before it starts")
        object.__setattr__(self, "blackouts", windows)

    def in_blackout(self, t: float) -> bool:
        return any(a <= t <= b for a, b in self.blackouts)


@dataclass
class Message:
    t_send: float
    sender: int
    receiver: int
    edge: int
    position: tuple[float, float]
    t_deliver: float
    delivered: bool
    reason: str = ""


@dataclass
class Network:
    """Stateful channel: draws outcomes at ticks and releases due messages."""

    model: NetworkModel
    graph: FormationGraph
    log: list[Message] = field(default_factory=list)

    def __post_init__(self) -> None:
        loss_seq, noise_seq = np.random.SeedSequence(self.model.seed).spawn(2)
        self._loss_rng = np.random.default_rng(loss_seq)
        self._noise_rng = np.random.default_rng(noise_seq)
        self._pending: list[Message] = []

    def tick(self, t: float, positions: dict[int, tuple[float, float]]) -> list[Message]:
        """Broadcast every agent's position at time ``t``; return the outcomes."""
        out = []
        m = self.model
        for k, (tail, head) in enumerate(self.graph.edges):
            for sender, receiver in ((tail, head), (head, tail)):
                draw = self._loss_rng.random()
                pos = positions[sender]
                if m.position_noise > 0:
                    nx, ny = self._noise_rng.normal(0.0, m.position_noise, size=2)
                    pos = (pos[0] + float(nx), pos[1] + float(ny))
                t_deliver = t + m.delay
                if m.in_blackout(t) or m.in_blackout(t_deliver):
                    ok, reason = False, "blackout"
                elif draw < m.loss:
                    ok, reason = False, "loss"
                else:
                    ok, reason = True, ""
                msg = Message(t, sender, receiver, k, pos, t_deliver, ok, reason)
                out.append(msg)
                if ok:
                    self._pending.append(msg)
        self.log.extend(out)
        return out

    def due(self, t: float, eps: float = 1e-9) -> list[Message]:
        """Pop delivered messages whose delivery time is at or before ``t``."""
        ready = [msg for msg in self._pending if msg.t_deliver <= t + eps]
        if ready:
            self._pending = [msg for msg in self._pending if msg.t_deliver > t + eps]
        return ready

