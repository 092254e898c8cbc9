"""Guidance vector field tracking for constant-speed unicycles.

The desired velocity is ``pd = tau - k_e * e * n``. The yaw-rate command
has two parts:

* a feed-forward term, the rate at which the heading of ``pd`` turns as the
  vehicle moves with velocity ``v``: ``pd^T E (d pd/dt) / |pd|^2`` with
  ``d pd/dt = (E - k_e e I) H v - k_e (n^T v) n``;
* an alignment term ``k_d * v_hat^T E pd_hat`` that rotates the heading
  onto the field.

Both are scaled by speed, so a run at speed ``s`` retraces the unit-speed
trajectory ``s`` times faster. This module is the readable reference; the
simulator calls the scalar twin in ``circform._kernels``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .paths import E, DegeneratePointError, ImplicitPath, frame

STANDARD_GRAVITY = 9.80665
DEFAULT_BANK_LIMIT = math.radians(45.0)


class ZeroFieldError(ValueError):
    """Tangent and correction terms cancel, so the field has no direction."""


@dataclass(frozen=True)
class GuidanceGains:
    k_e: float = 1.0
    k_d: float = 1.0

    def __post_init__(self) -> None:
        if not (self.k_e > 0 and self.k_d > 0):
            raise ValueError(f"guidance gains must be positive, got k_e={self.k_e}, k_d={self.k_d}")


@dataclass(frozen=True)
class GuidanceOutput:
    u_psi: float
    bank: float
    desired_heading: NDArray[np.float64]


def heading_vector(psi: float) -> NDArray[np.float64]:
    return np.array([math.cos(psi), math.sin(psi)])


def desired_velocity(path: ImplicitPath, p: ArrayLike, k_e: float, c: float = 0.0) -> NDArray[np.float64]:
    f = frame(path, p, c)
    pd = f.tangent - k_e * f.level * f.normal
    if np.hypot(*pd) <= 1e-12 * np.hypot(*f.normal):
        raise ZeroFieldError(f"guidance field vanishes at {tuple(np.asarray(p, float))}")
    return pd


def steering_terms(
    path: ImplicitPath,
    p: ArrayLike,
    psi: float,
    speed: float,
    gains: GuidanceGains,
    c: float = 0.0,
) -> tuple[float, float]:
    """Return ``(feed_forward, alignment)`` yaw-rate contributions in rad/s."""
    if not speed > 0:
        raise ValueError("speed must be positive")
    f = frame(path, p, c)
    pd = desired_velocity(path, p, gains.k_e, c)
    v = speed * heading_vector(psi)
    pd_dot = (E - gains.k_e * f.level * np.eye(2)) @ f.hessian @ v - gains.k_e * (f.normal @ v) * f.normal
    feed_forward = float(pd @ E @ pd_dot) / float(pd @ pd)
    pd_hat = pd / np.linalg.norm(pd)
    alignment = speed * gains.k_d * float(heading_vector(psi) @ E @ pd_hat)
    return feed_forward, alignment


def steering(path: ImplicitPath, p: ArrayLike, psi: float, speed: float, gains: GuidanceGains, c: float = 0.0) -> float:
    """Commanded yaw rate for a vehicle at ``p`` with yaw ``psi``."""
    ff, align = steering_terms(path, p, psi, speed, gains, c)
    return ff + align


def bank_angle(
    u_psi: float,
    speed: float,
    gravity: float = STANDARD_GRAVITY,
    bank_limit: float = DEFAULT_BANK_LIMIT,
) -> float:
    """Coordinated-turn bank angle for yaw rate ``u_psi``, saturated at ``bank_limit``."""
    if not speed > 0:
        raise ValueError("speed must be positive")
    bank = math.atan(speed * u_psi / gravity)
    return max(-bank_limit, min(bank_limit, bank))


def guidance(
    path: ImplicitPath,
    p: ArrayLike,
    psi: float,
    speed: float,
    gains: GuidanceGains,
    c: float = 0.0,
    gravity: float = STANDARD_GRAVITY,
    bank_limit: float = DEFAULT_BANK_LIMIT,
) -> GuidanceOutput:
    u = steering(path, p, psi, speed, gains, c)
    pd = desired_velocity(path, p, gains.k_e, c)
    return GuidanceOutput(u, bank_angle(u, speed, gravity, bank_limit), pd / np.linalg.norm(pd))


__all__ = [
    "DEFAULT_BANK_LIMIT",
    "DegeneratePointError",
    "GuidanceGains",
    "GuidanceOutput",
    "STANDARD_GRAVITY",
    "ZeroFieldError",
    "bank_angle",
    "desired_velocity",
    "guidance",
    "heading_vector",
    "steering",
    "steering_terms",
]
