"""Implicit planar curves and their level sets.

Every curve here is a centered quadric ``phi(p) = alpha*x**2 + beta*y**2 -
gamma`` with ``(x, y) = p - center``, so the gradient is ``(2*alpha*x,
2*beta*y)`` and the Hessian is constant. An agent assigned to level ``c``
tracks ``{p : phi(p) = c}``; the tracking error is ``phi(p) - c``.

The tangent ``tau = E n`` with ``E = [[0, 1], [-1, 0]]`` circulates
clockwise around the center. :func:`phase` measures the angle in that
direction of travel so that it increases along the motion; :func:`parametrize`
is the raw ``atan2`` angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

from ._kernels import kernel

E = np.array([[0.0, 1.0], [-1.0, 0.0]])
# sign relating the travel-aligned phase to atan2
CIRCULATION = -1


class DegeneratePointError(ValueError):
    """The gradient vanishes (the query point is the curve's center)."""


class EmptyLevelSetError(ValueError):
    pass


@dataclass(frozen=True)
class ImplicitPath:
    center: tuple[float, float] = (0.0, 0.0)

    kind = "abstract"

    @property
    def coefficients(self) -> tuple[float, float, float]:
        """``(alpha, beta, gamma)`` of the quadric."""
        raise NotImplementedError

    def relative(self, p: ArrayLike) -> NDArray[np.float64]:
        q = np.asarray(p, dtype=float)
        return q - np.asarray(self.center, dtype=float)

    def phi(self, p: ArrayLike) -> float:
        alpha, beta, gamma = self.coefficients
        x, y = self.relative(p)
        return alpha * x * x + beta * y * y - gamma

    def gradient(self, p: ArrayLike) -> NDArray[np.float64]:
        alpha, beta, _ = self.coefficients
        x, y = self.relative(p)
        return np.array([2.0 * alpha * x, 2.0 * beta * y])

    def hessian(self) -> NDArray[np.float64]:
        alpha, beta, _ = self.coefficients
        return np.diag([2.0 * alpha, 2.0 * beta])

    def min_level(self) -> float:
        """Smallest level with a nonempty level set (the center point)."""
        return -self.coefficients[2]

    def scale_for_level(self, c: float) -> float:
        """Linear size of level ``c`` relative to the zero level."""
        gamma = self.coefficients[2]
        if c < -gamma:
            raise EmptyLevelSetError(f"level {c} is below the minimum {-gamma}")
        return math.sqrt((gamma + c) / gamma)


@dataclass(frozen=True)
class Circle(ImplicitPath):
    radius: float = 1.0

    kind = "circle"

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError(f"circle radius must be positive, got {self.radius}")

    @property
    def coefficients(self) -> tuple[float, float, float]:
        return 1.0, 1.0, self.radius * self.radius


@dataclass(frozen=True)
class Ellipse(ImplicitPath):
    """Ellipse with semi-axes ``a`` (x) and ``b`` (y); levels are dimensionless."""

    a: float = 1.0
    b: float = 1.0

    kind = "ellipse"

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"ellipse semi-axes must be positive, got {self.a}, {self.b}")

    @property
    def coefficients(self) -> tuple[float, float, float]:
        return 1.0 / (self.a * self.a), 1.0 / (self.b * self.b), 1.0


@dataclass(frozen=True)
class PathFrame:
    level: float
    normal: NDArray[np.float64]
    tangent: NDArray[np.float64]
    hessian: NDArray[np.float64]


def level(path: ImplicitPath, p: ArrayLike, c: float = 0.0) -> float:
    """Tracking error ``phi(p) - c`` for an agent assigned to level ``c``."""
    return path.phi(p) - c


def frame(path: ImplicitPath, p: ArrayLike, c: float = 0.0) -> PathFrame:
    n = path.gradient(p)
    if not np.any(n):
        raise DegeneratePointError(f"gradient vanishes at {tuple(np.asarray(p, float))}")
    return PathFrame(level(path, p, c), n, E @ n, path.hessian())


def parametrize(path: ImplicitPath, p: ArrayLike) -> float:
    """Raw ``atan2`` angle of the center-relative position, in (-pi, pi]."""
    x, y = path.relative(p)
    if x == 0.0 and y == 0.0:
        raise DegeneratePointError("cannot parametrize the center")
    theta = math.atan2(y, x)
    return math.pi if theta == -math.pi else theta


def phase(path: ImplicitPath, p: ArrayLike) -> float:
    """Angle along the direction of travel, in (-pi, pi]."""
    x, y = path.relative(p)
    if x == 0.0 and y == 0.0:
        raise DegeneratePointError("cannot parametrize the center")
    return kernel.phase(float(x), float(y))


def level_for_radius_offset(r: float, u_r: float) -> float:
    """Level whose circle has radius ``r + u_r``."""
    if not r + u_r > 0:
        raise ValueError(f"radius offset {u_r} makes the radius {r + u_r} non-positive")
    return u_r * u_r + 2.0 * r * u_r


def radius_for_level(r: float, c: float) -> float:
    if r * r + c < 0:
        raise EmptyLevelSetError(f"level {c} is empty for radius {r}")
    return math.sqrt(r * r + c)


def _ellipse_arc(a: float, b: float) -> float:
    def speed(t: float) -> float:
        return math.hypot(a * math.sin(t), b * math.cos(t))

    # quarter arc times four; integrand is smooth on [0, pi/2]
    value, _ = integrate.quad(speed, 0.0, 0.5 * math.pi, epsabs=1e-12, epsrel=1e-12, limit=200)
    return 4.0 * value


def perimeter(path: ImplicitPath, c: float = 0.0) -> float:
    """Arc length of the level set ``phi = c``."""
    if isinstance(path, Circle):
        return 2.0 * math.pi * radius_for_level(path.radius, c)
    if isinstance(path, Ellipse):
        s = path.scale_for_level(c)
        return _ellipse_arc(path.a * s, path.b * s)
    raise TypeError(f"unsupported path {type(path).__name__}")


def make_path(kind: str, center=(0.0, 0.0), radius=None, semi_axes=None) -> ImplicitPath:
    center = (float(center[0]), float(center[1]))
    if kind == "circle":
        if radius is None:
            raise ValueError("circle geometry needs a radius")
        return Circle(center=center, radius=float(radius))
    if kind == "ellipse":
        if semi_axes is None:
            raise ValueError("ellipse geometry needs semi_axes [a, b]")
        a, b = semi_axes
        return Ellipse(center=center, a=float(a), b=float(b))
    raise ValueError(f"unknown path kind {kind!r}")
