"""Pure-Python closed-loop guidance kernel.

Mirrors ``_ckernel.pyx`` operation for operation so both backends agree to
rounding. Curves are the quadric family ``alpha*x**2 + beta*y**2 - gamma``
in center-relative coordinates (circle: 1, 1, r**2; ellipse: 1/a**2,
1/b**2, 1).

Status codes: 0 ok, 1 degenerate point (zero gradient), 2 zero field
(previous yaw rate held).
"""

from math import atan2, ceil, cos, floor, pi, sin, sqrt

TWO_PI = 2.0 * pi
# RK4 stays accurate (|R(z) - exp(z)| < 1e-2) for |z| <= 0.8
STIFF_Z = 0.8
MAX_SUBSTEPS = 20000
ZERO_FIELD_RTOL = 1e-12

BACKEND = "python"


def wrap(x):
    w = x - TWO_PI * floor(x / TWO_PI + 0.5)
    if w <= -pi:
        w += TWO_PI
    elif w > pi:
        w -= TWO_PI
    return w


def field(alpha, beta, gamma, c, ke, kd, speed, x, y, psi):
    """Yaw-rate command at one state.

    Returns ``(u_psi, e, pdx, pdy, feed_forward, align, status)``.
    """
    nx = 2.0 * alpha * x
    ny = 2.0 * beta * y
    nn = sqrt(nx * nx + ny * ny)
    e = alpha * x * x + beta * y * y - gamma - c
    if nn == 0.0:
        return 0.0, e, 0.0, 0.0, 0.0, 0.0, 1
    kee = ke * e
    pdx = ny - kee * nx
    pdy = -nx - kee * ny
    pd2 = pdx * pdx + pdy * pdy
    tol = ZERO_FIELD_RTOL * nn
    if pd2 <= tol * tol:
        return 0.0, e, pdx, pdy, 0.0, 0.0, 2
    cp = cos(psi)
    sp = sin(psi)
    vx = speed * cp
    vy = speed * sp
    hx = 2.0 * alpha * vx
    hy = 2.0 * beta * vy
    ndot = nx * vx + ny * vy
    ax = hy - kee * hx - ke * ndot * nx
    ay = -hx - kee * hy - ke * ndot * ny
    ff = (pdx * ay - pdy * ax) / pd2
    align = speed * kd * (cp * pdy - sp * pdx) / sqrt(pd2)
    return ff + align, e, pdx, pdy, ff, align, 0


def substeps(alpha, beta, ke, kd, speed, x, y, dt):
    nx = 2.0 * alpha * x
    ny = 2.0 * beta * y
    rate = speed * max(ke * sqrt(nx * nx + ny * ny), kd)
    n = int(ceil(dt * rate / STIFF_Z))
    if n < 1:
        return 1
    if n > MAX_SUBSTEPS:
        return MAX_SUBSTEPS
    return n


def _rate(alpha, beta, gamma, c, ke, kd, speed, x, y, psi, u_hold):
    r = field(alpha, beta, gamma, c, ke, kd, speed, x, y, psi)
    status = r[6]
    if status == 2:
        return u_hold, 2
    return r[0], status


def advance(alpha, beta, gamma, c, ke, kd, speed, wx, wy, x, y, psi, dt, u_hold):
    """Integrate one closed-loop step of length ``dt`` with RK4 substeps.

    The yaw-rate law is re-evaluated at every stage. Returns
    ``(x, y, psi, u0, e0, nsub, status)`` where ``u0``/``e0`` are the command
    and level error at the initial state and ``status`` is the worst status
    met (1 aborts immediately with the state where it happened).
    """
    u0, e0, _, _, _, _, st0 = field(alpha, beta, gamma, c, ke, kd, speed, x, y, psi)
    if st0 == 1:
        return x, y, psi, 0.0, e0, 0, 1
    if st0 == 2:
        u0 = u_hold
    worst = st0
    n = substeps(alpha, beta, ke, kd, speed, x, y, dt)
    h = dt / n
    hh = 0.5 * h
    for _ in range(n):
        k1p, st = _rate(alpha, beta, gamma, c, ke, kd, speed, x, y, psi, u_hold)
        if st == 1:
            return x, y, psi, u0, e0, n, 1
        worst = max(worst, st)
        k1x = speed * cos(psi) + wx
        k1y = speed * sin(psi) + wy

        x2 = x + hh * k1x
        y2 = y + hh * k1y
        p2 = psi + hh * k1p
        k2p, st = _rate(alpha, beta, gamma, c, ke, kd, speed, x2, y2, p2, u_hold)
        if st == 1:
            return x2, y2, p2, u0, e0, n, 1
        worst = max(worst, st)
        k2x = speed * cos(p2) + wx
        k2y = speed * sin(p2) + wy

        x3 = x + hh * k2x
        y3 = y + hh * k2y
        p3 = psi + hh * k2p
        k3p, st = _rate(alpha, beta, gamma, c, ke, kd, speed, x3, y3, p3, u_hold)
        if st == 1:
            return x3, y3, p3, u0, e0, n, 1
        worst = max(worst, st)
        k3x = speed * cos(p3) + wx
        k3y = speed * sin(p3) + wy

        x4 = x + h * k3x
        y4 = y + h * k3y
        p4 = psi + h * k3p
        k4p, st = _rate(alpha, beta, gamma, c, ke, kd, speed, x4, y4, p4, u_hold)
        if st == 1:
            return x4, y4, p4, u0, e0, n, 1
        worst = max(worst, st)
        k4x = speed * cos(p4) + wx
        k4y = speed * sin(p4) + wy

        x = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        psi = psi + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return x, y, wrap(psi), u0, e0, n, worst


def unicycle_rk4(x, y, psi, speed, u_psi, dt):
    """One RK4 step of the open-loop unicycle with a held yaw rate."""
    hh = 0.5 * dt
    k1x = speed * cos(psi)
    k1y = speed * sin(psi)
    p2 = psi + hh * u_psi
    k2x = speed * cos(p2)
    k2y = speed * sin(p2)
    # k3 heading equals k2 heading under a held yaw rate
    k3x = k2x
    k3y = k2y
    p4 = psi + dt * u_psi
    k4x = speed * cos(p4)
    k4y = speed * sin(p4)
    x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    y = y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return x, y, wrap(psi + dt * u_psi)


def phase(x, y):
    """Travel-aligned phase: the field circulates clockwise."""
    return wrap(-atan2(y, x))
