# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled closed-loop guidance kernel; see ``_pykernel`` for the contract."""

from libc.math cimport atan2, ceil, cos, floor, sin, sqrt, M_PI

cdef double TWO_PI = 2.0 * M_PI
cdef double STIFF_Z = 0.8
cdef int MAX_SUBSTEPS = 20000
cdef double ZERO_FIELD_RTOL = 1e-12

BACKEND = "cython"


cpdef double wrap(double x):
    cdef double w = x - TWO_PI * floor(x / TWO_PI + 0.5)
    if w <= -M_PI:
        w += TWO_PI
    elif w > M_PI:
        w -= TWO_PI
    return w


cdef inline int _field(double alpha, double beta, double gamma, double c,
                       double ke, double kd, double speed,
                       double x, double y, double psi,
                       double* u, double* e, double* pdx, double* pdy,
                       double* ff, double* align) nogil:
    cdef double nx = 2.0 * alpha * x
    cdef double ny = 2.0 * beta * y
    cdef double nn = sqrt(nx * nx + ny * ny)
    cdef double kee, pd2, tol, cp, sp, vx, vy, hx, hy, ndot, ax, ay
    e[0] = alpha * x * x + beta * y * y - gamma - c
    u[0] = 0.0
    ff[0] = 0.0
    align[0] = 0.0
    pdx[0] = 0.0
    pdy[0] = 0.0
    if nn == 0.0:
        return 1
    kee = ke * e[0]
    pdx[0] = ny - kee * nx
    pdy[0] = -nx - kee * ny
    pd2 = pdx[0] * pdx[0] + pdy[0] * pdy[0]
    tol = ZERO_FIELD_RTOL * nn
    if pd2 <= tol * tol:
        return 2
    cp = cos(psi)
    sp = sin(psi)
    vx = speed * cp
    vy = speed * sp
    hx = 2.0 * alpha * vx
    hy = 2.0 * beta * vy
    ndot = nx * vx + ny * vy
    ax = hy - kee * hx - ke * ndot * nx
    ay = -hx - kee * hy - ke * ndot * ny
    ff[0] = (pdx[0] * ay - pdy[0] * ax) / pd2
    align[0] = speed * kd * (cp * pdy[0] - sp * pdx[0]) / sqrt(pd2)
    u[0] = ff[0] + align[0]
    return 0


def field(double alpha, double beta, double gamma, double c, double ke,
          double kd, double speed, double x, double y, double psi):
    cdef double u, e, pdx, pdy, ff, align
    cdef int st = _field(alpha, beta, gamma, c, ke, kd, speed, x, y, psi,
                         &u, &e, &pdx, &pdy, &ff, &align)
    return u, e, pdx, pdy, ff, align, st


cdef inline int _substeps(double alpha, double beta, double ke, double kd,
                          double speed, double x, double y, double dt) nogil:
    cdef double nx = 2.0 * alpha * x
    cdef double ny = 2.0 * beta * y
    cdef double g = ke * sqrt(nx * nx + ny * ny)
    cdef double rate
    cdef double n
    if g > kd:
        rate = speed * g
    else:
        rate = speed * kd
    n = ceil(dt * rate / STIFF_Z)
    if n < 1.0:
        return 1
    if n > MAX_SUBSTEPS:
        return MAX_SUBSTEPS
    return <int>n


def substeps(double alpha, double beta, double ke, double kd, double speed,
             double x, double y, double dt):
    return _substeps(alpha, beta, ke, kd, speed, x, y, dt)


cdef inline int _rate(double alpha, double beta, double gamma, double c,
                      double ke, double kd, double speed,
                      double x, double y, double psi, double u_hold,
                      double* u) nogil:
    cdef double e, pdx, pdy, ff, align
    cdef int st = _field(alpha, beta, gamma, c, ke, kd, speed, x, y, psi,
                         u, &e, &pdx, &pdy, &ff, &align)
    if st == 2:
        u[0] = u_hold
    return st


def advance(double alpha, double beta, double gamma, double c, double ke,
            double kd, double speed, double wx, double wy,
            double x, double y, double psi, double dt, double u_hold):
    cdef double u0, e0, pdx, pdy, ff, align
    cdef double h, hh, k1x, k1y, k1p, k2x, k2y, k2p, k3x, k3y, k3p
    cdef double k4x, k4y, k4p, x2, y2, p2, x3, y3, p3, x4, y4, p4
    cdef int st = 0
    cdef int worst, n, i
    cdef int st0 = _field(alpha, beta, gamma, c, ke, kd, speed, x, y, psi,
                          &u0, &e0, &pdx, &pdy, &ff, &align)
    if st0 == 1:
        return x, y, psi, 0.0, e0, 0, 1
    if st0 == 2:
        u0 = u_hold
    worst = st0
    n = _substeps(alpha, beta, ke, kd, speed, x, y, dt)
    h = dt / n
    hh = 0.5 * h
    with nogil:
        for i in range(n):
            st = _rate(alpha, beta, gamma, c, ke, kd, speed, x, y, psi, u_hold, &k1p)
            if st == 1:
                break
            if st > worst:
                worst = st
            k1x = speed * cos(psi) + wx
            k1y = speed * sin(psi) + wy

            x2 = x + hh * k1x
            y2 = y + hh * k1y
            p2 = psi + hh * k1p
            st = _rate(alpha, beta, gamma, c, ke, kd, speed, x2, y2, p2, u_hold, &k2p)
            if st == 1:
                x = x2
                y = y2
                psi = p2
                break
            if st > worst:
                worst = st
            k2x = speed * cos(p2) + wx
            k2y = speed * sin(p2) + wy

            x3 = x + hh * k2x
            y3 = y + hh * k2y
            p3 = psi + hh * k2p
            st = _rate(alpha, beta, gamma, c, ke, kd, speed, x3, y3, p3, u_hold, &k3p)
            if st == 1:
                x = x3
                y = y3
                psi = p3
                break
            if st > worst:
                worst = st
            k3x = speed * cos(p3) + wx
            k3y = speed * sin(p3) + wy

            x4 = x + h * k3x
            y4 = y + h * k3y
            p4 = psi + h * k3p
            st = _rate(alpha, beta, gamma, c, ke, kd, speed, x4, y4, p4, u_hold, &k4p)
            if st == 1:
                x = x4
                y = y4
                psi = p4
                break
            if st > worst:
                worst = st
            k4x = speed * cos(p4) + wx
            k4y = speed * sin(p4) + wy

            x = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            y = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            psi = psi + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    if st == 1:
        return x, y, psi, u0, e0, n, 1
    return x, y, wrap(psi), u0, e0, n, worst


def unicycle_rk4(double x, double y, double psi, double speed, double u_psi,
                 double dt):
    cdef double hh = 0.5 * dt
    cdef double k1x = speed * cos(psi)
    cdef double k1y = speed * sin(psi)
    cdef double p2 = psi + hh * u_psi
    cdef double k2x = speed * cos(p2)
    cdef double k2y = speed * sin(p2)
    cdef double k3x = k2x
    cdef double k3y = k2y
    cdef double p4 = psi + dt * u_psi
    cdef double k4x = speed * cos(p4)
    cdef double k4y = speed * sin(p4)
    x = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    y = y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return x, y, wrap(psi + dt * u_psi)


def phase(double x, double y):
    return wrap(-atan2(y, x))
