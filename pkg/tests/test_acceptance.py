"""Acceptance criteria 1-7 at their stated tolerances.

Each test records one ``criterion N: PASS|FAIL ...`` line; the lines are
printed in the terminal summary and also when this file is run directly.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from circform import analysis, config as config_mod
from circform.formation import FormationSpec, GainConditionError, validate_gains
from circform.graph import FormationGraph, consensus_matrix, incidence_matrix, is_acyclic, verify_hurwitz
from circform.paths import Circle, Ellipse, frame, level
from circform.sim import AgentState, run_scenario, step_unicycle
from oracles import arc_position

RESULTS: dict[int, str] = {}


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


# 1. consensus matrix of random trees is Hurwitz; cycles give a zero eigenvalue


def random_tree(rng, n):
    edges = []
    for v in range(2, n + 1):
        u = int(rng.integers(1, v))
        edges.append((u, v) if rng.random() < 0.5 else (v, u))
    rng.shuffle(edges)
    return FormationGraph(n, tuple(edges))


def random_cyclic(rng, n):
    tree = random_tree(rng, n)
    present = {frozenset(e) for e in tree.edges}
    free = [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1) if frozenset((a, b)) not in present]
    extra = free[int(rng.integers(len(free)))]
    return FormationGraph(n, tree.edges + (extra,))


def test_criterion_1_tree_spectra():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst_tree = -math.inf
    for _ in range(200):
        g = random_tree(rng, int(rng.integers(2, 13)))
        assert is_acyclic(g)
        worst_tree = max(worst_tree, verify_hurwitz(consensus_matrix(g)).max_real_eigenvalue)
    worst_cycle = 0.0
    for _ in range(50):
        g = random_cyclic(rng, int(rng.integers(3, 13)))
        b = incidence_matrix(g).astype(float)
        eig = np.linalg.eigvalsh(-(b.T @ b))
        worst_cycle = max(worst_cycle, float(np.min(np.abs(eig))))
    elapsed = time.perf_counter() - start
    ok = worst_tree < -1e-9 and worst_cycle < 1e-9 and elapsed < 5.0
    verdict(1, ok, f"max tree eigenvalue {worst_tree:.3g} < -1e-9, max cycle |lambda|min {worst_cycle:.2g} < 1e-9, "
                   f"{elapsed:.2f} s < 5 s")


# 2. path tracking on the circle converges exponentially


def tracking_config(x, y, psi_deg, duration, dt=0.02):
    raw = {
        "agents": [{"x": x, "y": y, "psi_deg": psi_deg, "speed": 1.0}],
        "guidance": {"k_e": 1.0, "k_d": 1.0},
        "geometry": {"kind": "circle", "radius": 80.0},
        "run": {"duration": duration, "dt": dt},
        "network": {"period": dt},
    }
    return config_mod.build(config_mod.resolve(raw))


def test_criterion_2_tracking():
    r, k_e, speed = 80.0, 1.0, 1.0
    start = time.perf_counter()
    # |e(0)| = 600 m^2 <= 0.1 r^2, heading 30 deg off the tangent
    trace = run_scenario(tracking_config(math.sqrt(r * r + 600.0), 0.0, -60.0, 30.0))
    e = np.abs(trace.e[:, 0])
    # local regime: k_e |e| < 1, after ten time constants of the fast normal mode
    t_local = trace.t[np.argmax(k_e * e < 1.0)] + 10.0 / (speed * k_e * 2.0 * r)
    sel = (trace.t >= t_local) & (e >= 1e-10 * r * r)
    fit = analysis.fit_exponential(trace.t[sel], e[sel])

    rng = np.random.default_rng(2024)
    reached, max_ratio = 0, 0.0
    for _ in range(20):
        rad = rng.uniform(1.0, 400.0)
        ang = rng.uniform(-math.pi, math.pi)
        psi = rng.uniform(-180.0, 180.0)
        dur = float(math.ceil(1.5 * abs(rad - r) + 60.0))
        tr = run_scenario(tracking_config(rad * math.cos(ang), rad * math.sin(ang), psi, dur))
        ef = np.abs(tr.e[:, 0])
        dist = np.hypot(tr.x[:, 0], tr.y[:, 0])
        max_ratio = max(max_ratio, float(dist.max()) / max(rad, r))
        if np.all(np.isfinite(ef)) and ef[-1] < 1.0 and dist.max() <= max(rad, r) + 5.0:
            reached += 1
    elapsed = time.perf_counter() - start
    ok = fit.r2 > 0.98 and fit.rate > 0 and reached == 20 and elapsed < 10.0
    verdict(2, ok, f"log-linear R^2 {fit.r2:.5f} > 0.98, rate {fit.rate:.4f} 1/s > 0 over {fit.points} samples; "
                   f"{reached}/20 far starts reach |e| < 1 m^2 (max extent ratio {max_ratio:.3f}); {elapsed:.2f} s < 10 s")


# 3. formation error decays at the slowest linearized rate


def test_criterion_3_linear_regime_rate():
    z = math.degrees(0.2)
    overrides = [
        "network.loss=0", "network.blackouts=[]", "run.start_time=0", "run.duration=200",
        f"agents.0.phase_deg={z}", "agents.1.phase_deg=0", f"agents.2.phase_deg={-z}",
    ]
    cfg = config_mod.load("paper-flight", overrides)
    trace = run_scenario(cfg)
    e0 = trace.true_edge_errors()[0]
    rep = analysis.fit_decay(trace)
    predicted = analysis.linearize(cfg.formation, 13.0).slowest_rate
    fitted = rep.slowest_rate
    rel = abs(fitted - predicted) / predicted if fitted is not None else math.inf
    ok = rel <= 0.15 and max(abs(e0)) <= 0.2 + 1e-9
    verdict(3, ok, f"e(0) = ({e0[0]:.3f}, {e0[1]:.3f}) rad, slowest fitted rate {fitted:.5f} vs predicted "
                   f"{predicted:.5f} 1/s (rel err {rel:.2%} <= 15%, R^2 {min(rep.r2.values()):.5f})")


# 4. bundled flight scenario settles into the +/-10 deg band


def test_criterion_4_flight_reproduction():
    cfg = config_mod.load("paper-flight")
    trace = run_scenario(cfg)
    rep = analysis.fit_decay(trace)
    end = float(trace.t[-1])
    settle = rep.settling
    held = all(v is not None and v + rep.dwell <= end + 1e-9 for v in settle.values())
    half = rep.half_error_time
    half_ok = half is not None and 15.0 / 2.0 <= half <= 15.0 * 2.0
    times = ", ".join("never" if v is None else f"{v:.1f} s" for v in settle.values())
    verdict(4, held and half_ok and end == 410.0,
            f"band entry held {rep.dwell:g} s by t={end:g} s: edges settle at {times}; "
            f"half-error time {half:.1f} s within [7.5, 30] s")


# 5. total blackout with frozen extreme commands stays in the confinement disc


def test_criterion_5_confinement():
    cfg = config_mod.load("blackout-stress")
    a = run_scenario(cfg)
    b = run_scenario(cfg)
    deterministic = np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert all(not m.delivered for m in a.messages)
    predicted = analysis.predicted_confinement(cfg.formation)
    dmax = float(np.max(a.distance()))
    overshoot = analysis.tracking_overshoot(a)
    u_r = a.u_r[-1]
    extremes = np.allclose(np.abs(u_r), [math.pi * cfg.formation.k_r * cfg.graph.degree(i) for i in (1, 2, 3)],
                           rtol=1e-5)
    ok = dmax <= 130.27 + overshoot and overshoot < 5.0 and deterministic and extremes and a.t[-1] == 600.0
    verdict(5, ok, f"max |p| {dmax:.4f} m <= 130.27 m + tracking overshoot {overshoot:.1e} m (< 5 m) "
                   f"over {a.t[-1]:g} s, frozen u_r = {np.round(u_r, 2).tolist()} m, deterministic={deterministic}")


# 6. numerical integrity


def _rk4_error(dt, t_end=20.0):
    x0, y0, psi0, speed, omega = 3.0, -2.0, 0.4, 13.0, 0.35
    s = AgentState((x0, y0), psi0, speed)
    for _ in range(int(round(t_end / dt))):
        s = step_unicycle(s, omega, dt)
    xe, ye, _ = arc_position(x0, y0, psi0, speed, omega, t_end)
    return math.hypot(s.position[0] - xe, s.position[1] - ye)


def test_criterion_6_numerical_integrity():
    errs = [_rk4_error(dt) for dt in (1.0, 0.5, 0.25)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    order_ok = all(abs(q - 16.0) <= 0.2 * 16.0 for q in ratios)

    rng = np.random.default_rng(6)
    worst_g = worst_h = 0.0
    for path in (Circle(radius=80.0), Ellipse(center=(5.0, -3.0), a=120.0, b=70.0)):
        for _ in range(500):
            p = rng.uniform(-300.0, 300.0, size=2)
            h = 1e-3 * max(1.0, float(np.hypot(*path.relative(p))))
            fd = np.array([(level(path, p + d) - level(path, p - d)) / (2 * h) for d in np.eye(2) * h])
            n = frame(path, p).normal
            worst_g = max(worst_g, float(np.linalg.norm(fd - n) / np.linalg.norm(n)))
            hh = 1e-2
            fdh = np.column_stack([(path.gradient(p + d) - path.gradient(p - d)) / (2 * hh) for d in np.eye(2) * hh])
            hess = frame(path, p).hessian
            worst_h = max(worst_h, float(np.linalg.norm(fdh - hess) / np.linalg.norm(hess)))

    cfg = config_mod.load("paper-flight", ["run.duration=60"])
    a, b = run_scenario(cfg), run_scenario(cfg)
    names = ("x", "y", "psi", "e", "theta", "u_r", "c", "u_psi", "bank")
    identical = all(np.array_equal(getattr(a, n), getattr(b, n)) for n in names) and np.array_equal(
        a.e_theta, b.e_theta, equal_nan=True)
    ok = order_ok and worst_g <= 1e-6 and worst_h <= 1e-5 and identical
    verdict(6, ok, f"RK4 error ratios {ratios[0]:.2f}, {ratios[1]:.2f} within 16 +/- 20%; gradient FD rel err "
                   f"{worst_g:.1e} <= 1e-6; Hessian FD rel err {worst_h:.1e} <= 1e-5; bit-identical rerun={identical}")


# 7. gain-condition boundary


def test_criterion_7_gain_boundary():
    g = FormationGraph(3, ((1, 2), (2, 3)))
    margin = validate_gains(FormationSpec(g, (0.0, 0.0), 8.0, 80.0))
    try:
        validate_gains(FormationSpec(g, (0.0, 0.0), 13.0, 80.0))
        rejected, bad_margin = False, None
    except GainConditionError as exc:
        rejected, bad_margin = True, exc.margin
    exact = margin == 80.0 - math.pi * 8.0 * 2 and bad_margin == 80.0 - math.pi * 13.0 * 2
    ok = abs(margin - 29.73) < 5e-3 and rejected and exact
    verdict(7, ok, f"k_r=8 accepted (margin {margin:.4f} m), k_r=13 rejected (margin {bad_margin:.4f} m), "
                   f"margins equal r - pi*k_r*max degree exactly: {exact}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
