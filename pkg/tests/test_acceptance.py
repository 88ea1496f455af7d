"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

The lines are echoed in the pytest terminal summary (see conftest.py).
Mission runs are cached for the session, so criteria 4 and 5 cover every
mission simulated by the criteria before them.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np

from hai_sim import analysis, ets, io, sar
from hai_sim.hybrid import HybridSystemDef, locate_event, step_flow

from conftest import ACCEPTANCE_LINES, _RUNS, cached_mission

RESIDUAL_PEAK = 1.47
TAUS_CONVERGING = (0.1, 1.0)
TAU_SLOW = 20.0


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def tau_runs(tau: float) -> list[sar.MissionResult]:
    return [cached_mission(mission=m, tau_p=tau, tau_c=tau) for m in "ABC"]


# -- 1 ---------------------------------------------------------------------------


def test_criterion_1_residual_band():
    res = cached_mission("config", mission="A", tau_p=1.0, tau_c=1.0, k_p=4.0)
    elapsed = res.wall_time
    t, d = res.series["t"], res.series["delta"]
    win = (t >= 0.4) & (t <= 10.0)
    peak, low = float(d[win].max()), float(d[win].min())
    ok = 0.5 * RESIDUAL_PEAK <= peak <= 1.25 * RESIDUAL_PEAK and low <= 0.5 * peak and elapsed < 30.0
    record(1, ok, f"max residual {peak:.4f} in [{0.5 * RESIDUAL_PEAK:.3f}, {1.25 * RESIDUAL_PEAK:.4f}], min {low:.4f}, runtime {elapsed:.1f} s")
    assert ok


# -- 2 ---------------------------------------------------------------------------


def test_criterion_2_gain_attenuation():
    slow = cached_mission("config", mission="A", tau_p=1.0, tau_c=1.0, k_p=4.0)
    fast = cached_mission("config", mission="A", tau_p=1.0, tau_c=1.0, k_p=40.0, horizon=10.0)
    ratio = slow.residual_max() / fast.residual_max()
    ok = 6.0 <= ratio <= 14.0
    record(2, ok, f"k_p 4 vs 40 residual ratio {ratio:.2f} in [6, 14]")
    assert ok


# -- 3 ---------------------------------------------------------------------------


def test_criterion_3_cross_mission_convergence():
    parts, ok = [], True
    for tau in TAUS_CONVERGING:
        runs = tau_runs(tau)
        yc = np.array([r.terminal("Yc") for r in runs])
        spread = float(yc.max() - yc.min())
        near = bool(np.all(np.abs(yc - 1.41) <= 0.1))
        found = all(r.n_detected == len(r.survivors) for r in runs)
        variant = all(r.config.output_variant == "proportion" for r in runs)
        ok &= spread <= 0.05 and near and found and variant
        parts.append(f"tau={tau:g}: Yc {np.round(yc, 4).tolist()} spread {spread:.4f} all detected {found}")
    slow = np.array([r.terminal("Yc") for r in tau_runs(TAU_SLOW)])
    slow_spread = float(slow.max() - slow.min())
    ok &= slow_spread > 0.05
    parts.append(f"tau=20: Yc {np.round(slow, 4).tolist()} spread {slow_spread:.4f} (> 0.05 expected)")
    record(3, ok, "; ".join(parts))
    assert ok


# -- 4 and 5 run over every mission simulated so far ---------------------------------


def _all_runs() -> list[sar.MissionResult]:
    for tau in TAUS_CONVERGING + (TAU_SLOW,):
        tau_runs(tau)
    cached_mission("config", mission="A", tau_p=1.0, tau_c=1.0, k_p=4.0)
    return list(_RUNS.values())


def test_criterion_4_zeno_freedom_and_dwell():
    worst_gap, worst_margin, ok = math.inf, math.inf, True
    runs = _all_runs()
    for res in runs:
        cfg = res.config
        for which, tau in ((ets.PLANT, cfg.tau_p), (ets.CONTROLLER, cfg.tau_c)):
            times = res.arc.jump_times(which)
            if times.size >= 2:
                gap = float(np.diff(times).min())
                worst_gap = min(worst_gap, gap - tau)
                ok &= gap >= tau - cfg.event_tol
        chk = analysis.check_jump_bound(res.arc, analysis.average_dwell(cfg.tau_p, cfg.tau_c))
        worst_margin = min(worst_margin, chk.margin)
        ok &= chk.ok
    record(4, ok, f"{len(runs)} runs; min (interval - tau) {worst_gap:.2e}, tightest jump-bound margin {worst_margin:.3f}")
    assert ok


def test_criterion_5_lyapunov_jump_monotonicity():
    runs = _all_runs()
    n_jumps = sum(r.arc.n_jumps for r in runs)
    viol = [v for r in runs for v in analysis.lyapunov_jump_monotonicity(r.arc, tol=1e-9)]
    ok = not viol
    record(5, ok, f"{len(viol)} violations over {n_jumps} jumps in {len(runs)} runs")
    assert ok


# -- 6 ---------------------------------------------------------------------------


def test_criterion_6_event_triggered_economy():
    res = cached_mission(mission="C", tau_p=1.0, tau_c=1.0)
    stats = analysis.trigger_statistics(res.arc)
    n_ctrl = stats.counts[ets.CONTROLLER]
    n_plant = stats.count_in(ets.PLANT, 5.0, 30.0)
    ok = n_ctrl < 40 and n_plant >= 5
    record(6, ok, f"controller events {n_ctrl} < 40, plant events in [5, 30] s {n_plant} >= 5")
    assert ok


# -- 7 ---------------------------------------------------------------------------
# Oracles evaluate the defining formulas term by term in 40-digit arithmetic.
# Errors are relative to max(|exact|, magnitude of the summands), so a sum
# that cancels to nearly zero is judged on the size of what was added.

mp.mp.dps = 40


def _sigma(d):
    return (1 - mp.tanh(3 * (d - 1))) / 2


def oracle_output(X, X_s):
    X = [[mp.mpf(float(v)) for v in p] for p in X]
    X_s = [[mp.mpf(float(v)) for v in p] for p in X_s]
    n = len(X)
    vals, scales = [], []
    for s in X_s:
        total = mp.fsum(_sigma(mp.sqrt((s[0] - a[0]) ** 2 + (s[1] - a[1]) ** 2)) for a in X)
        vals.append(1 - mp.tanh(total))
        scales.append(abs(vals[-1]))
    pair = mp.fsum(_sigma(mp.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)) for a in X for b in X)
    vals.append((pair - n) / (n * (n - 1)))
    scales.append((pair + n) / (n * (n - 1)))
    return vals, scales


def oracle_status_jump(S, Y):
    vals = [mp.mpf(float(s)) * mp.mpf(float(y)) for s, y in zip(S[:-1], Y[:-1])] + [mp.mpf(float(Y[-1]))]
    return vals, [abs(v) for v in vals]


def oracle_triggers(Y_a, e_m, Y_c, e_u):
    f = lambda v: mp.mpf(float(v))
    ya2 = mp.fsum(f(y) ** 2 for y in Y_a[:-1])
    em2 = mp.fsum(f(e) ** 2 for e in e_m[:-1])
    vp = ya2 + mp.mpf("0.01") * em2
    wp = mp.mpf("10.01") * em2
    vc = (f(Y_c) - mp.mpf("1.41")) ** 2 + mp.mpf("0.01") * f(e_u) ** 2
    wu = mp.mpf("10.01") * f(e_u) ** 2
    scales = [abs(vp), abs(wp), (abs(f(Y_c)) + mp.mpf("1.41")) ** 2 + abs(mp.mpf("0.01") * f(e_u) ** 2), abs(wu)]
    return [vp, wp, vc, wu], scales


def oracle_perf(Y_s, P):
    terms = [mp.mpf("0.9") * mp.mpf(float(Y_s[0])), mp.mpf("0.1") * mp.mpf(float(Y_s[1])), -mp.mpf(float(P))]
    return [mp.fsum(terms)], [mp.fsum(abs(t) for t in terms)]


def oracle_trust(P, T):
    p, t = mp.mpf(float(P)), mp.mpf(float(T))
    return [(p - t) / 2], [(abs(p) + abs(t)) / 2]


def _rel_err(got, exact, scales) -> float:
    got = np.atleast_1d(np.asarray(got, dtype=float))
    worst = 0.0
    for g, e, s in zip(got, exact, scales):
        den = max(abs(e), s)
        err = abs(mp.mpf(float(g)) - e)
        worst = max(worst, float(err / den) if den > 0 else float(err))
    return worst


def test_criterion_7_oracle_equivalence():
    rng = np.random.default_rng(2024)
    worst = dict.fromkeys(("system_output", "status_jump", "trigger_functions", "perf_flow", "trust_flow"), 0.0)
    for k in range(1000):
        if k % 3 == 0:  # clustered agents around survivors
            X, X_s = rng.uniform(-2, 2, (10, 2)), rng.uniform(-1, 1, (10, 2))
        else:
            X, X_s = rng.uniform(-10, 10, (10, 2)), rng.uniform(-8, 8, (10, 2))
        Y_a = sar.system_output(X, X_s)
        worst["system_output"] = max(worst["system_output"], _rel_err(Y_a, *oracle_output(X, X_s)))
        S = rng.uniform(0, 1, 11)
        worst["status_jump"] = max(worst["status_jump"], _rel_err(sar.status_jump(S, Y_a), *oracle_status_jump(S, Y_a)))
        e_m, Y_c, e_u = rng.normal(0, 0.5, 11), rng.uniform(0, 1.5), rng.normal(0, 0.5)
        got = sar.trigger_functions(Y_a, e_m, np.array([Y_c]), np.array([e_u]))
        worst["trigger_functions"] = max(worst["trigger_functions"], _rel_err(got, *oracle_triggers(Y_a, e_m, Y_c, e_u)))
        Y_s, P, T = rng.uniform(-1, 1, 2), rng.uniform(-1, 2), rng.uniform(-1, 2)
        worst["perf_flow"] = max(worst["perf_flow"], _rel_err(sar.perf_flow(Y_s, P), *oracle_perf(Y_s, P)))
        worst["trust_flow"] = max(worst["trust_flow"], _rel_err(sar.trust_flow(P, T), *oracle_trust(P, T)))
    ok = all(v <= 1e-12 for v in worst.values())
    record(7, ok, "worst relative errors " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


# -- 8 ---------------------------------------------------------------------------


def _flow_only(f):
    return HybridSystemDef(1, f, lambda t, x: [x], lambda t, x: True, lambda t, x: False)


def test_criterion_8_integrator_order_and_events():
    sys = _flow_only(lambda t, x: -x)
    errs = []
    for n in (10, 20, 40, 80):
        x, h = np.array([1.0]), 1.0 / n
        for k in range(n):
            x = step_flow(sys, x, h, k * h)
        errs.append(abs(x[0] - math.exp(-1.0)))
    ratios = [a / b for a, b in zip(errs, errs[1:])]

    rng = np.random.default_rng(8)
    tol, h, worst = 1e-4, 0.01, 0.0
    for _ in range(200):
        rate = rng.uniform(0.1, 10.0)
        crossing = rng.uniform(0.0, h)
        x0 = np.array([1.0 - rate * crossing])
        lin = HybridSystemDef(
            1,
            lambda t, x, r=rate: np.array([r]),
            lambda t, x: [x],
            lambda t, x: x[0] <= 1.0,
            lambda t, x: x[0] >= 1.0,
        )
        off, _ = locate_event(lin, x0, step_flow(lin, x0, h), h, tol=tol)
        worst = max(worst, abs(off - crossing))
    ok = min(ratios) >= 10.0 and worst <= tol
    record(8, ok, f"error ratios per halving {[round(float(r), 2) for r in ratios]}, worst event offset error {worst:.2e} <= {tol:g}")
    assert ok


# -- 9 ---------------------------------------------------------------------------


def test_criterion_9_determinism(tmp_path):
    cfg = sar.MissionConfig(mission="B", tau_p=1.0, tau_c=1.0, seed=5)
    a = io.save_result(sar.run_mission(cfg), tmp_path / "a")
    b = io.save_result(sar.run_mission(cfg), tmp_path / "b")
    same = all((a / n).read_bytes() == (b / n).read_bytes() for n in (io.TRAJECTORY, io.EVENTS, io.SURVIVORS))
    size = (a / io.TRAJECTORY).stat().st_size
    record(9, same, f"two runs of {cfg.label()} seed 5 produce identical files ({size} bytes of trajectory CSV)")
    assert same
