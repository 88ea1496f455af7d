"""Trajectory-level checks of the stability argument along solved arcs.

Everything here is post-processing: dwell times, jump-count bounds,
Lyapunov behaviour at jumps, the max-type storage function and
cross-mission convergence.  Functions that need ``V_p``/``V_c`` take the
closed-loop system explicitly or find it in ``arc.meta["system"]`` (set by
:func:`hai_sim.sar.run_mission`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import ets
from .closedloop import classify_jumps
from .hybrid import HybridArc

LYAP_TOL = 1e-9


def _meta(arc: HybridArc, key: str, given=None):
    if given is not None:
        return given
    if key not in arc.meta:
        raise ValueError(f"{key} not given and not recorded in arc.meta")
    return arc.meta[key]


def _loop(arc: HybridArc, system):
    system = _meta(arc, "system", system)
    return getattr(system, "loop", system)


def average_dwell(tau_p: float, tau_c: float) -> float:
    """``tau_a``: half the smaller minimum sampling interval."""
    return 0.5 * min(tau_p, tau_c)


# -- dwell ---------------------------------------------------------------------


@dataclass
class DwellReport:
    tau_p: float
    tau_c: float
    tau_a: float
    min_interval: dict[str, float | None]
    mean_interval: dict[str, float | None]
    counts: dict[str, int]
    event_tol: float = 0.0

    @property
    def ok(self) -> bool:
        taus = {ets.PLANT: self.tau_p, ets.CONTROLLER: self.tau_c}
        return all(m is None or m >= taus[k] - self.event_tol for k, m in self.min_interval.items())

    def to_dict(self) -> dict:
        return {
            "tau_p": self.tau_p,
            "tau_c": self.tau_c,
            "tau_a": self.tau_a,
            "min_interval": dict(self.min_interval),
            "mean_interval": dict(self.mean_interval),
            "counts": dict(self.counts),
            "ok": self.ok,
        }


def dwell_report(arc: HybridArc, tau_p: float | None = None, tau_c: float | None = None, event_tol: float | None = None) -> DwellReport:
    tau_p = float(_meta(arc, "tau_p", tau_p))
    tau_c = float(_meta(arc, "tau_c", tau_c))
    event_tol = float(arc.meta.get("event_tol", 0.0) if event_tol is None else event_tol)
    mins, means = {}, {}
    for which in (ets.PLANT, ets.CONTROLLER):
        times = arc.jump_times(which)
        if times.size < 2:
            mins[which] = means[which] = None
        else:
            gaps = np.diff(times)
            mins[which], means[which] = float(gaps.min()), float(gaps.mean())
    counts = {ets.PLANT: 0, ets.CONTROLLER: 0, "both": 0}
    for ev in classify_jumps(arc):
        if ev.sampler == "both":
            counts["both"] += 1
        else:
            counts[ev.sampler] += 1
    # a simultaneous pair is two records but one event
    counts["both"] //= 2
    return DwellReport(tau_p, tau_c, average_dwell(tau_p, tau_c), mins, means, counts, event_tol)


# -- jump-count bounds ----------------------------------------------------------


@dataclass
class JumpBoundCheck:
    ok: bool
    margin: float
    violation: tuple[float, int] | None = None


def check_jump_bound(arc: HybridArc, tau_a: float) -> JumpBoundCheck:
    """Check ``j <= t/tau_a + 1`` at every record.

    ``margin`` is the slack at the tightest jump record, or at the last
    record when the arc never jumps.
    """
    if not tau_a > 0:
        raise ValueError("tau_a must be positive")
    slack = arc.t / tau_a + 1.0 - arc.j
    bad = np.flatnonzero(slack < 0)
    violation = (float(arc.t[bad[0]]), int(arc.j[bad[0]])) if bad.size else None
    idx = arc.jump_indices()
    margin = float(slack[idx].min()) if idx.size else float(slack[-1])
    return JumpBoundCheck(violation is None, margin, violation)


def check_pairwise_jump_bound(arc: HybridArc, tau_a: float, offset: float = 1.0) -> JumpBoundCheck:
    """Check ``j - i <= (t - s)/tau_a + offset`` for every ordered pair of records.

    With two independent samplers a window can open just before one jump of
    each and close just after another jump of each, so ``offset=1`` can fail
    by up to one jump; ``offset=2`` always holds.  A running minimum of
    ``i - s/tau_a`` keeps the check linear in the arc length.
    """
    if not tau_a > 0:
        raise ValueError("tau_a must be positive")
    g = arc.j - arc.t / tau_a
    slack = np.minimum.accumulate(g) + offset - g
    k = int(np.argmin(slack))
    violation = (float(arc.t[k]), int(arc.j[k])) if slack[k] < 0 else None
    return JumpBoundCheck(violation is None, float(slack[k]), violation)


# -- Lyapunov functions at jumps -----------------------------------------------


@dataclass
class LyapunovViolation:
    t: float
    j: int
    function: str
    before: float
    after: float

    @property
    def increase(self) -> float:
        return self.after - self.before


def _lyap_pair(loop, t: float, x: np.ndarray) -> tuple[float, float]:
    vp, _, vc, _ = loop.trigger_values(t, x)
    return vp, vc


def lyapunov_jump_monotonicity(arc: HybridArc, system=None, tol: float = LYAP_TOL) -> list[LyapunovViolation]:
    """Jumps across which ``V_p`` or ``V_c`` grew by more than ``tol``."""
    loop = _loop(arc, system)
    out = []
    for k in arc.jump_indices():
        t = float(arc.t[k])
        before = _lyap_pair(loop, t, arc.x[k - 1])
        after = _lyap_pair(loop, t, arc.x[k])
        for name, b, a in zip(("V_p", "V_c"), before, after):
            if a - b > tol:
                out.append(LyapunovViolation(t, int(arc.j[k]), name, b, a))
    return out


@dataclass
class StorageTrace:
    t: np.ndarray
    j: np.ndarray
    U: np.ndarray
    V_p: np.ndarray
    V_c: np.ndarray
    jump_increases: list[tuple[float, int, float]] = field(default_factory=list)

    @property
    def nonincreasing_at_jumps(self) -> bool:
        return not self.jump_increases


def storage_trace(
    arc: HybridArc,
    system=None,
    rho: Callable[[float], float] = lambda r: r,
    tol: float = LYAP_TOL,
) -> StorageTrace:
    """``U = max(V_p, rho(V_c))`` along the arc."""
    loop = _loop(arc, system)
    vals = np.array([_lyap_pair(loop, float(t), x) for t, x in zip(arc.t, arc.x)]).reshape(-1, 2)
    vp = vals[:, 0]
    rv = np.array([rho(v) for v in vals[:, 1]], dtype=float)
    U = np.maximum(vp, rv)
    inc = []
    for k in arc.jump_indices():
        d = U[k] - U[k - 1]
        if d > tol:
            inc.append((float(arc.t[k]), int(arc.j[k]), float(d)))
    return StorageTrace(arc.t.copy(), arc.j.copy(), U, vp, vals[:, 1], inc)


# -- convergence across missions --------------------------------------------------


@dataclass
class ConvergenceReport:
    labels: list[str]
    P: np.ndarray
    T: np.ndarray
    Yc: np.ndarray
    controller_distance: np.ndarray
    spread_Yc: float
    spread_T: float
    tol: float

    @property
    def spread(self) -> float:
        return self.spread_Yc

    @property
    def converged(self) -> bool:
        return self.spread_Yc < self.tol

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "P": self.P.tolist(),
            "T": self.T.tolist(),
            "Yc": self.Yc.tolist(),
            "controller_distance": self.controller_distance.tolist(),
            "spread_Yc": self.spread_Yc,
            "spread_T": self.spread_T,
            "tol": self.tol,
            "converged": self.converged,
        }


def _spread(v: np.ndarray) -> float:
    return float(v.max() - v.min())


def convergence_metrics(results: Sequence, tol: float = 0.05) -> ConvergenceReport:
    """Terminal values and their spread over missions of one scenario."""
    if len(results) < 2:
        raise ValueError("need at least two results to compare")
    return convergence_from_terminals(
        [r.config.label() for r in results],
        [r.terminal("P") for r in results],
        [r.terminal("T") for r in results],
        [r.terminal("Yc") for r in results],
        [_loop(r.arc, r.system).distance_controller_set(r.arc.final_state) for r in results],
        tol,
    )


def convergence_from_terminals(labels, P, T, Yc, controller_distance, tol: float = 0.05) -> ConvergenceReport:
    P, T, Yc = (np.asarray(v, dtype=float) for v in (P, T, Yc))
    dist = np.asarray(controller_distance, dtype=float)
    if len(Yc) < 2:
        raise ValueError("need at least two results to compare")
    return ConvergenceReport(list(labels), P, T, Yc, dist, _spread(Yc), _spread(T), tol)


# -- trigger statistics ------------------------------------------------------------


@dataclass
class TriggerStatistics:
    times: dict[str, np.ndarray]
    horizon: float
    baseline_period: float | None

    @property
    def counts(self) -> dict[str, int]:
        return {k: int(v.size) for k, v in self.times.items()}

    @property
    def baseline_count(self) -> float | None:
        """Events of periodic sampling at the smaller minimum interval."""
        if self.baseline_period is None:
            return None
        return self.horizon / self.baseline_period

    def count_in(self, which: str, t0: float, t1: float) -> int:
        v = self.times[which]
        return int(np.sum((v >= t0) & (v <= t1)))

    def rate(self, which: str, window: float) -> tuple[np.ndarray, np.ndarray]:
        """Events per second in consecutive windows; returns (window starts, rates)."""
        if not window > 0:
            raise ValueError("window must be positive")
        edges = np.arange(0.0, self.horizon + window, window)
        if edges.size < 2:
            edges = np.array([0.0, window])
        hist, _ = np.histogram(self.times[which], bins=edges)
        return edges[:-1], hist / window

    def to_dict(self) -> dict:
        return {
            "counts": self.counts,
            "times": {k: v.tolist() for k, v in self.times.items()},
            "horizon": self.horizon,
            "baseline_count": self.baseline_count,
        }


def trigger_statistics(arc: HybridArc, tau_p: float | None = None, tau_c: float | None = None) -> TriggerStatistics:
    """Per-sampler event times; a simultaneous pair counts once for each sampler."""
    times = {w: arc.jump_times(w) for w in (ets.PLANT, ets.CONTROLLER)}
    tp = tau_p if tau_p is not None else arc.meta.get("tau_p")
    tc = tau_c if tau_c is not None else arc.meta.get("tau_c")
    period = min(tp, tc) if tp is not None and tc is not None else None
    return TriggerStatistics(times, float(arc.horizon), period)


def mission_analysis(result) -> dict:
    """JSON-ready summary of one mission run."""
    arc = result.arc
    dwell = dwell_report(arc)
    bound = check_jump_bound(arc, dwell.tau_a)
    pair = check_pairwise_jump_bound(arc, dwell.tau_a)
    pair2 = check_pairwise_jump_bound(arc, dwell.tau_a, offset=2.0)
    viol = lyapunov_jump_monotonicity(arc)
    storage = storage_trace(arc)
    stats = trigger_statistics(arc)
    return {
        "label": result.config.label(),
        "reason": result.reason,
        "jumps": int(arc.n_jumps),
        "dwell": dwell.to_dict(),
        "jump_bound": {"ok": bound.ok, "margin": bound.margin, "violation": bound.violation},
        "pairwise_jump_bound": {"ok": pair.ok, "margin": pair.margin, "violation": pair.violation},
        "pairwise_jump_bound_offset2": {"ok": pair2.ok, "margin": pair2.margin},
        "lyapunov_violations": [
            {"t": v.t, "j": v.j, "function": v.function, "before": v.before, "after": v.after} for v in viol
        ],
        "storage_nonincreasing_at_jumps": storage.nonincreasing_at_jumps,
        "triggers": {"counts": stats.counts, "baseline_count": stats.baseline_count},
        "terminal": {k: result.terminal(k) for k in ("P", "T", "Yc", "R")},
        "survivors_detected": result.n_detected,
        "residual_max": result.residual_max(),
    }
