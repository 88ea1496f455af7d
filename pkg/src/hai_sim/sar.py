"""Swarm search-and-rescue scenario.

Ten single-integrator agents hold a circular formation around a Lissajous
sweep while a commander sets the formation radius from trust.  The status
interface keeps, per survivor, the likelihood of it not having been found,
plus the last sampled swarm cohesion.

Positions are in km, time in s.  Agent positions are packed as
``[x_1, y_1, x_2, y_2, ...]``.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import closedloop, ets
from .errors import ConfigurationError
from .framework import (
    PerformanceEstimator,
    SystemDynamics,
    SystemStatusInterface,
    TrustModel,
    zoh_interface,
)
from .hybrid import HybridArc, IntegratorConfig, solve

# initial (P, T, X fill value) per mission
MISSION_INITIALS = {
    "A": (0.01, 0.01, 3.0),
    "B": (0.50, 0.50, 0.0),
    "C": (0.99, 0.99, -7.0),
}

SLOW_SWEEP_RATE = 1.0 / (2.0 * math.pi)


@dataclass(frozen=True)
class MissionConfig:
    """Scenario parameters; every scenario constant is a field with its reference default.

    ``sweep_rate`` is the angular rate (rad/s) of the Lissajous sweep's x
    component.  ``1.0`` gives a residual peak near 1.47 at ``k_p = 4``;
    :data:`SLOW_SWEEP_RATE` is the slower ``1/(2*pi)`` alternative.
    """

    mission: str | None = "B"
    tau_p: float = 1.0
    tau_c: float = 1.0
    k_p: float = 4.0
    horizon: float = 40.0
    step: float = 0.005
    event_tol: float = 1e-4
    max_jumps: int = 10**6
    P0: float | None = None
    T0: float | None = None
    X0: float | None = None
    n_agents: int = 10
    n_survivors: int = 10
    survivors: tuple | None = None
    seed: int = 0
    survivor_box: float = 8.0
    output_variant: str = "proportion"
    sweep_rate: float = 1.0
    ref_amplitude: float = 6.0
    ref_y_ratio: float = 0.1
    indicator_steepness: float = 3.0
    perf_weights: tuple = (0.9, 0.1)
    trust_rate: float = 0.5
    intervention_gain: float = 1.5
    yc_max: float = 1.5
    yc_anchor: float = 1.41
    lyap_error_weight: float = 0.01
    error_gain: float = 10.01
    detect_threshold: float = 0.05

    def __post_init__(self):
        if self.mission is not None:
            if self.mission not in MISSION_INITIALS:
                raise ConfigurationError(f"unknown mission {self.mission!r}; expected one of A, B, C")
            P0, T0, X0 = MISSION_INITIALS[self.mission]
            for name, v in (("P0", P0), ("T0", T0), ("X0", X0)):
                if getattr(self, name) is None:
                    object.__setattr__(self, name, v)
        for name in ("P0", "T0", "X0"):
            if getattr(self, name) is None:
                raise ConfigurationError(f"{name} is required when no mission id is given")
        if self.survivors is not None:
            pts = np.asarray(self.survivors, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 1:
                raise ConfigurationError("survivors must be a non-empty list of [x, y] pairs")
            object.__setattr__(self, "survivors", tuple(tuple(float(c) for c in p) for p in pts))
            object.__setattr__(self, "n_survivors", len(pts))
        object.__setattr__(self, "perf_weights", tuple(float(w) for w in self.perf_weights))
        checks = [
            (self.tau_p > 0 and self.tau_c > 0, "tau_p and tau_c must be positive"),
            (self.k_p > 0, "k_p must be positive"),
            (self.horizon >= 0, "horizon must be non-negative"),
            (self.step > 0 and 0 < self.event_tol < self.step, "need step > 0 and 0 < event_tol < step"),
            (self.n_agents >= 1 and self.n_survivors >= 1, "need at least one agent and one survivor"),
            (self.output_variant in ("proportion", "literal"), "output_variant must be 'proportion' or 'literal'"),
            (len(self.perf_weights) == 2, "perf_weights needs two entries"),
            (self.max_jumps >= 1, "max_jumps must be at least 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigurationError(msg)
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigurationError(f"{f.name} must be finite")

    @classmethod
    def from_dict(cls, d: dict) -> "MissionConfig":
        d = dict(d)
        known = {f.name: f for f in fields(cls)}
        if "tau" in d:
            tau = d.pop("tau")
            d.setdefault("tau_p", tau)
            d.setdefault("tau_c", tau)
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        for k, v in d.items():
            if k in ("mission", "output_variant"):
                if v is not None and not isinstance(v, str):
                    raise ConfigurationError(f"{k} must be a string")
            elif k in ("survivors", "perf_weights"):
                if v is not None and not isinstance(v, (list, tuple)):
                    raise ConfigurationError(f"{k} must be a list")
            elif k in ("n_agents", "n_survivors", "seed", "max_jumps"):
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ConfigurationError(f"{k} must be an integer")
            elif v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
                raise ConfigurationError(f"{k} must be a number")
        if d.get("survivors") is not None:
            d["survivors"] = tuple(tuple(p) for p in d["survivors"])
        return cls(**d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["perf_weights"] = list(self.perf_weights)
        if self.survivors is not None:
            out["survivors"] = [list(p) for p in self.survivors]
        return out

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(step=self.step, event_tol=self.event_tol, horizon=self.horizon, max_jumps=self.max_jumps)

    def label(self) -> str:
        return f"M{self.mission or 'x'}_tau{self.tau_p:g}_kp{self.k_p:g}"


# -- scenario maps -------------------------------------------------------------


def centroid_reference(t: float, rate: float = 1.0, amplitude: float = 6.0, y_ratio: float = 0.1) -> np.ndarray:
    return np.array([amplitude * math.sin(rate * t), amplitude * math.sin(y_ratio * rate * t)])


def bearings(n_a: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n_a) / n_a


def reference(t: float, R_val: float, i: int, n_a: int = 10, rate: float = 1.0, amplitude: float = 6.0, y_ratio: float = 0.1) -> np.ndarray:
    """Formation slot of agent ``i`` (1-based) at time ``t``."""
    if not 1 <= i <= n_a:
        raise ValueError(f"agent index {i} outside 1..{n_a}")
    theta = 2.0 * math.pi * (i - 1) / n_a
    c = centroid_reference(t, rate, amplitude, y_ratio)
    return c + R_val * np.array([math.cos(theta), math.sin(theta)])


def reference_all(t: float, R_val: float, n_a: int, rate: float = 1.0, amplitude: float = 6.0, y_ratio: float = 0.1) -> np.ndarray:
    th = bearings(n_a)
    c = centroid_reference(t, rate, amplitude, y_ratio)
    return c[None, :] + R_val * np.column_stack([np.cos(th), np.sin(th)])


def agent_flow(X: np.ndarray, t: float, R_val: float, k_p: float = 4.0, **ref_kw) -> np.ndarray:
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    return k_p * (reference_all(t, R_val, len(X), **ref_kw) - X)


def smooth_indicator(x, steepness: float = 3.0):
    """``0.5 (1 - tanh(steepness (x - 1)))``, evaluated without cancellation."""
    return _logistic(2.0 * steepness * (np.asarray(x, dtype=float) - 1.0))


def _logistic(z):
    # 1 / (1 + e^z); e^z overflowing to inf correctly gives 0
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(z))


def _pair_geometry(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    diff = A[:, None, :] - B[None, :, :]
    return diff, np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def output_and_jacobian(X: np.ndarray, X_s: np.ndarray, steepness: float = 3.0, jacobian: bool = True):
    """System output and, optionally, its Jacobian w.r.t. the flat agent vector.

    ``1 - tanh(s)`` is formed as ``2 / (1 + e^{2s})`` so surrounded survivors
    keep full relative precision.  Zero-distance pairs contribute nothing to
    the Jacobian (the pair distance has no derivative there).
    """
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    X_s = np.asarray(X_s, dtype=float).reshape(-1, 2)
    n_a, n_s = len(X), len(X_s)
    denom = n_a * (n_a - 1) if n_a > 1 else 1

    diff_s, d_s = _pair_geometry(X_s, X)  # survivor minus agent
    sig_s = smooth_indicator(d_s, steepness)
    y = np.empty(n_s + 1)
    y[:n_s] = 2.0 * _logistic(2.0 * sig_s.sum(axis=1))

    diff_a, d_a = _pair_geometry(X, X)
    sig_a = smooth_indicator(d_a, steepness)
    y[n_s] = (sig_a.sum() - n_a) / denom
    if not jacobian:
        return y, None

    jac = np.empty((n_s + 1, n_a, 2))
    # sigma' = -2 k sigma (1 - sigma); d(1 - tanh s)/ds = -y (2 - y)
    slope_s = -2.0 * steepness * sig_s * (1.0 - sig_s)
    with np.errstate(invalid="ignore", divide="ignore"):
        w_s = np.where(d_s > 0, slope_s / d_s, 0.0)
    # d d_ji / d X^i = (X^i - X_s^j) / d_ji = -diff_s / d
    sech2 = y[:n_s] * (2.0 - y[:n_s])
    jac[:n_s] = sech2[:, None, None] * w_s[..., None] * diff_s
    slope_a = -2.0 * steepness * sig_a * (1.0 - sig_a)
    with np.errstate(invalid="ignore", divide="ignore"):
        w_a = np.where(d_a > 0, slope_a / d_a, 0.0)
    jac[n_s] = 2.0 * np.einsum("ij,ijk->ik", w_a, diff_a) / denom
    return y, jac.reshape(n_s + 1, 2 * n_a)


def system_output(X: np.ndarray, X_s: np.ndarray, steepness: float = 3.0) -> np.ndarray:
    """Survivor proximity measures followed by swarm cohesion."""
    return output_and_jacobian(X, X_s, steepness, jacobian=False)[0]


def output_jacobian(X: np.ndarray, X_s: np.ndarray, steepness: float = 3.0) -> np.ndarray:
    return output_and_jacobian(X, X_s, steepness)[1]


class _OutputCache:
    """Remembers the last output/Jacobian pair; flow stages and set tests revisit states."""

    def __init__(self, X_s: np.ndarray, steepness: float):
        self.X_s, self.steepness = X_s, steepness
        self.key: bytes | None = None
        self.y = self.jac = None

    def _refresh(self, X, jacobian: bool):
        X = np.asarray(X, dtype=float)
        key = X.tobytes()
        if key != self.key or (jacobian and self.jac is None):
            self.y, self.jac = output_and_jacobian(X, self.X_s, self.steepness, jacobian)
            self.key = key

    def output(self, X):
        self._refresh(X, False)
        return self.y.copy()

    def jacobian(self, X):
        self._refresh(X, True)
        return self.jac


def status_jump(S: np.ndarray, Y_a: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    Y_a = np.asarray(Y_a, dtype=float)
    out = Y_a.copy()
    out[:-1] = S[:-1] * Y_a[:-1]
    return out


def status_output(S: np.ndarray, variant: str = "proportion") -> np.ndarray:
    S = np.asarray(S, dtype=float)
    missing = float(np.mean(S[:-1]))
    if variant == "proportion":
        return np.array([1.0 - missing, S[-1]])
    if variant == "literal":
        return np.array([-missing, S[-1]])
    raise ValueError(f"unknown output variant {variant!r}")


def perf_flow(Y_s, P: float, weights=(0.9, 0.1)) -> float:
    return float(weights[0] * Y_s[0] + weights[1] * Y_s[1] - P)


def trust_flow(P: float, T: float, rate: float = 0.5) -> float:
    return rate * (P - T)


def commander_output(T: float, gain: float = 1.5, y_max: float = 1.5) -> float:
    return min(max(gain * T, 0.0), y_max)


def trigger_functions(
    Y_a, e_m, Y_c, e_u, n_s: int | None = None, anchor: float = 1.41, weight: float = 0.01, gain: float = 10.01
) -> tuple[float, float, float, float]:
    """``(V_p, W_p, V_c, W_u)``; the plant pair sums over survivor channels only."""
    Y_a, e_m = np.asarray(Y_a, dtype=float), np.asarray(e_m, dtype=float)
    if n_s is None:
        n_s = len(Y_a) - 1
    em2 = float(np.sum(e_m[:n_s] ** 2))
    eu2 = float(np.sum(np.asarray(e_u, dtype=float) ** 2))
    V_p = float(np.sum(Y_a[:n_s] ** 2)) + weight * em2
    V_c = float(np.sum((np.asarray(Y_c, dtype=float) - anchor) ** 2)) + weight * eu2
    return V_p, gain * em2, V_c, gain * eu2


def residual(X: np.ndarray, t: float, R_val: float, **ref_kw) -> float:
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    ref = reference_all(t, R_val, len(X), **ref_kw)
    return float(np.linalg.norm(np.mean(X - ref, axis=0)))


# -- mission assembly ------------------------------------------------------------


def survivor_positions(cfg: MissionConfig) -> np.ndarray:
    if cfg.survivors is not None:
        return np.asarray(cfg.survivors, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    return rng.uniform(-cfg.survivor_box, cfg.survivor_box, size=(cfg.n_survivors, 2))


# sweep times of a layout that every mission covers for small sampling intervals
SWEEP_LAYOUT_TIMES = tuple(float(t) for t in np.linspace(9.0, 21.0, 8)) + (3.0, 5.0)


def lagged_centroid(t: float, k_p: float = 4.0, rate: float = 1.0, amplitude: float = 6.0, y_ratio: float = 0.1) -> np.ndarray:
    """Steady-state centroid of agents tracking the sweep through ``k_p``.

    Each sinusoidal component passes through the first-order lag ``k_p/(s + k_p)``.
    """
    out = []
    for w in (rate, y_ratio * rate):
        gain = amplitude / math.sqrt(1.0 + (w / k_p) ** 2)
        out.append(gain * math.sin(w * t - math.atan(w / k_p)))
    return np.array(out)


def sweep_layout(times=SWEEP_LAYOUT_TIMES, k_p: float = 4.0, rate: float = 1.0, amplitude: float = 6.0, y_ratio: float = 0.1) -> np.ndarray:
    """Survivors placed where the settled swarm centroid passes at ``times``."""
    return np.vstack([lagged_centroid(t, k_p, rate, amplitude, y_ratio) for t in times])


def _ref_kw(cfg: MissionConfig) -> dict:
    return {"rate": cfg.sweep_rate, "amplitude": cfg.ref_amplitude, "y_ratio": cfg.ref_y_ratio}


def build_mission(cfg: MissionConfig) -> tuple[closedloop.ClosedLoopSystem, np.ndarray]:
    """Closed-loop hybrid system and its initial packed state."""
    X_s = survivor_positions(cfg)
    n_a, n_s = cfg.n_agents, len(X_s)
    steep = cfg.indicator_steepness
    ref_kw = _ref_kw(cfg)

    def f_a(R, E_a, X, t):
        return agent_flow(X, t, max(float(R[0]), 0.0), cfg.k_p, **ref_kw).ravel()

    cache = _OutputCache(X_s, steep)
    dynamics = SystemDynamics(
        n_state=2 * n_a,
        n_out=n_s + 1,
        n_ref=1,
        f_a=f_a,
        h_a=cache.output,
        jac_h_a=cache.jacobian,
    )
    status = SystemStatusInterface(
        n_state=n_s + 1,
        n_in=n_s + 1,
        n_out=2,
        f_s=lambda y_a, s: np.zeros(n_s + 1),
        g_s=lambda y_a, s: status_jump(s, y_a),
        h_s=lambda s: status_output(s, cfg.output_variant),
    )
    w = cfg.perf_weights
    performance = PerformanceEstimator(n_in=2, f_p=lambda kappa, y_s, P: perf_flow(y_s, P, w))
    gain, y_max = cfg.intervention_gain, cfg.yc_max

    def dh_c_dT(kappa, y_s, T):
        return np.array([gain if 0.0 < gain * T < y_max else 0.0])

    trust = TrustModel(
        n_in=2,
        n_out=1,
        f_c=lambda kappa, P, E_c, T: trust_flow(P, T, cfg.trust_rate),
        h_c=lambda kappa, y_s, T: np.array([commander_output(T, gain, y_max)]),
        dh_c_dT=dh_c_dT,
        out_range=(0.0, y_max),
    )
    interface = zoh_interface(1, ref_range=(0.0, y_max))

    anchor, weight, egain = cfg.yc_anchor, cfg.lyap_error_weight, cfg.error_gain

    def V_p(sig):
        return float(np.sum(sig.Y_a[:n_s] ** 2) + weight * np.sum(sig.e_m[:n_s] ** 2))

    def V_c(sig):
        return float(np.sum((sig.Y_c - anchor) ** 2) + weight * np.sum(sig.e_u**2))

    plant_policy = ets.TriggerPolicy(V=V_p, W=lambda e: float(egain * np.sum(e[:n_s] ** 2)), tau=cfg.tau_p)
    controller_policy = ets.TriggerPolicy(V=V_c, W=lambda e: float(egain * np.sum(e**2)), tau=cfg.tau_c)

    equilibrium = anchor / gain
    anchors = closedloop.EquilibriumAnchors(
        X_star=np.zeros(2 * n_a),
        S_star=np.zeros(n_s + 1),
        P_star=equilibrium,
        T_star=equilibrium,
        Yc_star=np.array([anchor]),
        R_star=np.array([anchor]),
    )
    system = closedloop.build(dynamics, interface, status, performance, trust, plant_policy, controller_policy, anchors)

    X0 = np.full(2 * n_a, float(cfg.X0))
    # S_1 starts at one; the cohesion slot holds the t = 0 reading
    S0 = np.append(np.ones(n_s), system_output(X0, X_s, steep)[-1])
    x0 = system.loop.initial_state(X0, S0, cfg.P0, cfg.T0)
    return system, x0


@dataclass
class MissionResult:
    config: MissionConfig
    arc: HybridArc
    survivors: np.ndarray
    series: dict[str, np.ndarray]
    events: list[dict]
    detection_times: np.ndarray
    reason: str
    wall_time: float = 0.0
    system: closedloop.ClosedLoopSystem | None = field(default=None, repr=False)

    @property
    def n_detected(self) -> int:
        return int(np.sum(np.isfinite(self.detection_times)))

    def terminal(self, name: str) -> float:
        return float(self.series[name][-1])

    def residual_max(self, t0: float = 0.4, t1: float = 10.0) -> float:
        t = self.series["t"]
        m = (t >= t0) & (t <= t1)
        return float(np.max(self.series["delta"][m])) if np.any(m) else float("nan")


def trajectory_series(system: closedloop.ClosedLoopSystem, arc: HybridArc, cfg: MissionConfig) -> dict[str, np.ndarray]:
    loop = system.loop
    ref_kw = _ref_kw(cfg)
    cols: dict[str, list] = {k: [] for k in ("P", "T", "Yc", "R", "eta_p", "eta_c", "delta", "Vp", "Wp", "Vc", "Wu")}
    S_rows, X_rows, em_rows, eu_rows, ya_rows = [], [], [], [], []
    for t, x in zip(arc.t, arc.x):
        sig = loop.signals(float(t), x)
        cols["P"].append(sig.P)
        cols["T"].append(sig.T)
        cols["Yc"].append(float(sig.Y_c[0]))
        cols["R"].append(float(sig.R[0]))
        cols["eta_p"].append(sig.eta_p)
        cols["eta_c"].append(sig.eta_c)
        cols["delta"].append(residual(sig.X, float(t), max(float(sig.R[0]), 0.0), **ref_kw))
        vp, wp, vc, wu = loop.trigger_values(float(t), x)
        cols["Vp"].append(vp)
        cols["Wp"].append(wp)
        cols["Vc"].append(vc)
        cols["Wu"].append(wu)
        S_rows.append(sig.S)
        X_rows.append(sig.X)
        em_rows.append(sig.e_m)
        eu_rows.append(sig.e_u)
        ya_rows.append(sig.Y_a)
    out = {k: np.asarray(v, dtype=float) for k, v in cols.items()}
    out["t"] = arc.t.copy()
    out["j"] = arc.j.copy()
    out["S"] = np.vstack(S_rows)
    out["X"] = np.vstack(X_rows)
    out["e_m"] = np.vstack(em_rows)
    out["e_u"] = np.vstack(eu_rows)
    out["Y_a"] = np.vstack(ya_rows)
    return out


def event_log(system: closedloop.ClosedLoopSystem, arc: HybridArc) -> list[dict]:
    """One record per jump with the trigger values just before it."""
    loop = system.loop
    out = []
    for ev in closedloop.classify_jumps(arc):
        vp, wp, vc, wu = loop.trigger_values(ev.t, arc.x[ev.index - 1])
        out.append({"t": ev.t, "j": ev.j, "sampler": ev.sampler, "applied": ev.applied, "Vp": vp, "Wp": wp, "Vc": vc, "Wu": wu})
    return out


def detection_times(series: dict[str, np.ndarray], threshold: float) -> np.ndarray:
    S1 = series["S"][:, :-1]
    out = np.full(S1.shape[1], np.nan)
    for k in range(S1.shape[1]):
        hit = np.flatnonzero(S1[:, k] < threshold)
        if hit.size:
            out[k] = series["t"][hit[0]]
    return out


def run_mission(cfg: MissionConfig) -> MissionResult:
    started = time.perf_counter()
    system, x0 = build_mission(cfg)
    arc = solve(system, x0, cfg.integrator())
    arc.meta.update(system=system, tau_p=cfg.tau_p, tau_c=cfg.tau_c, event_tol=cfg.event_tol)
    series = trajectory_series(system, arc, cfg)
    return MissionResult(
        config=cfg,
        arc=arc,
        survivors=survivor_positions(cfg),
        series=series,
        events=event_log(system, arc),
        detection_times=detection_times(series, cfg.detect_threshold),
        reason=arc.reason,
        wall_time=time.perf_counter() - started,
        system=system,
    )


def with_overrides(cfg: MissionConfig, **kw) -> MissionConfig:
    """Copy of ``cfg`` with overrides; a new mission id resets its initial conditions."""
    if "mission" in kw and kw["mission"] != cfg.mission:
        for name in ("P0", "T0", "X0"):
            kw.setdefault(name, None)
    if "tau" in kw:
        tau = kw.pop("tau")
        kw.setdefault("tau_p", tau)
        kw.setdefault("tau_c", tau)
    return replace(cfg, **kw)
