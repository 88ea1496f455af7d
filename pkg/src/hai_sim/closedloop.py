"""Assembly of the five subsystems and two samplers into one hybrid system.

The packed state is::

    [ x_p | e_m | eta_p | x_c (P - P*, T - T*) | e_u | eta_c | S | R, aux ]

The first six blocks are the plant-side and controller-side aggregates the
stability analysis talks about.  ``S`` and the interface state ``[R, aux]``
are carried explicitly as sampler memory: a status jump map that is not a
plain hold (``S+ = diag(S_1, 1) Y_a`` for instance) makes ``S`` impossible to
recover from ``e_m`` alone.  Along flows the error blocks obey

    d e_m / dt = f_s - (dh_a/dx_p) f_a
    d e_u / dt = f_r - dY_c/dt

and are zeroed by their sampler's jump, so ``e_m = S - h_a(X) - S_k`` where
``S_k`` is re-pinned at each plant sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ets
from .errors import ConfigurationError, ContractViolation
from .framework import (
    CommanderInterventionInterface,
    EnvironmentInputs,
    PerformanceEstimator,
    SystemDynamics,
    SystemStatusInterface,
    TrustModel,
)
from .hybrid import HybridSystemDef, JumpOption

FLOW = "flow"
JUMP_PLANT = "jump_plant"
JUMP_CTRL = "jump_ctrl"
JUMP_BOTH = "jump_both"
STUCK = "stuck"


@dataclass(frozen=True)
class EquilibriumAnchors:
    X_star: np.ndarray
    S_star: np.ndarray
    P_star: float = 0.0
    T_star: float = 0.0
    Yc_star: np.ndarray = field(default_factory=lambda: np.zeros(1))
    R_star: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        for name in ("X_star", "S_star", "Yc_star", "R_star"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if not np.all(np.isfinite(v)):
                raise ConfigurationError(f"anchor {name} must be finite")
            object.__setattr__(self, name, v)
        if not (np.isfinite(self.P_star) and np.isfinite(self.T_star)):
            raise ConfigurationError("anchors P*, T* must be finite")


@dataclass(frozen=True)
class Layout:
    n_p: int
    n_m: int
    n_u: int
    n_r: int  # interface state incl. protocol memory

    def _sizes(self):
        return [self.n_p, self.n_m, 1, 2, self.n_u, 1, self.n_m, self.n_r]

    @property
    def dim(self) -> int:
        return sum(self._sizes())

    def slices(self) -> dict[str, slice]:
        names = ["x_p", "e_m", "eta_p", "x_c", "e_u", "eta_c", "S", "R"]
        out, k = {}, 0
        for name, n in zip(names, self._sizes()):
            out[name] = slice(k, k + n)
            k += n
        return out


@dataclass
class ClosedLoopState:
    x_p: np.ndarray
    e_m: np.ndarray
    eta_p: float
    x_c: np.ndarray
    e_u: np.ndarray
    eta_c: float
    S: np.ndarray
    R: np.ndarray


@dataclass
class Signals:
    """Physical quantities reconstructed from a packed state."""

    t: float
    X: np.ndarray
    Y_a: np.ndarray
    S: np.ndarray
    Y_s: np.ndarray
    P: float
    T: float
    Y_c: np.ndarray
    R: np.ndarray
    R_state: np.ndarray
    e_m: np.ndarray
    e_u: np.ndarray
    eta_p: float
    eta_c: float
    x_c: np.ndarray


@dataclass(frozen=True)
class ClosedLoop:
    dynamics: SystemDynamics
    interface: CommanderInterventionInterface
    status: SystemStatusInterface
    performance: PerformanceEstimator
    trust: TrustModel
    plant_policy: ets.TriggerPolicy
    controller_policy: ets.TriggerPolicy
    anchors: EquilibriumAnchors
    env: EnvironmentInputs = field(default_factory=EnvironmentInputs)

    def __post_init__(self):
        _check_wiring(self)
        lay = Layout(self.dynamics.n_state, self.dynamics.n_out, self.interface.n_ref, self.interface.state_dim)
        object.__setattr__(self, "layout", lay)
        object.__setattr__(self, "_sl", lay.slices())

    # -- packing ---------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.layout.dim

    def pack(self, q: ClosedLoopState) -> np.ndarray:
        x = np.empty(self.dim)
        for name, sl in self._sl.items():
            x[sl] = np.atleast_1d(np.asarray(getattr(q, name), dtype=float))
        return x

    def unpack(self, x: np.ndarray) -> ClosedLoopState:
        sl = self._sl
        return ClosedLoopState(
            x_p=x[sl["x_p"]].copy(),
            e_m=x[sl["e_m"]].copy(),
            eta_p=float(x[sl["eta_p"]][0]),
            x_c=x[sl["x_c"]].copy(),
            e_u=x[sl["e_u"]].copy(),
            eta_c=float(x[sl["eta_c"]][0]),
            S=x[sl["S"]].copy(),
            R=x[sl["R"]].copy(),
        )

    def initial_state(self, X0, S0, P0: float, T0: float, R0=None, e_m=None, e_u=None) -> np.ndarray:
        """Packed state with both samplers freshly reset (unless errors are given)."""
        X0 = np.asarray(X0, dtype=float).ravel()
        S0 = np.asarray(S0, dtype=float)
        if R0 is None:
            y_s = np.atleast_1d(self.status.h_s(S0))
            y_c = np.atleast_1d(self.trust.h_c(self.trust.kappa, y_s, float(T0)))
            R0 = self.interface.initial_state(y_c)
        a = self.anchors
        q = ClosedLoopState(
            x_p=X0 - a.X_star,
            e_m=np.zeros(self.layout.n_m) if e_m is None else e_m,
            eta_p=0.0,
            x_c=np.array([P0 - a.P_star, T0 - a.T_star]),
            e_u=np.zeros(self.layout.n_u) if e_u is None else e_u,
            eta_c=0.0,
            S=S0,
            R=np.asarray(R0, dtype=float),
        )
        return self.pack(q)

    # -- signals ---------------------------------------------------------

    def signals(self, t: float, x: np.ndarray) -> Signals:
        sl, a = self._sl, self.anchors
        X = x[sl["x_p"]] + a.X_star
        S = x[sl["S"]]
        x_c = x[sl["x_c"]]
        P, T = float(x_c[0] + a.P_star), float(x_c[1] + a.T_star)
        Y_s = np.atleast_1d(self.status.h_s(S))
        R_state = x[sl["R"]]
        return Signals(
            t=t,
            X=X,
            Y_a=np.atleast_1d(self.dynamics.h_a(X)),
            S=S,
            Y_s=Y_s,
            P=P,
            T=T,
            Y_c=np.atleast_1d(self.trust.h_c(self.trust.kappa, Y_s, T)),
            R=R_state[: self.layout.n_u],
            R_state=R_state,
            e_m=x[sl["e_m"]],
            e_u=x[sl["e_u"]],
            eta_p=float(x[sl["eta_p"]][0]),
            eta_c=float(x[sl["eta_c"]][0]),
            x_c=x_c,
        )

    # -- flows -----------------------------------------------------------

    def _output_rate(self, X: np.ndarray, v: np.ndarray) -> np.ndarray:
        """(dh_a/dX) v, analytic if available else central differences."""
        if self.dynamics.jac_h_a is not None:
            return self.dynamics.jac_h_a(X) @ v
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            return np.zeros(self.layout.n_m)
        d = 1e-6 * (1.0 + float(np.linalg.norm(X))) / nv
        h = self.dynamics.h_a
        return (np.asarray(h(X + d * v)) - np.asarray(h(X - d * v))) / (2 * d)

    def _yc_rate(self, sig: Signals, s_dot: np.ndarray, t_dot: float) -> np.ndarray:
        tr, kappa = self.trust, self.trust.kappa
        rate = np.zeros(self.layout.n_u)
        if np.any(s_dot):
            ns = float(np.linalg.norm(s_dot))
            d = 1e-6 * (1.0 + float(np.linalg.norm(sig.S))) / ns
            hi = tr.h_c(kappa, self.status.h_s(sig.S + d * s_dot), sig.T)
            lo = tr.h_c(kappa, self.status.h_s(sig.S - d * s_dot), sig.T)
            rate = rate + (np.atleast_1d(hi) - np.atleast_1d(lo)) / (2 * d)
        if t_dot != 0.0:
            if tr.dh_c_dT is not None:
                dT = np.atleast_1d(tr.dh_c_dT(kappa, sig.Y_s, sig.T))
            else:
                d = 1e-6 * (1.0 + abs(sig.T))
                dT = (np.atleast_1d(tr.h_c(kappa, sig.Y_s, sig.T + d)) - np.atleast_1d(tr.h_c(kappa, sig.Y_s, sig.T - d))) / (2 * d)
            rate = rate + dT * t_dot
        return rate

    def _rates(self, t: float, x: np.ndarray):
        sig = self.signals(t, x)
        fa = np.asarray(self.dynamics.f_a(sig.R, self.env.e_a(t), sig.X, t), dtype=float)
        fs = np.asarray(self.status.f_s(sig.Y_a, sig.S), dtype=float)
        de_m = fs - self._output_rate(sig.X, fa)
        kappa = self.performance.kappa
        p_dot = float(self.performance.f_p(kappa, sig.Y_s, sig.P))
        t_dot = float(self.trust.f_c(self.trust.kappa, sig.P, self.env.e_c(t), sig.T))
        r_dot = np.asarray(self.interface.f_r(sig.Y_c, sig.R_state, t), dtype=float)
        de_u = r_dot[: self.layout.n_u] - self._yc_rate(sig, fs, t_dot)
        return fa, de_m, np.array([p_dot, t_dot]), de_u, fs, r_dot

    def f1(self, t: float, x: np.ndarray) -> np.ndarray:
        """Rates of ``(x_p, e_m, eta_p)``."""
        fa, de_m, *_ = self._rates(t, x)
        return np.concatenate([fa, de_m, [1.0]])

    def f2(self, t: float, x: np.ndarray) -> np.ndarray:
        """Rates of ``(x_c, e_u, eta_c)``."""
        _, _, phi1, de_u, *_ = self._rates(t, x)
        return np.concatenate([phi1, de_u, [1.0]])

    def flow(self, t: float, x: np.ndarray) -> np.ndarray:
        fa, de_m, phi1, de_u, fs, r_dot = self._rates(t, x)
        return np.concatenate([fa, de_m, [1.0], phi1, de_u, [1.0], fs, r_dot])

    # -- sets and jumps --------------------------------------------------

    def sampler_states(self, sig: Signals) -> tuple[ets.SamplerState, ets.SamplerState]:
        return ets.SamplerState(sig.e_m, sig.eta_p), ets.SamplerState(sig.e_u, sig.eta_c)

    def membership(self, t: float, x: np.ndarray) -> str:
        sig = self.signals(t, x)
        sp, sc = self.sampler_states(sig)
        jp = ets.in_jump_set(self.plant_policy, sig, sp)
        jc = ets.in_jump_set(self.controller_policy, sig, sc)
        if jp and jc:
            return JUMP_BOTH
        if jp:
            return JUMP_PLANT
        if jc:
            return JUMP_CTRL
        if ets.in_flow_set(self.plant_policy, sig, sp) and ets.in_flow_set(self.controller_policy, sig, sc):
            return FLOW
        return STUCK

    def _jump_plant(self, t: float, x: np.ndarray) -> np.ndarray:
        sl, sig = self._sl, self.signals(t, x)
        out = x.copy()
        out[sl["S"]] = self.status.g_s(sig.Y_a, sig.S)
        out[sl["e_m"]] = 0.0
        out[sl["eta_p"]] = 0.0
        return out

    def _jump_controller(self, t: float, x: np.ndarray) -> np.ndarray:
        sl, sig = self._sl, self.signals(t, x)
        out = x.copy()
        out[sl["R"]] = self.interface.g_r(sig.Y_c, sig.R_state, t)
        out[sl["e_u"]] = 0.0
        out[sl["eta_c"]] = 0.0
        return out

    def g(self, t: float, x: np.ndarray, which: str) -> np.ndarray:
        """Jump of one sampler, or plant-then-controller for ``"both"``."""
        m = self.membership(t, x)
        allowed = {
            "plant": (JUMP_PLANT, JUMP_BOTH),
            "controller": (JUMP_CTRL, JUMP_BOTH),
            "both": (JUMP_BOTH,),
        }
        if which not in allowed:
            raise ValueError(f"unknown sampler {which!r}")
        if m not in allowed[which]:
            raise ContractViolation(f"{which} jump requested but state is classified {m}")
        if which == "plant":
            return self._jump_plant(t, x)
        if which == "controller":
            return self._jump_controller(t, x)
        return self._jump_controller(t, self._jump_plant(t, x))

    def jump_options(self, t: float, x: np.ndarray) -> list[JumpOption]:
        m = self.membership(t, x)
        opts = []
        if m in (JUMP_PLANT, JUMP_BOTH):
            opts.append(JumpOption(ets.PLANT, self._jump_plant(t, x)))
        if m in (JUMP_CTRL, JUMP_BOTH):
            opts.append(JumpOption(ets.CONTROLLER, self._jump_controller(t, x)))
        return opts

    def trigger_values(self, t: float, x: np.ndarray) -> tuple[float, float, float, float]:
        """``(V_p, W_p, V_c, W_u)`` at a packed state."""
        sig = self.signals(t, x)
        pp, cp = self.plant_policy, self.controller_policy
        return float(pp.V(sig)), float(pp.W(sig.e_m)), float(cp.V(sig)), float(cp.W(sig.e_u))

    def distance_controller_set(self, x: np.ndarray) -> float:
        sl = self._sl
        return ets.set_distance(x[sl["x_c"]], x[sl["e_u"]])

    def distance_plant_set(self, x: np.ndarray) -> float:
        sl = self._sl
        return ets.set_distance(x[sl["x_p"]], x[sl["e_m"]])

    def slices(self) -> dict[str, slice]:
        return dict(self._sl)


@dataclass(frozen=True)
class ClosedLoopSystem(HybridSystemDef):
    """A :class:`HybridSystemDef` that keeps a handle on its closed loop."""

    loop: ClosedLoop | None = None


def _check_wiring(cl: ClosedLoop) -> None:
    pairs = [
        ("trust output Y_c", cl.trust.n_out, "intervention interface input", cl.interface.n_ref),
        ("interface reference R", cl.interface.n_ref, "system dynamics reference input", cl.dynamics.n_ref),
        ("system output Y_a", cl.dynamics.n_out, "status interface input", cl.status.n_in),
        ("system output Y_a", cl.dynamics.n_out, "status interface state S", cl.status.n_state),
        ("status output Y_s", cl.status.n_out, "performance estimator input", cl.performance.n_in),
        ("status output Y_s", cl.status.n_out, "trust model input", cl.trust.n_in),
        ("environment E_a", cl.env.n_a, "system dynamics environment input", cl.dynamics.n_env),
        ("environment E_c", cl.env.n_c, "trust model environment input", cl.trust.n_env),
        ("anchor X*", cl.anchors.X_star.size, "system state X", cl.dynamics.n_state),
        ("anchor S*", cl.anchors.S_star.size, "status state S", cl.status.n_state),
        ("anchor Y_c*", cl.anchors.Yc_star.size, "trust output Y_c", cl.trust.n_out),
        ("anchor R*", cl.anchors.R_star.size, "interface reference R", cl.interface.n_ref),
    ]
    for a, na, b, nb in pairs:
        if na != nb:
            raise ConfigurationError(f"dimension mismatch: {a} has {na} components but {b} expects {nb}")


def build(
    dynamics: SystemDynamics,
    interface: CommanderInterventionInterface,
    status: SystemStatusInterface,
    performance: PerformanceEstimator,
    trust: TrustModel,
    plant_policy: ets.TriggerPolicy,
    controller_policy: ets.TriggerPolicy,
    anchors: EquilibriumAnchors,
    env: EnvironmentInputs | None = None,
) -> ClosedLoopSystem:
    loop = ClosedLoop(
        dynamics, interface, status, performance, trust, plant_policy, controller_policy, anchors,
        env if env is not None else EnvironmentInputs(),
    )
    return ClosedLoopSystem(
        dim=loop.dim,
        flow_map=loop.flow,
        jump_map=loop.jump_options,
        in_flow_set=lambda t, x: loop.membership(t, x) == FLOW,
        in_jump_set=lambda t, x: loop.membership(t, x).startswith("jump"),
        loop=loop,
    )


@dataclass(frozen=True)
class JumpEvent:
    t: float
    j: int
    index: int
    applied: str
    sampler: str  # plant, controller or both


def classify_jumps(arc) -> list[JumpEvent]:
    """Jump records of an arc, pairing same-time plant/controller jumps as ``both``."""
    idx = arc.jump_indices()
    events = []
    for n, k in enumerate(idx):
        label = arc.labels[k]
        sampler = label
        for m in (n - 1, n + 1):
            if 0 <= m < len(idx):
                k2 = idx[m]
                if abs(k2 - k) == 1 and arc.t[k2] == arc.t[k] and arc.labels[k2] != label:
                    sampler = "both"
        events.append(JumpEvent(float(arc.t[k]), int(arc.j[k]), int(k), label, sampler))
    return events
