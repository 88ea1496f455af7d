"""Subsystem contracts for the commander / autonomous-system loop.

Five subsystems are wired in a ring::

    Y_c -> intervention interface -> R -> system dynamics -> Y_a
        -> status interface -> Y_s -> performance -> P -> trust -> Y_c

Each contract is an immutable value object holding plain callables.  Stock
interface protocols (zero- and first-order hold) are provided as factories.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Array = np.ndarray


def _empty() -> Array:
    return np.zeros(0)


@dataclass(frozen=True)
class CommanderInterventionInterface:
    """Extracts the reference ``R`` from the commander's intervention ``Y_c``.

    The interface state is ``[R, aux]`` where ``aux`` (length ``aux_dim``) is
    protocol memory, e.g. the previous sample for a first-order hold.  The
    maps take the wall-clock time as last argument so memory-based protocols
    can timestamp samples.
    """

    n_ref: int
    f_r: Callable[[Array, Array, float], Array]
    g_r: Callable[[Array, Array, float], Array]
    aux_dim: int = 0
    ref_range: tuple[float, float] = (-np.inf, np.inf)
    name: str = "interface"
    init_aux: Callable[[Array, float], Array] | None = None

    @property
    def state_dim(self) -> int:
        return self.n_ref + self.aux_dim

    def initial_state(self, y_c: Array, t: float = 0.0) -> Array:
        """Interface state holding ``y_c`` as if it had just been sampled at ``t``."""
        y_c = np.asarray(y_c, dtype=float)
        aux = np.zeros(self.aux_dim) if self.init_aux is None else self.init_aux(y_c, t)
        return np.concatenate([y_c, aux])


@dataclass(frozen=True)
class SystemDynamics:
    """Autonomous system ``dX/dt = f_a(R, E_a, X)`` with output ``Y_a = h_a(X)``.

    ``jac_h_a`` is optional; when missing the closed loop falls back to a
    central-difference directional derivative.
    """

    n_state: int
    n_out: int
    n_ref: int
    f_a: Callable[[Array, Array, Array, float], Array]
    h_a: Callable[[Array], Array]
    jac_h_a: Callable[[Array], Array] | None = None
    n_env: int = 0
    state_range: tuple[float, float] = (-10.0, 10.0)


@dataclass(frozen=True)
class SystemStatusInterface:
    """Sampler of the system output: flow ``f_s``, jump ``g_s``, output ``h_s``."""

    n_state: int
    n_in: int
    n_out: int
    f_s: Callable[[Array, Array], Array]
    g_s: Callable[[Array, Array], Array]
    h_s: Callable[[Array], Array]
    state_range: tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class PerformanceEstimator:
    n_in: int
    f_p: Callable[[Array, Array, float], float]
    kappa: Array = field(default_factory=_empty)


@dataclass(frozen=True)
class TrustModel:
    """Trust flow ``f_c(kappa, P, E_c, T)`` and intervention ``h_c(kappa, Y_s, T)``.

    ``dh_c_dT`` may be supplied analytically; otherwise it is differenced.
    """

    n_in: int
    n_out: int
    f_c: Callable[[Array, float, Array, float], float]
    h_c: Callable[[Array, Array, float], Array]
    dh_c_dT: Callable[[Array, Array, float], Array] | None = None
    kappa: Array = field(default_factory=_empty)
    n_env: int = 0
    out_range: tuple[float, float] = (-np.inf, np.inf)


@dataclass(frozen=True)
class EnvironmentInputs:
    """Exogenous signals; both default to zero-dimensional zero signals."""

    n_a: int = 0
    n_c: int = 0
    E_a: Callable[[float], Array] | None = None
    E_c: Callable[[float], Array] | None = None

    def e_a(self, t: float) -> Array:
        return np.zeros(self.n_a) if self.E_a is None else np.asarray(self.E_a(t), dtype=float)

    def e_c(self, t: float) -> Array:
        return np.zeros(self.n_c) if self.E_c is None else np.asarray(self.E_c(t), dtype=float)


# -- interface protocols -----------------------------------------------------


def zoh_flow(y_c, r) -> Array:
    return np.zeros_like(np.asarray(r, dtype=float))


def zoh_jump(y_c, r) -> Array:
    return np.array(y_c, dtype=float)


def foh_flow(y_c_k, y_c_km1, t_k: float, t_km1: float) -> Array:
    """Slope between the two most recent samples."""
    if t_k == t_km1:
        raise ValueError("first-order hold needs two distinct sample times")
    return (np.asarray(y_c_k, dtype=float) - np.asarray(y_c_km1, dtype=float)) / (t_k - t_km1)


def zoh_interface(n: int = 1, ref_range=(-np.inf, np.inf)) -> CommanderInterventionInterface:
    return CommanderInterventionInterface(
        n_ref=n,
        f_r=lambda y_c, r, t: zoh_flow(y_c, r),
        g_r=lambda y_c, r, t: zoh_jump(y_c, r),
        ref_range=ref_range,
        name="zoh",
    )


def foh_interface(n: int = 1, ref_range=(-np.inf, np.inf)) -> CommanderInterventionInterface:
    """First-order hold.

    Interface state ``[R (n), last sample (n), last sample time, slope (n)]``.
    A sample taken at the same time as the stored one yields zero slope.
    """

    def f_r(y_c, r, t):
        out = np.zeros(3 * n + 1)
        out[:n] = r[2 * n + 1 :]
        return out

    def g_r(y_c, r, t):
        y_c = np.asarray(y_c, dtype=float)
        prev, t_prev = r[n : 2 * n], r[2 * n]
        if t == t_prev:
            slope = np.zeros(n)
        else:
            slope = foh_flow(y_c, prev, t, t_prev)
        return np.concatenate([y_c, y_c, [t], slope])

    return CommanderInterventionInterface(
        n_ref=n,
        f_r=f_r,
        g_r=g_r,
        aux_dim=2 * n + 1,
        ref_range=ref_range,
        name="foh",
        init_aux=lambda y_c, t: np.concatenate([y_c, [t], np.zeros(n)]),
    )


def zoh_status(n: int, state_range=(0.0, 1.0)) -> SystemStatusInterface:
    """Status interface that holds the last output sample and relays it."""
    return SystemStatusInterface(
        n_state=n,
        n_in=n,
        n_out=n,
        f_s=lambda y_a, s: np.zeros(n),
        g_s=lambda y_a, s: np.array(y_a, dtype=float),
        h_s=lambda s: np.array(s, dtype=float),
        state_range=state_range,
    )


# -- assumption smoke test ---------------------------------------------------


@dataclass(frozen=True)
class MapProbe:
    """A map flattened to ``R^n -> R^m`` with a box-shaped probe domain."""

    name: str
    fn: Callable[[Array], Array]
    n_in: int
    lo: float
    hi: float
    out_range: tuple[float, float] = (-np.inf, np.inf)


@dataclass
class MapCheck:
    name: str
    passed: bool
    non_finite: int = 0
    discontinuities: int = 0
    out_of_range: int = 0


@dataclass
class AssumptionReport:
    checks: list[MapCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def _split(v: Array, sizes: list[int]) -> list[Array]:
    return np.split(v, np.cumsum(sizes)[:-1])


def map_probes(sub) -> list[MapProbe]:
    """Flatten a subsystem's maps into probe-able vector functions."""
    if isinstance(sub, MapProbe):
        return [sub]
    if isinstance(sub, (list, tuple)):
        return [p for s in sub for p in map_probes(s)]
    if isinstance(sub, CommanderInterventionInterface):
        n = sub.n_ref
        lo, hi = (-2.0, 2.0) if not np.isfinite(sub.ref_range[0]) else sub.ref_range

        def wrap(fn):
            # memory slots are probed with the current sample and a past time
            def call(v):
                r = v[n:] if not sub.aux_dim else np.concatenate([v[n:], v[n:], [-1.0], np.zeros(n)])
                return fn(v[:n], r, 0.0)

            return call

        return [
            MapProbe(f"{sub.name}.f_r", wrap(sub.f_r), 2 * n, lo, hi),
            MapProbe(f"{sub.name}.g_r", wrap(sub.g_r), 2 * n, lo, hi),
        ]
    if isinstance(sub, SystemDynamics):
        lo, hi = sub.state_range
        sizes = [sub.n_ref, sub.n_env, sub.n_state]
        return [
            MapProbe("f_a", lambda v: sub.f_a(*_split(v, sizes), 0.0), sum(sizes), lo, hi),
            MapProbe("h_a", sub.h_a, sub.n_state, lo, hi),
        ]
    if isinstance(sub, SystemStatusInterface):
        lo, hi = sub.state_range
        sizes = [sub.n_in, sub.n_state]
        return [
            MapProbe("f_s", lambda v: sub.f_s(*_split(v, sizes)), sum(sizes), lo, hi),
            MapProbe("g_s", lambda v: sub.g_s(*_split(v, sizes)), sum(sizes), lo, hi, sub.state_range),
            MapProbe("h_s", sub.h_s, sub.n_state, lo, hi),
        ]
    if isinstance(sub, PerformanceEstimator):
        return [MapProbe("f_p", lambda v: np.atleast_1d(sub.f_p(sub.kappa, v[:-1], v[-1])), sub.n_in + 1, -2.0, 2.0)]
    if isinstance(sub, TrustModel):
        return [
            MapProbe(
                "f_c",
                lambda v: np.atleast_1d(sub.f_c(sub.kappa, v[0], np.zeros(sub.n_env), v[1])),
                2,
                -2.0,
                2.0,
            ),
            MapProbe("h_c", lambda v: np.atleast_1d(sub.h_c(sub.kappa, v[:-1], v[-1])), sub.n_in + 1, -2.0, 2.0, sub.out_range),
        ]
    raise TypeError(f"don't know how to probe {type(sub).__name__}")


def _gap(a: Array, b: Array) -> float:
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def _check_map(probe: MapProbe, rng: np.random.Generator, probes: int, refinements: int = 30) -> MapCheck:
    check = MapCheck(probe.name, True)
    lo_out, hi_out = probe.out_range
    span = probe.hi - probe.lo
    for _ in range(probes):
        a = rng.uniform(probe.lo, probe.hi, probe.n_in)
        b = a + rng.uniform(-0.05, 0.05, probe.n_in) * span
        with np.errstate(all="ignore"):
            fa = np.atleast_1d(np.asarray(probe.fn(a), dtype=float))
            fb = np.atleast_1d(np.asarray(probe.fn(b), dtype=float))
        if not (np.all(np.isfinite(fa)) and np.all(np.isfinite(fb))):
            check.non_finite += 1
            continue
        if np.any(fa < lo_out - 1e-12) or np.any(fa > hi_out + 1e-12):
            check.out_of_range += 1
        # halve the segment towards the larger output gap; a continuous map
        # drives the gap to zero with the input gap, a jump keeps it open
        fa_seg, fb_seg = fa, fb
        for _ in range(refinements):
            m = 0.5 * (a + b)
            with np.errstate(all="ignore"):
                fm = np.atleast_1d(np.asarray(probe.fn(m), dtype=float))
            if not np.all(np.isfinite(fm)):
                check.non_finite += 1
                break
            if _gap(fa_seg, fm) >= _gap(fm, fb_seg):
                b, fb_seg = m, fm
            else:
                a, fa_seg = m, fm
        else:
            scale = 1.0 + float(np.max(np.abs(fa))) if fa.size else 1.0
            if _gap(fa_seg, fb_seg) > 1e-6 * scale:
                check.discontinuities += 1
    check.passed = check.non_finite == 0 and check.discontinuities == 0 and check.out_of_range == 0
    return check


def validate_assumptions(sub, probes: int = 1000, seed: int = 0) -> AssumptionReport:
    """Numerical smoke test of continuity, finiteness and range closure.

    Samples random input pairs inside each map's probe box and refines each
    pair by bisection; a map is flagged when its output gap survives the
    refinement, when it returns non-finite values, or when it leaves its
    declared output range.  This is evidence, not proof.
    """
    if probes < 100:
        raise ValueError("validate_assumptions needs at least 100 probes")
    rng = np.random.default_rng(seed)
    return AssumptionReport([_check_map(p, rng, probes) for p in map_probes(sub)])
