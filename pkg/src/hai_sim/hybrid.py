"""Fixed-step solver for hybrid dynamical systems.

A hybrid system flows according to ``flow_map`` while its state lies in the
flow set and jumps through ``jump_map`` while it lies in the jump set.  The
solver integrates flows with classical RK4, localizes jump-set entry by
bisection inside the step, and records the solution on a hybrid time domain
``(t, j)``.

All callables take ``(t, x)`` with ``x`` a flat float64 vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation, EventLocalizationError, NumericalFailure

FLOW = "flow"
JUMP = "jump"

MAX_BISECTIONS = 64


@dataclass(frozen=True)
class JumpOption:
    """One element of a set-valued jump map."""

    label: str
    state: np.ndarray


def select_first(options: Sequence[JumpOption]) -> JumpOption:
    return options[0]


@dataclass(frozen=True)
class HybridSystemDef:
    """Data of a hybrid system over a flat state vector.

    ``jump_map`` returns a sequence of successors, either bare arrays or
    :class:`JumpOption` instances; ``select`` picks one deterministically.
    """

    dim: int
    flow_map: Callable[[float, np.ndarray], np.ndarray]
    jump_map: Callable[[float, np.ndarray], Sequence]
    in_flow_set: Callable[[float, np.ndarray], bool]
    in_jump_set: Callable[[float, np.ndarray], bool]
    select: Callable[[Sequence[JumpOption]], JumpOption] = select_first


@dataclass(frozen=True)
class IntegratorConfig:
    step: float = 0.005
    event_tol: float = 1e-4
    horizon: float = 40.0
    max_jumps: int = 10**6

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not 0 < self.event_tol < self.step:
            raise ValueError("event_tol must lie in (0, step)")
        # horizon 0 is accepted so callers can request the initial record only
        if not self.horizon >= 0:
            raise ValueError(f"horizon must be non-negative, got {self.horizon}")
        if self.max_jumps < 1:
            raise ValueError("max_jumps must be at least 1")


@dataclass
class HybridArc:
    """Solution samples ordered by hybrid time.

    ``tags[k]`` is ``"flow"`` for flow samples (including the initial record)
    and ``"jump"`` for the record produced by a jump; ``labels[k]`` carries the
    label of the applied jump option.
    """

    t: np.ndarray
    j: np.ndarray
    x: np.ndarray
    tags: list[str]
    labels: list[str]
    step: float
    horizon: float
    reason: str
    offending_state: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def n_jumps(self) -> int:
        return int(self.j[-1]) if len(self.j) else 0

    @property
    def final_state(self) -> np.ndarray:
        return self.x[-1]

    def jump_indices(self, label: str | None = None) -> np.ndarray:
        idx = [k for k, tag in enumerate(self.tags) if tag == JUMP and (label is None or self.labels[k] == label)]
        return np.asarray(idx, dtype=int)

    def jump_times(self, label: str | None = None) -> np.ndarray:
        return self.t[self.jump_indices(label)]


def _check_finite(value: np.ndarray, x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(value)):
        bad = int(np.flatnonzero(~np.isfinite(value))[0])
        raise NumericalFailure(f"non-finite {what} in component {bad}", index=bad, state=np.array(x))


def step_flow(sys: HybridSystemDef, x: np.ndarray, h: float, t: float = 0.0) -> np.ndarray:
    """Advance ``x`` by one classical RK4 step of length ``h``."""
    if not h > 0:
        raise ValueError("step length must be positive")
    f = sys.flow_map
    # overflow shows up as inf/nan and is reported by _check_finite
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = np.asarray(f(t, x), dtype=float)
        _check_finite(k1, x, "derivative")
        k2 = np.asarray(f(t + 0.5 * h, x + 0.5 * h * k1), dtype=float)
        _check_finite(k2, x, "derivative")
        k3 = np.asarray(f(t + 0.5 * h, x + 0.5 * h * k2), dtype=float)
        _check_finite(k3, x, "derivative")
        k4 = np.asarray(f(t + h, x + h * k3), dtype=float)
        _check_finite(k4, x, "derivative")
        out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_finite(out, x, "state")
    return out


def locate_event(
    sys: HybridSystemDef,
    x_before: np.ndarray,
    x_after: np.ndarray,
    h: float,
    t: float = 0.0,
    tol: float = 1e-4,
) -> tuple[float, np.ndarray]:
    """Bisect the step ``[t, t+h]`` for the first entry into the jump set.

    Returns the offset of the right end of the final bracket (so the returned
    state is in the jump set) together with the state there.
    """
    lo, hi = 0.0, h
    x_hi = np.asarray(x_after, dtype=float)
    for _ in range(MAX_BISECTIONS):
        if hi - lo <= tol:
            return hi, x_hi
        mid = 0.5 * (lo + hi)
        x_mid = step_flow(sys, x_before, mid, t)
        if sys.in_jump_set(t + mid, x_mid):
            hi, x_hi = mid, x_mid
        else:
            lo = mid
    if hi - lo <= tol:
        return hi, x_hi
    raise EventLocalizationError(f"bracket [{lo}, {hi}] did not shrink below {tol}")


def _normalize(options) -> list[JumpOption]:
    out = []
    for k, opt in enumerate(options):
        if isinstance(opt, JumpOption):
            out.append(JumpOption(opt.label, np.asarray(opt.state, dtype=float)))
        else:
            out.append(JumpOption(str(k), np.asarray(opt, dtype=float)))
    return out


def apply_jump(sys: HybridSystemDef, x: np.ndarray, t: float = 0.0) -> JumpOption:
    """Apply the jump map at ``x`` and return the selected successor."""
    options = _normalize(sys.jump_map(t, x))
    if not options:
        raise ContractViolation("jump map returned an empty successor set")
    chosen = sys.select(options)
    _check_finite(chosen.state, x, "jump successor")
    return chosen


def solve(sys: HybridSystemDef, x0, cfg: IntegratorConfig) -> HybridArc:
    """Compute one solution from ``x0`` up to ``cfg.horizon`` or ``cfg.max_jumps``."""
    x = np.array(x0, dtype=float)
    if x.shape != (sys.dim,):
        raise ValueError(f"initial state has shape {x.shape}, expected ({sys.dim},)")
    h, T = cfg.step, cfg.horizon
    t, j = 0.0, 0
    ts, js, xs, tags, labels = [t], [j], [x.copy()], [FLOW], [""]
    reason, offending = "horizon", None
    eps_t = 1e-12 * max(1.0, T)

    while True:
        if t >= T - eps_t:
            break
        if j >= cfg.max_jumps:
            reason = "max-jumps"
            break
        if sys.in_jump_set(t, x):
            opt = apply_jump(sys, x, t)
            x = opt.state.copy()
            j += 1
            ts.append(t); js.append(j); xs.append(x.copy()); tags.append(JUMP); labels.append(opt.label)
            continue
        if not sys.in_flow_set(t, x):
            reason, offending = "stuck", x.copy()
            break
        remaining = T - t
        if remaining - h <= eps_t:
            dt, t_next = remaining, T
        else:
            dt, t_next = h, t + h
        x_next = step_flow(sys, x, dt, t)
        if sys.in_jump_set(t_next, x_next):
            off, x_ev = locate_event(sys, x, x_next, dt, t, cfg.event_tol)
            t_next = T if off == dt and t_next == T else t + off
            x_next = x_ev
        t, x = t_next, x_next
        ts.append(t); js.append(j); xs.append(x.copy()); tags.append(FLOW); labels.append("")

    return HybridArc(
        t=np.asarray(ts, dtype=float),
        j=np.asarray(js, dtype=int),
        x=np.vstack(xs),
        tags=tags,
        labels=labels,
        step=h,
        horizon=T,
        reason=reason,
        offending_state=offending,
    )
